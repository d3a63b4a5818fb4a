mod support;

use pcim_core::cas::{MemoryBackend, Store, CHUNK_SIZE};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::props::{expected_objects, gc_interleaving, random_bytes, round_trip};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn files_round_trip(seed in any::<u64>(), len in 0usize..(4 << 20)) {
        let data = random_bytes(&mut ChaCha8Rng::seed_from_u64(seed), len);
        prop_assert_eq!(round_trip(&data), Ok(()));
    }

    #[test]
    fn object_count_formula(seed in any::<u64>(), len in (CHUNK_SIZE + 1)..(3 << 20)) {
        let data = random_bytes(&mut ChaCha8Rng::seed_from_u64(seed), len);
        let mut store = Store::new(MemoryBackend::new());
        store.put_file(&data).unwrap();
        prop_assert_eq!(store.len(), expected_objects(len));
    }

    #[test]
    fn gc_keeps_pinned_closure(seed in any::<u64>()) {
        prop_assert_eq!(gc_interleaving(&mut ChaCha8Rng::seed_from_u64(seed)), Ok(()));
    }
}

#[test]
fn three_hundred_kib_spot_check() {
    let data = random_bytes(&mut ChaCha8Rng::seed_from_u64(0), 300 * 1024);
    let mut store = Store::new(MemoryBackend::new());
    store.put_file(&data).unwrap();
    assert_eq!(store.len(), 3);
}

#[test]
fn boundary_sizes_round_trip() {
    for len in [0, 1, CHUNK_SIZE - 1, CHUNK_SIZE, CHUNK_SIZE + 1, 2 * CHUNK_SIZE] {
        let data = random_bytes(&mut ChaCha8Rng::seed_from_u64(len as u64), len);
        round_trip(&data).unwrap();
    }
}
