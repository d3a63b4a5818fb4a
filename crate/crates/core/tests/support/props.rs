//! Randomised property checks shared by the property tests and the
//! acceptance suite. Each returns a description of the first failure.

use pcim_core::cas::{Cid, MemoryBackend, Store, CHUNK_SIZE};
use pcim_core::envelope::{decrypt_bytes, encrypt_for, EnvelopeError, KeyKind, KeyPair};
use pcim_core::ledger::{Block, Chain};
use rand::{Rng, RngCore};

pub fn random_bytes<R: RngCore>(rng: &mut R, len: usize) -> Vec<u8> {
    let mut out = vec![0; len];
    rng.fill_bytes(&mut out);
    out
}

/// Expected object count for a fresh file of `n` distinct-chunk bytes.
pub fn expected_objects(n: usize) -> usize {
    if n <= CHUNK_SIZE {
        1
    } else {
        n.div_ceil(CHUNK_SIZE) + 1
    }
}

pub fn round_trip(data: &[u8]) -> Result<(), String> {
    let mut store = Store::new(MemoryBackend::new());
    let root = store.put_file(data).map_err(|e| e.to_string())?;
    let back = store.get_file(&root).map_err(|e| e.to_string())?;
    if back != data {
        return Err(format!("{} byte file did not round-trip", data.len()));
    }
    let count = store.len();
    store.put_file(data).map_err(|e| e.to_string())?;
    if store.len() != count {
        return Err(format!("second put of {} bytes added {} entries", data.len(), store.len() - count));
    }
    Ok(())
}

/// Random puts, pins, unpins, clock moves and collections. After every
/// collection all pin-reachable objects must still read back.
pub fn gc_interleaving<R: Rng>(rng: &mut R) -> Result<(), String> {
    let mut store = Store::new(MemoryBackend::new());
    let mut roots: Vec<Cid> = Vec::new();
    let mut now = 0;
    for step in 0..40 {
        match rng.gen_range(0..5) {
            0 | 1 => {
                let len = rng.gen_range(0..3 * CHUNK_SIZE / 2);
                let mut data = random_bytes(rng, len);
                if rng.gen_bool(0.3) && !data.is_empty() {
                    data[..len.min(CHUNK_SIZE)].fill(7);
                }
                roots.push(store.put_file(&data).map_err(|e| e.to_string())?);
            }
            2 if !roots.is_empty() => {
                let r = roots[rng.gen_range(0..roots.len())];
                if store.contains(&r) {
                    store.pin(&r).map_err(|e| e.to_string())?;
                }
            }
            3 if !roots.is_empty() => {
                let r = roots[rng.gen_range(0..roots.len())];
                if store.is_pinned(&r) {
                    store.unpin(&r).map_err(|e| e.to_string())?;
                }
            }
            _ => {
                now += rng.gen_range(0..200);
                store.set_clock(now);
                let pinned = store.pinned_set();
                let evicted = store.gc(rng.gen_range(0..100)).map_err(|e| e.to_string())?;
                if let Some(bad) = evicted.iter().find(|c| pinned.contains(c)) {
                    return Err(format!("step {step}: evicted pinned object {bad}"));
                }
                for cid in &pinned {
                    store
                        .get_object(cid)
                        .map_err(|e| format!("step {step}: pinned {cid} unreadable: {e}"))?;
                }
            }
        }
    }
    Ok(())
}

/// Flips one random byte of one random persisted block (beyond genesis)
/// and checks the chain no longer validates.
pub fn block_flip_detected<R: Rng>(chain: &Chain, rng: &mut R) -> Result<(), String> {
    let mut blocks = chain.blocks().to_vec();
    let h = rng.gen_range(1..blocks.len());
    let mut bytes = blocks[h].encode();
    let i = rng.gen_range(0..bytes.len());
    bytes[i] ^= rng.gen_range(1..=255u8);
    let Ok(decoded) = Block::decode(&bytes) else {
        return Ok(());
    };
    blocks[h] = decoded;
    match Chain::from_blocks(chain.config().clone(), &blocks) {
        Ok(_) => Err(format!("flip at byte {i} of block {h} validated")),
        Err(_) => Ok(()),
    }
}

/// Flips one random byte of a fresh envelope and expects authentication failure.
pub fn envelope_flip_rejected<R: RngCore + rand::CryptoRng + Rng>(rng: &mut R) -> Result<(), String> {
    let keys = KeyPair::generate(KeyKind::Encryption, rng);
    let len = rng.gen_range(0..4096);
    let plain = random_bytes(rng, len);
    let env = encrypt_for(&keys.public(), &plain, rng).map_err(|e| e.to_string())?;
    let mut bytes = env.to_bytes();
    let i = rng.gen_range(0..bytes.len());
    bytes[i] ^= rng.gen_range(1..=255u8);
    match decrypt_bytes(&keys, &bytes) {
        Err(EnvelopeError::AuthFailure) => Ok(()),
        other => Err(format!("flip at byte {i} gave {other:?}")),
    }
}
