//! Storage, event-latency and gas benchmarks. Each report is a CSV table
//! preceded by `# key: value` metadata lines describing the host and the
//! parameters, so runs on different machines can be compared.

use std::io::{self, Write};
use std::path::Path;
use std::time::Instant;

use pcim_core::cas::{Backend, CasError, Cid, MemoryBackend, Store};
use pcim_core::ledger::{ChainConfig, Gas, GasSchedule, PCAC_CONTRACT};
use pcim_core::pcac::Decision;
use pcim_core::protocol::{ActorSpec, ProtocolError, Role, World, WorldConfig};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use statrs::statistics::{Data, OrderStatistics, RankTieBreaker, Statistics};

use crate::disk;

pub type Metadata = Vec<(String, String)>;

/// Host and build description shared by every report.
pub fn host_metadata(bench: &str) -> Metadata {
    let cpus = std::thread::available_parallelism().map_or(0, |n| n.get());
    vec![
        ("bench".into(), bench.into()),
        ("pcim_version".into(), env!("CARGO_PKG_VERSION").into()),
        ("os".into(), std::env::consts::OS.into()),
        ("arch".into(), std::env::consts::ARCH.into()),
        ("cpus".into(), cpus.to_string()),
        ("debug_build".into(), cfg!(debug_assertions).to_string()),
    ]
}

/// Writes metadata lines and then the rows as CSV with a header.
pub fn write_csv<W: Write, T: Serialize>(mut out: W, metadata: &Metadata, rows: &[T]) -> io::Result<()> {
    for (k, v) in metadata {
        writeln!(out, "# {k}: {v}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(io::Error::other)?;
    }
    w.flush()
}

fn seeded_bytes(seed: u64, len: usize) -> Vec<u8> {
    let mut out = vec![0; len];
    ChaCha20Rng::seed_from_u64(seed).fill_bytes(&mut out);
    out
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct StorageRow {
    /// `fresh` for a put into an empty store, `repeat` for a second put of the same bytes.
    pub label: &'static str,
    pub size_bytes: u64,
    pub trials: u32,
    pub put_mean_s: f64,
    pub get_mean_s: f64,
    /// Stored bytes added by the put.
    pub added_bytes: u64,
}

pub const STORAGE_HEADER: &str = "label,size_bytes,trials,put_mean_s,get_mean_s,added_bytes";

fn storage_trial<B: Backend>(store: &mut Store<B>, data: &[u8]) -> Result<[(f64, f64, u64); 2], CasError> {
    let mut out = [(0.0, 0.0, 0); 2];
    for slot in &mut out {
        let before = store.stats().total_bytes;
        let t = Instant::now();
        let root = store.put_file(data)?;
        let put = t.elapsed().as_secs_f64();
        let t = Instant::now();
        let back = store.get_file(&root)?;
        let get = t.elapsed().as_secs_f64();
        assert_eq!(back.len(), data.len());
        *slot = (put, get, store.stats().total_bytes - before);
    }
    Ok(out)
}

/// Mean put/get time per size over `trials` fresh stores. With `disk_root`
/// the objects go to files below that directory, which is removed after.
pub fn bench_storage(sizes: &[usize], trials: u32, seed: u64, disk_root: Option<&Path>) -> Result<Vec<StorageRow>, CasError> {
    let trials = trials.max(1);
    let mut fresh = Vec::new();
    let mut repeat = Vec::new();
    for &size in sizes {
        let data = seeded_bytes(seed ^ size as u64, size);
        let mut sums = [(0.0, 0.0, 0); 2];
        for trial in 0..trials {
            let results = match disk_root {
                Some(root) => {
                    let dir = root.join(format!("trial-{size}-{trial}"));
                    let mut store = disk::open_store(&dir).map_err(|e| CasError::Backend(e.to_string()))?;
                    let r = storage_trial(&mut store, &data);
                    let _ = std::fs::remove_dir_all(&dir);
                    r?
                }
                None => storage_trial(&mut Store::new(MemoryBackend::new()), &data)?,
            };
            for (sum, r) in sums.iter_mut().zip(results) {
                sum.0 += r.0;
                sum.1 += r.1;
                sum.2 = r.2;
            }
        }
        let n = trials as f64;
        let row = |label, (put, get, added): (f64, f64, u64)| StorageRow {
            label,
            size_bytes: size as u64,
            trials,
            put_mean_s: put / n,
            get_mean_s: get / n,
            added_bytes: added,
        };
        fresh.push(row("fresh", sums[0]));
        repeat.push(row("repeat", sums[1]));
    }
    fresh.sort_by_key(|r| r.size_bytes);
    repeat.sort_by_key(|r| r.size_bytes);
    fresh.extend(repeat);
    Ok(fresh)
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct EventRow {
    pub function: &'static str,
    pub wallet: usize,
    pub address: String,
    pub repeats: u32,
    /// Mean seconds from submitting the transaction to its block being sealed.
    pub mean_s: f64,
    pub gas_used: Gas,
    pub block_size_bytes: u64,
}

pub const EVENTS_HEADER: &str = "function,wallet,address,repeats,mean_s,gas_used,block_size_bytes";

pub const EVENT_FUNCTIONS: [&str; 6] = [
    "deploy",
    "create_contract",
    "requesting_access",
    "approve_IRs",
    "trace_authorization",
    "remove_IRs",
];

/// Time to record each contract function (plus a deployment transfer) for
/// `wallets` patients, averaged over `repeats` rounds. Every transaction is
/// sealed in its own block.
pub fn bench_events(wallets: usize, repeats: u32, seed: u64) -> Result<Vec<EventRow>, ProtocolError> {
    let mut actors = vec![ActorSpec {
        name: "radiologist".into(),
        role: Role::Radiologist,
        address: None,
    }];
    for w in 0..wallets {
        actors.push(ActorSpec { name: format!("p{w}"), role: Role::Patient, address: None });
        actors.push(ActorSpec { name: format!("r{w}"), role: Role::Requestor, address: None });
    }
    let config = WorldConfig { seed, actors, ..WorldConfig::default() };
    let mut world = World::new(config, Store::new(MemoryBackend::new()))?;
    let repeats = repeats.max(1);
    // [wallet][function] -> (seconds, gas, size)
    let mut acc = vec![[(0.0f64, 0u64, 0u64); 6]; wallets];
    let mut image_seq = 0u64;

    for _ in 0..repeats {
        for (w, slots) in acc.iter_mut().enumerate() {
            let (p, r) = (format!("p{w}"), format!("r{w}"));
            image_seq += 1;
            let image = seeded_bytes(seed ^ image_seq, 4096);
            let root = world.upload_image(&p, "radiologist", &image)?;
            for (f, slot) in slots.iter_mut().enumerate() {
                let next = world.now() + 1_000;
                world.advance_to(next)?;
                let t = Instant::now();
                let receipt = match f {
                    0 => world.transfer(&p, PCAC_CONTRACT, 0)?,
                    1 => world.register_image(&p, root, "benchmark image")?,
                    2 => world.request_access(&r, &p, Some(root), "benchmark request")?,
                    3 => world.decide(&p, &r, Some(root), Decision::Grant, "")?,
                    4 => world.trace(&p, &p, &r, Some(root))?,
                    _ => world.revoke(&p, &r, Some(root))?,
                };
                world.flush();
                slot.0 += t.elapsed().as_secs_f64();
                slot.1 = receipt.gas_used;
                slot.2 += world.chain.tip().size_bytes;
            }
        }
    }

    let mut rows = Vec::with_capacity(wallets * 6);
    for (f, function) in EVENT_FUNCTIONS.iter().enumerate() {
        for (w, slots) in acc.iter().enumerate() {
            let (secs, gas, size) = slots[f];
            rows.push(EventRow {
                function,
                wallet: w + 1,
                address: world.actor(&format!("p{w}"))?.address().to_checksum_string(),
                repeats,
                mean_s: secs / repeats as f64,
                gas_used: gas,
                block_size_bytes: size / repeats as u64,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct GasRow {
    pub height: u64,
    pub tx_count: usize,
    pub gas_used: Gas,
    pub size_bytes: u64,
    pub gas_pct_of_target: f64,
}

pub const GAS_HEADER: &str = "height,tx_count,gas_used,size_bytes,gas_pct_of_target";

#[derive(Debug, Clone)]
pub struct GasParams {
    pub tx_count: usize,
    pub max_per_block: usize,
    pub max_notes: usize,
    pub schedule: GasSchedule,
    pub block_gas_target: Gas,
    pub gas_limit: Gas,
    pub seed: u64,
}

impl Default for GasParams {
    fn default() -> Self {
        Self {
            tx_count: 100,
            max_per_block: 6,
            max_notes: 1024,
            schedule: GasSchedule {
                per_note_byte: 68,
                ..GasSchedule::default()
            },
            block_gas_target: ChainConfig::default().block_gas_target,
            gas_limit: 1_000_000,
            seed: 0,
        }
    }
}

const REQUESTERS: usize = 8;

/// Generated request/deny workload with random note lengths. Returns one
/// row per block after the contract-creation block.
pub fn bench_gas(params: &GasParams) -> Result<Vec<GasRow>, ProtocolError> {
    let mut actors = vec![ActorSpec { name: "patient".into(), role: Role::Patient, address: None }];
    for i in 0..REQUESTERS {
        actors.push(ActorSpec { name: format!("r{i}"), role: Role::Requestor, address: None });
    }
    let config = WorldConfig {
        seed: params.seed,
        gas_limit: params.gas_limit,
        actors,
        chain: ChainConfig {
            schedule: params.schedule.clone(),
            block_gas_target: params.block_gas_target,
            ..ChainConfig::default()
        },
        ..WorldConfig::default()
    };
    let mut world = World::new(config, Store::new(MemoryBackend::new()))?;
    let image = Cid::of_bytes(b"gas benchmark image");
    world.register_image("patient", image, "Benchmark image")?;
    world.flush();
    let first = world.chain.height() + 1;

    let mut rng = ChaCha20Rng::seed_from_u64(params.seed);
    let mut pending = [false; REQUESTERS];
    let mut sent = 0;
    while sent < params.tx_count {
        let next = world.now() + 15;
        world.advance_to(next)?;
        let in_block = rng.gen_range(1..=params.max_per_block.max(1)).min(params.tx_count - sent);
        for _ in 0..in_block {
            let i = rng.gen_range(0..REQUESTERS);
            let len = rng.gen_range(0..=params.max_notes);
            let notes: String = (0..len).map(|_| rng.gen_range(b'a'..=b'z') as char).collect();
            let requester = format!("r{i}");
            if pending[i] {
                world.decide("patient", &requester, Some(image), Decision::Deny, &notes)?;
            } else {
                world.request_access(&requester, "patient", Some(image), &notes)?;
            }
            pending[i] = !pending[i];
        }
        sent += in_block;
    }
    world.flush();

    let target = params.block_gas_target.max(1) as f64;
    Ok(world.chain.blocks()[first as usize..]
        .iter()
        .map(|b| GasRow {
            height: b.height,
            tx_count: b.transactions.len(),
            gas_used: b.gas_used,
            size_bytes: b.size_bytes,
            gas_pct_of_target: b.gas_used as f64 / target * 100.0,
        })
        .collect())
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let rx = Data::new(x.to_vec()).ranks(RankTieBreaker::Average);
    let ry = Data::new(y.to_vec()).ranks(RankTieBreaker::Average);
    let cov = rx.iter().covariance(ry.iter());
    cov / (rx.iter().std_dev() * ry.iter().std_dev())
}

pub fn gas_size_correlation(rows: &[GasRow]) -> f64 {
    let gas: Vec<f64> = rows.iter().map(|r| r.gas_used as f64).collect();
    let size: Vec<f64> = rows.iter().map(|r| r.size_bytes as f64).collect();
    spearman(&gas, &size)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_known_values() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        // Monotone but nonlinear still ranks perfectly.
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 8.0, 27.0, 64.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_tx_blocks_report_table_gas() {
        let params = GasParams {
            tx_count: 6,
            max_per_block: 1,
            schedule: GasSchedule::default(),
            ..GasParams::default()
        };
        let rows = bench_gas(&params).unwrap();
        assert_eq!(rows.len(), 6);
        assert!(rows.iter().all(|r| r.gas_used == 246_908 || r.gas_used == 170_412));
    }

    #[test]
    fn storage_rows_and_dedup() {
        let rows = bench_storage(&[0, 300 * 1024], 2, 1, None).unwrap();
        let labels: Vec<_> = rows.iter().map(|r| (r.label, r.size_bytes)).collect();
        assert_eq!(labels, [("fresh", 0), ("fresh", 307_200), ("repeat", 0), ("repeat", 307_200)]);
        assert!(rows[1].added_bytes > 307_200);
        assert_eq!(rows[3].added_bytes, 0);
    }

    #[test]
    fn events_has_thirty_rows() {
        let rows = bench_events(5, 1, 0).unwrap();
        assert_eq!(rows.len(), 30);
        assert!(rows.iter().all(|r| r.mean_s.is_finite() && r.mean_s >= 0.0));
        assert_eq!(rows[5].function, "create_contract");
        assert_eq!(rows[5].gas_used, 67_394);
    }

    #[test]
    fn headers_match_rows() {
        let mut out = Vec::new();
        let rows = bench_storage(&[10], 1, 0, None).unwrap();
        write_csv(&mut out, &vec![("k".into(), "v".into())], &rows).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# k: v"));
        assert_eq!(lines.next(), Some(STORAGE_HEADER));
    }
}
