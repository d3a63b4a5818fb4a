//! Command-line front end. Every mutating command loads the data
//! directory, replays the chain, performs one step at a simulated time,
//! seals the block and saves.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use pcim_core::cas::{CasError, Cid, DEFAULT_TTL_SECS};
use pcim_core::ledger::{format_ether, Address, EventFilter, Gas, GasSchedule, Receipt, TxStatus, Wei, GWEI};
use pcim_core::pcac::{EventName, RateLimitPolicy};
use pcim_core::protocol::{ActorSpec, ProtocolError, Role, ScenarioError, ScenarioScript, WorldConfig};
use thiserror::Error;

use crate::bench::{self, GasParams};
use crate::persist::{record_line, DataDir, DiskWorld, PersistError};
use crate::presets;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Domain(String),
    #[error("{0}")]
    Corrupt(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Domain(_) => 2,
            CliError::Corrupt(_) => 3,
        }
    }
}

impl From<PersistError> for CliError {
    fn from(e: PersistError) -> Self {
        if e.is_corruption() {
            CliError::Corrupt(e.to_string())
        } else {
            CliError::Domain(e.to_string())
        }
    }
}

fn is_corrupt_cas(e: &CasError) -> bool {
    matches!(e, CasError::Corrupted(_) | CasError::Decode(_))
}

impl From<ProtocolError> for CliError {
    fn from(e: ProtocolError) -> Self {
        match &e {
            ProtocolError::Cas(c) if is_corrupt_cas(c) => CliError::Corrupt(e.to_string()),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match &e {
            ScenarioError::Parse { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Domain(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateLimitArg {
    Off,
    On(RateLimitPolicy),
}

fn parse_rate_limit(s: &str) -> Result<RateLimitArg, String> {
    if s == "off" {
        return Ok(RateLimitArg::Off);
    }
    let (max, window) = s
        .split_once('/')
        .ok_or_else(|| "expected MAX/SECONDS or off".to_string())?;
    Ok(RateLimitArg::On(RateLimitPolicy {
        max_approvals: max.parse().map_err(|e| format!("{e}"))?,
        window: window.parse().map_err(|e| format!("{e}"))?,
    }))
}

fn split_unit<'a>(s: &'a str, units: &[(&str, u128)]) -> (&'a str, u128) {
    let lower = s.to_ascii_lowercase();
    for (suffix, factor) in units {
        if lower.ends_with(suffix) {
            return (&s[..s.len() - suffix.len()], *factor);
        }
    }
    (s, 1)
}

/// Wei amount with an optional `gwei` or `wei` suffix.
fn parse_wei(s: &str) -> Result<Wei, String> {
    let (num, factor) = split_unit(s.trim(), &[("gwei", GWEI), ("wei", 1)]);
    num.trim()
        .parse::<Wei>()
        .map_err(|e| e.to_string())?
        .checked_mul(factor)
        .ok_or_else(|| "amount too large".into())
}

/// Byte count with an optional `KiB`, `MiB` or `GiB` suffix.
fn parse_size(s: &str) -> Result<usize, String> {
    let (num, factor) = split_unit(s.trim(), &[("kib", 1 << 10), ("mib", 1 << 20), ("gib", 1 << 30), ("b", 1)]);
    let n: usize = num.trim().parse().map_err(|e: std::num::ParseIntError| e.to_string())?;
    n.checked_mul(factor as usize).ok_or_else(|| "size too large".into())
}

fn parse_role(s: &str) -> Result<Role, String> {
    Role::parse(s).ok_or_else(|| "expected patient, radiologist or requestor".into())
}

fn parse_event_name(s: &str) -> Result<EventName, String> {
    EventName::parse(s).ok_or_else(|| format!("unknown event {s:?}"))
}

#[derive(Debug, Parser)]
#[command(name = "pcim", version, about = "Patient-centric medical image management on a simulated ledger")]
pub struct Cli {
    /// Directory holding the chain, event index, object store and config.
    #[arg(long, global = true, default_value = "pcim-data")]
    data_dir: PathBuf,
    /// Gas price in wei (suffix `gwei` accepted).
    #[arg(long, global = true, value_parser = parse_wei)]
    gas_price: Option<Wei>,
    #[arg(long, global = true)]
    gas_limit: Option<Gas>,
    /// JSON gas schedule replacing the defaults. Fixed at genesis.
    #[arg(long, global = true)]
    schedule: Option<PathBuf>,
    /// Seed for all derived keys and randomness. Fixed at genesis.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Object-store TTL in simulated seconds for unpinned objects.
    #[arg(long, global = true)]
    ttl: Option<u64>,
    /// Approval limit as MAX/SECONDS, or `off`. Fixed at genesis.
    #[arg(long, global = true, value_parser = parse_rate_limit)]
    rate_limit: Option<RateLimitArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExportFormat {
    /// Event fields only.
    Fig,
    /// Event fields plus block height, transaction and contract.
    Jsonl,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Add an actor with seed-derived keys. Only before the first block.
    Keygen {
        name: String,
        #[arg(value_parser = parse_role)]
        role: Role,
        /// Bind the actor's wallet to this address instead of the derived one.
        #[arg(long)]
        address: Option<Address>,
    },
    /// Encrypt an image for the patient, store it and register it on chain.
    Store {
        patient: String,
        radiologist: String,
        #[arg(long)]
        file: PathBuf,
        #[arg(long, default_value = "")]
        description: String,
        #[arg(long)]
        at: Option<u64>,
    },
    /// Ask a patient for access to their latest (or the given) image.
    Request {
        requester: String,
        patient: String,
        #[arg(long, default_value = "")]
        notes: String,
        #[arg(long)]
        image: Option<Cid>,
        #[arg(long)]
        at: Option<u64>,
    },
    /// Grant a pending request and share a copy encrypted for the requester.
    Approve {
        patient: String,
        requester: String,
        /// Only record the decision; do not re-encrypt or share the image.
        #[arg(long)]
        no_share: bool,
        #[arg(long)]
        image: Option<Cid>,
        #[arg(long)]
        at: Option<u64>,
    },
    /// Refuse a pending request.
    Deny {
        patient: String,
        requester: String,
        #[arg(long, default_value = "")]
        notes: String,
        #[arg(long)]
        image: Option<Cid>,
        #[arg(long)]
        at: Option<u64>,
    },
    /// Check on chain whether a requester may access the image.
    Trace {
        patient: String,
        requester: String,
        /// Sender of the trace call; defaults to the patient.
        #[arg(long)]
        caller: Option<String>,
        #[arg(long)]
        image: Option<Cid>,
        #[arg(long)]
        at: Option<u64>,
    },
    /// Revoke an approved requester.
    Remove {
        patient: String,
        requester: String,
        #[arg(long)]
        image: Option<Cid>,
        #[arg(long)]
        at: Option<u64>,
    },
    /// Download and decrypt the copy a patient shared with a requester.
    Fetch {
        requester: String,
        patient: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        image: Option<Cid>,
    },
    /// Replay a scenario file or built-in preset into a fresh data directory.
    RunScenario {
        file: Option<PathBuf>,
        /// Built-in script: fig4 or approved.
        #[arg(long, conflicts_with = "file")]
        preset: Option<String>,
    },
    /// Time put/get of random files of the given sizes.
    BenchStorage {
        #[arg(long, value_delimiter = ',', value_parser = parse_size, default_value = "1MiB,10MiB,50MiB,100MiB")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        trials: u32,
        /// Store objects as files under the data directory instead of memory.
        #[arg(long)]
        disk: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time from submission to sealed block for every function and wallet.
    BenchEvents {
        #[arg(long, default_value_t = 5)]
        wallets: usize,
        #[arg(long, default_value_t = 3)]
        repeats: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-block gas and size for a generated workload.
    BenchGas {
        #[arg(long, default_value_t = 100)]
        txs: usize,
        #[arg(long, default_value_t = 68)]
        per_note_byte: Gas,
        #[arg(long, default_value_t = 6)]
        max_per_block: usize,
        #[arg(long)]
        block_gas_target: Option<Gas>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print stored events, one JSON object per line.
    ExportEvents {
        #[arg(long)]
        address: Option<Address>,
        #[arg(long, value_parser = parse_event_name)]
        event: Option<EventName>,
        #[arg(long)]
        from: Option<u64>,
        #[arg(long)]
        to: Option<u64>,
        #[arg(long, value_enum, default_value_t = ExportFormat::Fig)]
        format: ExportFormat,
    },
    /// Replay and verify the chain, event index and object store.
    Validate,
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = if code == 0 { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    match execute(&cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let kind = match e.exit_code() {
                1 => "usage",
                2 => "error",
                _ => "corrupted",
            };
            let _ = writeln!(err, "{kind}: {e}");
            e.exit_code()
        }
    }
}

impl Cli {
    fn schedule(&self) -> Result<Option<GasSchedule>, CliError> {
        let Some(path) = &self.schedule else {
            return Ok(None);
        };
        let text = fs::read(path).map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))?;
        serde_json::from_slice(&text)
            .map(Some)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    /// Applies every flag to a configuration that has no blocks yet.
    fn apply_genesis_flags(&self, config: &mut WorldConfig) -> Result<(), CliError> {
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(schedule) = self.schedule()? {
            config.gas_price = schedule.gas_price_default;
            config.chain.schedule = schedule;
        }
        if let Some(limit) = self.rate_limit {
            config.chain.rate_limit = match limit {
                RateLimitArg::Off => None,
                RateLimitArg::On(p) => Some(p),
            };
        }
        if let Some(price) = self.gas_price {
            config.gas_price = price;
        }
        if let Some(limit) = self.gas_limit {
            config.gas_limit = limit;
        }
        Ok(())
    }

    /// Rejects genesis flags that disagree with an existing chain.
    fn check_genesis_flags(&self, config: &WorldConfig) -> Result<(), CliError> {
        let mut wanted = config.clone();
        self.apply_genesis_flags(&mut wanted)?;
        wanted.gas_price = config.gas_price;
        wanted.gas_limit = config.gas_limit;
        if wanted != *config {
            return Err(CliError::Domain(
                "--seed, --schedule and --rate-limit are fixed once the chain has blocks".into(),
            ));
        }
        Ok(())
    }

    fn fresh_config(&self, dir: &DataDir) -> Result<WorldConfig, CliError> {
        let mut config = if dir.exists() {
            let world = dir.load()?;
            if world.chain.height() > 0 {
                return Err(CliError::Domain(format!(
                    "{} already has {} blocks; use a new --data-dir",
                    dir.root().display(),
                    world.chain.height()
                )));
            }
            world.config().clone()
        } else {
            WorldConfig {
                seed: rand::random(),
                ..WorldConfig::default()
            }
        };
        self.apply_genesis_flags(&mut config)?;
        Ok(config)
    }

    fn load(&self, dir: &DataDir) -> Result<DiskWorld, CliError> {
        let mut world = dir.load()?;
        self.check_genesis_flags(world.config())?;
        let price = self.gas_price.unwrap_or(world.config().gas_price);
        let limit = self.gas_limit.unwrap_or(world.config().gas_limit);
        world.set_tx_params(price, limit);
        Ok(world)
    }
}

fn status_text(receipt: &Receipt) -> String {
    match &receipt.status {
        TxStatus::Success => "success".into(),
        TxStatus::OutOfGas => "out-of-gas".into(),
        TxStatus::Reverted(e) => format!("reverted ({e})"),
    }
}

fn report_receipt(receipt: &Receipt, height: u64, out: &mut dyn Write, err: &mut dyn Write) -> io::Result<()> {
    writeln!(
        err,
        "tx 0x{} {} in block {height}: gas {} cost {} ether",
        hex::encode(receipt.tx_hash),
        status_text(receipt),
        receipt.gas_used,
        format_ether(receipt.cost_wei),
    )?;
    for event in &receipt.events {
        writeln!(out, "{}", event.to_line())?;
    }
    Ok(())
}

/// Runs one mutating step at `at` (default: one second after the tip),
/// seals, collects garbage and saves.
fn mutate<F>(cli: &Cli, at: Option<u64>, out: &mut dyn Write, err: &mut dyn Write, step: F) -> Result<(), CliError>
where
    F: FnOnce(&mut DiskWorld) -> Result<Option<Receipt>, ProtocolError>,
{
    let dir = DataDir::new(&cli.data_dir);
    let mut world = cli.load(&dir)?;
    let persisted = world.chain.height();
    world.advance_to(at.unwrap_or(world.now() + 1))?;
    let receipt = step(&mut world)?;
    world.flush();
    world
        .store
        .gc(cli.ttl.unwrap_or(DEFAULT_TTL_SECS))
        .map_err(ProtocolError::from)?;
    dir.save(&world, Some(persisted))?;
    if let Some(receipt) = receipt {
        report_receipt(&receipt, world.chain.height(), out, err)?;
    }
    Ok(())
}

fn last_receipt(world: &DiskWorld) -> Option<Receipt> {
    world.chain.pending().last().map(|(_, r)| r.clone())
}

fn write_report(path: &Option<PathBuf>, out: &mut dyn Write, f: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), CliError> {
    match path {
        Some(p) => {
            let mut file = io::BufWriter::new(fs::File::create(p)?);
            f(&mut file)?;
            file.flush()?;
        }
        None => f(out)?,
    }
    Ok(())
}

fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let dir = DataDir::new(&cli.data_dir);
    match &cli.command {
        Command::Keygen { name, role, address } => {
            let mut config = cli.fresh_config(&dir)?;
            if config.actors.iter().any(|a| a.name == *name) {
                return Err(CliError::Domain(format!("actor {name:?} already exists")));
            }
            config.actors.push(ActorSpec {
                name: name.clone(),
                role: *role,
                address: *address,
            });
            let mut world = dir.init(&config)?;
            let actor = world.actor_mut(name)?;
            let enc = actor.enc_public();
            writeln!(out, "name: {name}")?;
            writeln!(out, "role: {}", role.as_str())?;
            writeln!(out, "address: {}", actor.address().to_checksum_string())?;
            writeln!(out, "wallet_key: {}", hex::encode(actor.wallet.public_key()))?;
            writeln!(out, "signing_key: {}", hex::encode(actor.sign_keys.public().bytes))?;
            writeln!(out, "encryption_key: {}", hex::encode(enc.bytes))?;
            Ok(())
        }
        Command::Store { patient, radiologist, file, description, at } => {
            let image = fs::read(file).map_err(|e| CliError::Domain(format!("{}: {e}", file.display())))?;
            let mut root = None;
            mutate(cli, *at, out, err, |w| {
                root = Some(w.store_image_flow(patient, radiologist, &image, description)?.root);
                Ok(last_receipt(w))
            })?;
            if let Some(root) = root {
                writeln!(err, "image root {root}")?;
            }
            Ok(())
        }
        Command::Request { requester, patient, notes, image, at } => mutate(cli, *at, out, err, |w| {
            w.request_access(requester, patient, *image, notes).map(Some)
        }),
        Command::Approve { patient, requester, no_share, image, at } => mutate(cli, *at, out, err, |w| {
            if *no_share {
                w.decide(patient, requester, *image, pcim_core::pcac::Decision::Grant, "").map(Some)
            } else {
                w.approve_and_share(patient, requester, *image)?;
                Ok(last_receipt(w))
            }
        }),
        Command::Deny { patient, requester, notes, image, at } => mutate(cli, *at, out, err, |w| {
            w.decide(patient, requester, *image, pcim_core::pcac::Decision::Deny, notes).map(Some)
        }),
        Command::Trace { patient, requester, caller, image, at } => mutate(cli, *at, out, err, |w| {
            w.trace(caller.as_deref().unwrap_or(patient), patient, requester, *image).map(Some)
        }),
        Command::Remove { patient, requester, image, at } => mutate(cli, *at, out, err, |w| {
            w.revoke(patient, requester, *image).map(Some)
        }),
        Command::Fetch { requester, patient, out: path, image } => {
            let mut world = cli.load(&dir)?;
            let persisted = world.chain.height();
            let plain = world.fetch_shared(requester, patient, *image)?;
            fs::write(path, &plain)?;
            dir.save(&world, Some(persisted))?;
            writeln!(out, "wrote {} bytes to {}", plain.len(), path.display())?;
            Ok(())
        }
        Command::RunScenario { file, preset } => {
            let text = match (file, preset) {
                (Some(path), None) => fs::read_to_string(path).map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))?,
                (None, Some(name)) => presets::by_name(name).ok_or_else(|| {
                    CliError::Usage(format!("unknown preset {name:?}; known: {}", presets::NAMES.join(", ")))
                })?,
                _ => return Err(CliError::Usage("give a scenario file or --preset".into())),
            };
            let script = ScenarioScript::parse(&text)?;
            let mut config = cli.fresh_config(&dir)?;
            for spec in script.actors() {
                match config.actors.iter().find(|a| a.name == spec.name) {
                    Some(existing) if *existing != spec => {
                        return Err(CliError::Domain(format!("actor {:?} already exists with a different role or address", spec.name)))
                    }
                    Some(_) => {}
                    None => config.actors.push(spec),
                }
            }
            let mut world = dir.init(&config)?;
            let result = world.run_scenario(&script);
            dir.save(&world, Some(0))?;
            let report = result?;
            for step in &report.steps {
                let status = match (&step.error, step.returned) {
                    (Some(e), _) => format!("failed: {e}"),
                    (None, Some(r)) => format!("ok returned={r}"),
                    (None, None) => "ok".into(),
                };
                let block = match step.tx_hash {
                    Some(_) => step.height.to_string(),
                    None => "-".into(),
                };
                writeln!(
                    err,
                    "step {:>3} t={:<6} {:<10} {:<8} block {block:<3} gas {:<7} {status}",
                    step.index, step.at, step.actor, step.action, step.gas_used
                )?;
            }
            for record in &report.events {
                writeln!(out, "{}", record.event.to_line())?;
            }
            writeln!(err, "height {} tip 0x{}", report.height, hex::encode(report.final_hash))?;
            Ok(())
        }
        Command::BenchStorage { sizes, trials, disk, out: path } => {
            let seed = cli.seed.unwrap_or(0);
            let tmp = cli.data_dir.join("bench-storage");
            let rows = bench::bench_storage(sizes, *trials, seed, disk.then_some(tmp.as_path()))
                .map_err(|e| CliError::Domain(e.to_string()))?;
            let _ = fs::remove_dir_all(&tmp);
            let mut meta = bench::host_metadata("storage");
            meta.push(("backend".into(), if *disk { "disk" } else { "memory" }.into()));
            meta.push(("seed".into(), seed.to_string()));
            write_report(path, out, |w| bench::write_csv(w, &meta, &rows))
        }
        Command::BenchEvents { wallets, repeats, out: path } => {
            let seed = cli.seed.unwrap_or(0);
            let rows = bench::bench_events(*wallets, *repeats, seed)?;
            let mut meta = bench::host_metadata("events");
            meta.push(("seed".into(), seed.to_string()));
            write_report(path, out, |w| bench::write_csv(w, &meta, &rows))
        }
        Command::BenchGas { txs, per_note_byte, max_per_block, block_gas_target, out: path } => {
            let mut params = GasParams {
                tx_count: (*txs).max(1),
                max_per_block: *max_per_block,
                seed: cli.seed.unwrap_or(0),
                ..GasParams::default()
            };
            if let Some(schedule) = cli.schedule()? {
                params.schedule = schedule;
            }
            params.schedule.per_note_byte = *per_note_byte;
            if let Some(t) = block_gas_target {
                params.block_gas_target = *t;
            }
            if let Some(l) = cli.gas_limit {
                params.gas_limit = l;
            }
            let rows = bench::bench_gas(&params)?;
            let rho = bench::gas_size_correlation(&rows);
            let mut meta = bench::host_metadata("gas");
            meta.push(("per_note_byte".into(), per_note_byte.to_string()));
            meta.push(("block_gas_target".into(), params.block_gas_target.to_string()));
            meta.push(("seed".into(), params.seed.to_string()));
            meta.push(("spearman_gas_vs_size".into(), format!("{rho:.4}")));
            write_report(path, out, |w| bench::write_csv(w, &meta, &rows))
        }
        Command::ExportEvents { address, event, from, to, format } => {
            let world = cli.load(&dir)?;
            let filter = EventFilter {
                address: *address,
                name: *event,
                min_height: *from,
                max_height: *to,
            };
            for record in world.chain.query_events(&filter) {
                match format {
                    ExportFormat::Fig => writeln!(out, "{}", record.event.to_line())?,
                    ExportFormat::Jsonl => writeln!(out, "{}", record_line(&record))?,
                }
            }
            Ok(())
        }
        Command::Validate => validate(&dir, out),
    }
}

fn validate(dir: &DataDir, out: &mut dyn Write) -> Result<(), CliError> {
    let mut world = dir.load()?;
    world.chain.validate().map_err(|v| CliError::Corrupt(v.to_string()))?;

    let mut expected = String::new();
    for record in world.chain.query_events(&EventFilter::default()) {
        expected.push_str(&record_line(&record));
        expected.push('\n');
    }
    let stored = fs::read_to_string(dir.events_path()).unwrap_or_default();
    if stored != expected {
        return Err(CliError::Corrupt("event index does not match the chain".into()));
    }

    let cids: Vec<Cid> = world.store.index().entries.keys().copied().collect();
    for cid in &cids {
        world.store.get_object(cid).map_err(|e| match e {
            CasError::Backend(_) => CliError::Domain(e.to_string()),
            _ => CliError::Corrupt(e.to_string()),
        })?;
    }
    let txs: usize = world.chain.blocks().iter().map(|b| b.transactions.len()).sum();
    writeln!(
        out,
        "ok: {} blocks, {txs} transactions, {} objects verified",
        world.chain.blocks().len(),
        cids.len()
    )?;
    Ok(())
}
