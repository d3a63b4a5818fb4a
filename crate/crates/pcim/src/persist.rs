//! On-disk layout of a data directory:
//!
//! ```text
//! pcim.json     world configuration (seed, actors, genesis parameters)
//! blocks.bin    every block, each as u32be length ‖ block bytes
//! events.jsonl  one JSON object per emitted event, in chain order
//! inbox.json    secure-channel messages per actor
//! cas/          object store (objects/<cid> and index.json)
//! ```

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::{self, ErrorKind, Write};
use std::path::{Path, PathBuf};

use pcim_core::ledger::{Block, Chain, EventFilter, EventRecord, Violation};
use pcim_core::protocol::{Message, World, WorldConfig};
use thiserror::Error;

use crate::disk::{self, DiskBackend};

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("no data directory at {0} (run keygen or run-scenario first)")]
    Missing(PathBuf),
    #[error("chain is corrupted: {0}")]
    Corrupt(String),
    #[error("cannot rebuild world: {0}")]
    World(#[from] pcim_core::protocol::ProtocolError),
}

impl PersistError {
    /// Whether the failure means on-disk state was tampered with or damaged.
    pub fn is_corruption(&self) -> bool {
        matches!(self, PersistError::Corrupt(_) | PersistError::Format { .. })
    }
}

impl From<Violation> for PersistError {
    fn from(v: Violation) -> Self {
        PersistError::Corrupt(v.to_string())
    }
}

pub type DiskWorld = World<DiskBackend>;

#[derive(Debug, Clone)]
pub struct DataDir {
    root: PathBuf,
}

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> PersistError + '_ {
    move |source| PersistError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl DataDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config_path(&self) -> PathBuf {
        self.root.join("pcim.json")
    }

    pub fn blocks_path(&self) -> PathBuf {
        self.root.join("blocks.bin")
    }

    pub fn events_path(&self) -> PathBuf {
        self.root.join("events.jsonl")
    }

    pub fn inbox_path(&self) -> PathBuf {
        self.root.join("inbox.json")
    }

    pub fn cas_root(&self) -> PathBuf {
        self.root.join("cas")
    }

    pub fn exists(&self) -> bool {
        self.config_path().exists()
    }

    pub fn read_config(&self) -> Result<WorldConfig, PersistError> {
        let path = self.config_path();
        let bytes = match fs::read(&path) {
            Err(e) if e.kind() == ErrorKind::NotFound => return Err(PersistError::Missing(self.root.clone())),
            other => other.map_err(io_at(&path))?,
        };
        serde_json::from_slice(&bytes).map_err(|e| PersistError::Format {
            path,
            message: e.to_string(),
        })
    }

    pub fn read_blocks(&self) -> Result<Vec<Block>, PersistError> {
        let path = self.blocks_path();
        let bytes = match fs::read(&path) {
            Err(e) if e.kind() == ErrorKind::NotFound => return Ok(Vec::new()),
            other => other.map_err(io_at(&path))?,
        };
        let mut blocks = Vec::new();
        let mut rest = bytes.as_slice();
        while !rest.is_empty() {
            let corrupt = |what: &str| PersistError::Corrupt(format!("block {}: {what}", blocks.len()));
            let (len, tail) = rest.split_first_chunk::<4>().ok_or_else(|| corrupt("truncated length"))?;
            let len = u32::from_be_bytes(*len) as usize;
            if tail.len() < len {
                return Err(corrupt("truncated body"));
            }
            let block = Block::decode(&tail[..len]).map_err(|e| corrupt(&e.to_string()))?;
            blocks.push(block);
            rest = &tail[len..];
        }
        Ok(blocks)
    }

    fn read_inbox(&self) -> Result<BTreeMap<String, Vec<Message>>, PersistError> {
        let path = self.inbox_path();
        match fs::read(&path) {
            Err(e) if e.kind() == ErrorKind::NotFound => Ok(BTreeMap::new()),
            other => serde_json::from_slice(&other.map_err(io_at(&path))?).map_err(|e| PersistError::Format {
                path,
                message: e.to_string(),
            }),
        }
    }

    /// Writes a fresh configuration, discarding any previous chain.
    pub fn init(&self, config: &WorldConfig) -> Result<DiskWorld, PersistError> {
        fs::create_dir_all(&self.root).map_err(io_at(&self.root))?;
        for path in [self.blocks_path(), self.events_path()] {
            match fs::remove_file(&path) {
                Err(e) if e.kind() != ErrorKind::NotFound => return Err(io_at(&path)(e)),
                _ => {}
            }
        }
        let path = self.config_path();
        let json = serde_json::to_vec_pretty(config).expect("config serializes");
        fs::write(&path, json).map_err(io_at(&path))?;
        let store = disk::open_store(&self.cas_root()).map_err(io_at(&self.cas_root()))?;
        let world = World::new(config.clone(), store)?;
        self.save(&world, None)?;
        Ok(world)
    }

    /// Loads and fully replays the chain. Any inconsistency is reported as
    /// corruption.
    pub fn load(&self) -> Result<DiskWorld, PersistError> {
        let config = self.read_config()?;
        let blocks = self.read_blocks()?;
        let chain = Chain::from_blocks(config.chain_config(), &blocks)?;
        let store = disk::open_store(&self.cas_root()).map_err(|e| match e.kind() {
            ErrorKind::InvalidData => PersistError::Corrupt(format!("store index: {e}")),
            _ => io_at(&self.cas_root())(e),
        })?;
        let mut world = World::with_chain(config, chain, store)?;
        for (name, messages) in self.read_inbox()? {
            world.actor_mut(&name)?.inbox = messages;
        }
        Ok(world)
    }

    /// Appends blocks above `persisted_height` (all blocks when `None`) and
    /// their events, then rewrites the store index and inboxes.
    pub fn save(&self, world: &DiskWorld, persisted_height: Option<u64>) -> Result<(), PersistError> {
        let first = persisted_height.map_or(0, |h| h + 1);
        let new_blocks = world.chain.blocks().iter().filter(|b| b.height >= first);
        let path = self.blocks_path();
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_at(&path))?;
        let mut buf = Vec::new();
        for block in new_blocks {
            let bytes = block.encode();
            buf.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
            buf.extend_from_slice(&bytes);
        }
        file.write_all(&buf).map_err(io_at(&path))?;

        let filter = EventFilter {
            min_height: Some(first),
            ..EventFilter::default()
        };
        let mut lines = String::new();
        for record in world.chain.query_events(&filter) {
            lines.push_str(&record_line(&record));
            lines.push('\n');
        }
        let path = self.events_path();
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .and_then(|mut f| f.write_all(lines.as_bytes()))
            .map_err(io_at(&path))?;

        let cas = self.cas_root();
        disk::save_index(&cas, &world.store).map_err(io_at(&cas))?;
        let inbox: BTreeMap<&str, &Vec<Message>> = world
            .actors()
            .filter(|a| !a.inbox.is_empty())
            .map(|a| (a.name.as_str(), &a.inbox))
            .collect();
        let path = self.inbox_path();
        fs::write(&path, serde_json::to_vec_pretty(&inbox).expect("inbox serializes")).map_err(io_at(&path))
    }
}

/// One event with its chain location, as stored in `events.jsonl`.
pub fn record_line(record: &EventRecord) -> String {
    let mut out = format!(
        "{{\"height\": {}, \"tx_hash\": \"{}\", \"caller\": \"{}\", \"contract\": \"{}\", \"owner\": \"{}\", ",
        record.height,
        hex::encode(record.tx_hash),
        record.caller.to_checksum_string(),
        record.contract,
        record.owner.to_checksum_string(),
    );
    record.event.write_fields(&mut out).expect("writing to a String cannot fail");
    out.push('}');
    out
}
