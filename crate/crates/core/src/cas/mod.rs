//! Content-addressed object store.
//!
//! Files are split into fixed 256 KiB leaves; a file larger than one chunk
//! gets a root object with empty data linking every leaf in order. Objects
//! are keyed by the multihash of their canonical bytes, so identical content
//! is stored once.

mod cid;
mod object;
mod store;

pub use cid::{Cid, MULTIHASH_LEN};
pub use object::{cid_of, CasObject, CommitObject, Link, CHUNK_SIZE};
pub use store::{
    Backend, EntryMeta, MemoryBackend, Store, StoreEntry, StoreIndex, StoreStats,
    DEFAULT_TTL_SECS,
};

use alloc::string::String;

use thiserror::Error;

use crate::codec::DecodeError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CasError {
    #[error("object data is {0} bytes, limit is 262144")]
    OversizeData(usize),
    #[error("object {0} not found")]
    NotFound(Cid),
    #[error("object {0} failed hash verification")]
    Corrupted(Cid),
    #[error("object {0} is not a commit")]
    NotACommit(Cid),
    #[error("object {0} is not a file root")]
    NotAFile(Cid),
    #[error("storage full: {needed} more bytes requested, {available} available")]
    StorageFull { needed: u64, available: u64 },
    #[error("invalid content identifier: {0}")]
    InvalidCid(String),
    #[error("backend failure: {0}")]
    Backend(String),
    #[error(transparent)]
    Decode(#[from] DecodeError),
}
