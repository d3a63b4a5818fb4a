//! Core state machines for patient-centric medical image management.
//!
//! The crate is `no_std` (with `alloc`) and contains no IO. It provides:
//!
//! * [`ledger`]: a deterministic, gas-metered single chain with signed
//!   transactions, hash-linked blocks and an event index;
//! * [`pcac`]: the patient-centric access-control contract that the ledger
//!   routes calls into;
//! * [`cas`]: a content-addressed object store with fixed-size chunking,
//!   commit objects, pinning and TTL garbage collection;
//! * [`envelope`]: identity keys, hybrid envelope encryption and detached
//!   image signatures;
//! * [`protocol`]: actor-level storage and sharing flows plus a scripted
//!   scenario runner over simulated time.
//!
//! Everything that touches the filesystem, wall-clock time or the command
//! line lives in the companion `pcim` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod cas;
pub mod codec;
pub mod envelope;
pub mod ledger;
pub mod pcac;
pub mod protocol;

pub use cas::{Cid, CasObject, Store};
pub use envelope::{Envelope, KeyKind, KeyPair, PublicKey};
pub use ledger::{Address, Block, Chain, Receipt, Transaction};
pub use pcac::{ContractCall, Event, EventName};
pub use protocol::World;

/// SHA-256 digest.
pub type Hash = [u8; 32];

/// SHA-256 over a byte slice.
pub fn sha256(bytes: &[u8]) -> Hash {
    use sha2::Digest;
    sha2::Sha256::digest(bytes).into()
}
