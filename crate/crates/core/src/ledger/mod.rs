//! Deterministic single-chain ledger.
//!
//! Accounts are key-controlled wallets with a nonce and a wei balance.
//! Transactions are signed over a canonical byte layout, metered against a
//! [`GasSchedule`], and contract calls are routed into the access-control
//! [`Registry`](crate::pcac::Registry). Blocks are produced only by an
//! explicit [`Chain::seal_block`] and are stamped with the chain's simulated
//! clock.

mod address;
mod block;
mod chain;
mod gas;
mod tx;

pub use address::{derive_address, Address};
pub use block::{Block, BLOCK_VERSION};
pub use chain::{
    validate_chain, Account, Allocation, Chain, ChainConfig, EventFilter, EventRecord, Receipt,
    TxStatus, Violation, ViolationKind,
};
pub use gas::{compute_tx_cost, format_ether, gas_for_call, GasSchedule, ETHER, GWEI};
pub use tx::{sign_transaction, PcimData, Transaction, TxBody, Wallet, PCAC_CONTRACT, TX_VERSION};

use thiserror::Error;

use crate::codec::DecodeError;

/// Gas units.
pub type Gas = u64;
/// Currency amount in wei (10^-18 ether).
pub type Wei = u128;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("public key is empty or malformed")]
    InvalidKey,
    #[error("address must be 0x followed by 40 hex digits with a valid checksum")]
    InvalidAddress,
    #[error("unknown contract function {0}")]
    UnknownFunction(u8),
    #[error("transaction signature does not verify for its sender")]
    InvalidSignature,
    #[error("bad nonce: account expects {expected}, transaction has {got}")]
    BadNonce { expected: u64, got: u64 },
    #[error("insufficient funds: need {needed} wei, have {available} wei")]
    InsufficientFunds { needed: Wei, available: Wei },
    #[error("arithmetic overflow in fee computation")]
    Overflow,
    #[error("clock cannot move from {now} back to {requested}")]
    ClockRegression { now: u64, requested: u64 },
    #[error("clock cannot move while transactions are pending")]
    PendingTransactions,
    #[error("duplicate genesis allocation for {0}")]
    DuplicateAllocation(Address),
    #[error(transparent)]
    Decode(#[from] DecodeError),
}
