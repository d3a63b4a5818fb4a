//! Actor-level orchestration: the storage and sharing protocols, a
//! simulated secure channel between actors and a scripted scenario runner.
//!
//! All randomness is drawn from the world seed mixed with the current chain
//! and store state, so the same script from the same seed always produces
//! the same blocks.

mod actor;
mod flows;
mod scenario;
mod world;

pub use actor::{Actor, ActorSpec, Message, Role};
pub use flows::{ShareOutcome, StoreOutcome};
pub use scenario::{Action, ScenarioError, ScenarioReport, ScenarioScript, Step, StepResult};
pub use world::{World, WorldConfig};

use thiserror::Error;

use crate::cas::CasError;
use crate::envelope::EnvelopeError;
use crate::ledger::{Gas, LedgerError};
use crate::pcac::PcacError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Cas(#[from] CasError),
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
    #[error("contract reverted: {0}")]
    Contract(#[from] PcacError),
    #[error("out of gas after {0} units")]
    OutOfGas(Gas),
    #[error("unknown actor {0:?}")]
    UnknownActor(alloc::string::String),
    #[error("actor {0:?} declared twice")]
    DuplicateActor(alloc::string::String),
    #[error("actor {actor:?} is not a {}", expected.as_str())]
    WrongRole { actor: alloc::string::String, expected: Role },
    #[error("image is empty")]
    EmptyImage,
    #[error("{0:?} owns no image")]
    NoImage(alloc::string::String),
    #[error("requester is not currently authorized for this image")]
    NotAuthorized,
    #[error("nothing has been shared for this image")]
    NothingShared,
    #[error("image signature does not verify")]
    BadImageSignature,
}
