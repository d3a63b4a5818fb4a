//! Patient-centric access-control contract.
//!
//! One [`ContractState`] per registered image. The owner (patient) decides
//! pending requests, may revoke grants, and every decision is logged as an
//! [`Event`]. Calls reach the contract only through ledger transactions.

mod call;
mod event;
mod state;

pub use call::{ContractCall, Decision, FunctionId};
pub use event::{
    replay_authorizations, write_json_string, Event, EventName, INFO_APPROVED_BY_PATIENT,
    INFO_AUTHORIZED, INFO_DENIED_BY_PATIENT, INFO_REMOVED,
};
pub use state::{
    CallContext, CallOutcome, ContractState, RateLimitPolicy, Registry, RequestRecord,
    RequestStatus,
};

use thiserror::Error;

use crate::cas::Cid;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PcacError {
    #[error("sender does not match the address named in the call")]
    Unauthorized,
    #[error("image {0} is already registered")]
    DuplicateImage(Cid),
    #[error("no contract for that image and patient")]
    NoSuchContract,
    #[error("a patient cannot request access to their own image")]
    SelfRequest,
    #[error("a request from this address is already pending")]
    DuplicatePending,
    #[error("requester is already authorized")]
    AlreadyAuthorized,
    #[error("requester was removed and may not request again")]
    Revoked,
    #[error("only the image owner may do this")]
    NotOwner,
    #[error("no pending request from this address")]
    NoPendingRequest,
    #[error("approval rate limit reached")]
    RateLimited,
}
