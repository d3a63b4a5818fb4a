use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::event::{
    INFO_APPROVED_BY_PATIENT, INFO_AUTHORIZED, INFO_DENIED_BY_PATIENT, INFO_REMOVED,
};
use super::{ContractCall, Decision, Event, EventName, PcacError};
use crate::cas::Cid;
use crate::ledger::{Address, PcimData};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RequestStatus {
    Pending,
    Approved,
    Denied,
    Removed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestRecord {
    pub requester: Address,
    pub requester_pubkey: Vec<u8>,
    pub notes: String,
    pub status: RequestStatus,
    pub requested_at: u64,
    pub decided_at: Option<u64>,
}

/// Per-image contract state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractState {
    pub owner: Address,
    pub image_cid: Cid,
    pub description: String,
    pub owner_pubkey: Vec<u8>,
    pub created_at: u64,
    pub authorize_user: BTreeMap<Address, bool>,
    pub requests: BTreeMap<Address, RequestRecord>,
    pub share_map: BTreeMap<Address, Cid>,
}

impl ContractState {
    pub fn is_authorized(&self, requester: &Address) -> bool {
        self.authorize_user.get(requester).copied().unwrap_or(false)
    }

    pub fn status_of(&self, requester: &Address) -> Option<RequestStatus> {
        self.requests.get(requester).map(|r| r.status)
    }
}

/// Caps the number of grants a patient may issue per sliding window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateLimitPolicy {
    pub max_approvals: u32,
    /// Window length in simulated seconds.
    pub window: u64,
}

impl Default for RateLimitPolicy {
    /// Ten approvals per 24 simulated hours.
    fn default() -> Self {
        Self {
            max_approvals: 10,
            window: 24 * 3600,
        }
    }
}

/// Who is calling, and when (block time).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CallContext {
    pub sender: Address,
    pub now: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallOutcome {
    pub returned: bool,
    pub events: Vec<Event>,
}

impl CallOutcome {
    fn new(returned: bool, events: Vec<Event>) -> Self {
        Self { returned, events }
    }
}

/// All contracts, keyed by image Cid. Every operation checks all of its
/// preconditions before touching state, so an `Err` leaves the registry
/// unchanged.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Registry {
    contracts: BTreeMap<Cid, ContractState>,
    grants: BTreeMap<Address, Vec<u64>>,
    rate_limit: Option<RateLimitPolicy>,
}

impl Registry {
    pub fn new(rate_limit: Option<RateLimitPolicy>) -> Self {
        Self {
            rate_limit,
            ..Self::default()
        }
    }

    pub fn rate_limit(&self) -> Option<RateLimitPolicy> {
        self.rate_limit
    }

    pub fn contract(&self, image: &Cid) -> Option<&ContractState> {
        self.contracts.get(image)
    }

    pub fn contracts(&self) -> impl Iterator<Item = &ContractState> {
        self.contracts.values()
    }

    pub fn contracts_of<'a>(&'a self, owner: &'a Address) -> impl Iterator<Item = &'a ContractState> + 'a {
        self.contracts.values().filter(move |c| c.owner == *owner)
    }

    /// Grants issued by `patient` inside the window ending at `now`.
    pub fn grants_in_window(&self, patient: &Address, now: u64) -> u32 {
        let Some(policy) = self.rate_limit else {
            return 0;
        };
        self.grants.get(patient).map_or(0, |times| {
            times
                .iter()
                .filter(|t| now.saturating_sub(**t) < policy.window)
                .count() as u32
        })
    }

    /// Whether one more grant by `patient` at `now` would be refused.
    pub fn would_rate_limit(&self, patient: &Address, now: u64) -> bool {
        self.rate_limit
            .is_some_and(|p| self.grants_in_window(patient, now) >= p.max_approvals)
    }

    /// Dispatches a transaction payload to the matching entry point.
    pub fn execute(&mut self, ctx: CallContext, pcim: &PcimData) -> Result<CallOutcome, PcacError> {
        match &pcim.call {
            ContractCall::CreateContract => self.create_contract(
                ctx,
                pcim.image_cid,
                pcim.patient_address,
                &pcim.description,
                &pcim.encryption_pubkey,
            ),
            ContractCall::RequestingAccess { requester, notes } => self.requesting_access(
                ctx,
                &pcim.image_cid,
                pcim.patient_address,
                *requester,
                &pcim.encryption_pubkey,
                notes,
            ),
            ContractCall::ApproveIrs {
                requester,
                decision,
                notes,
                shared_cid,
            } => self.approve_irs(ctx, &pcim.image_cid, *requester, *decision, notes, *shared_cid),
            ContractCall::TraceAuthorization { requester } => {
                self.trace_authorization(ctx, &pcim.image_cid, pcim.patient_address, *requester)
            }
            ContractCall::RemoveIrs { requester } => self.remove_irs(ctx, &pcim.image_cid, *requester),
        }
    }

    fn owned_by(&self, image: &Cid, patient: &Address) -> Result<&ContractState, PcacError> {
        self.contracts
            .get(image)
            .filter(|c| c.owner == *patient)
            .ok_or(PcacError::NoSuchContract)
    }

    fn owned_by_caller(&mut self, image: &Cid, caller: &Address) -> Result<&mut ContractState, PcacError> {
        let contract = self.contracts.get_mut(image).ok_or(PcacError::NoSuchContract)?;
        if contract.owner != *caller {
            return Err(PcacError::NotOwner);
        }
        Ok(contract)
    }

    /// Registers an image under its owner. The embedded patient address must
    /// be the transaction sender.
    pub fn create_contract(
        &mut self,
        ctx: CallContext,
        image: Cid,
        patient: Address,
        description: &str,
        owner_pubkey: &[u8],
    ) -> Result<CallOutcome, PcacError> {
        if ctx.sender != patient {
            return Err(PcacError::Unauthorized);
        }
        if self.contracts.contains_key(&image) {
            return Err(PcacError::DuplicateImage(image));
        }
        self.contracts.insert(
            image,
            ContractState {
                owner: patient,
                image_cid: image,
                description: description.to_string(),
                owner_pubkey: owner_pubkey.to_vec(),
                created_at: ctx.now,
                authorize_user: BTreeMap::new(),
                requests: BTreeMap::new(),
                share_map: BTreeMap::new(),
            },
        );
        let info = image.to_string();
        Ok(CallOutcome::new(
            true,
            alloc::vec![Event::new(EventName::ContractCreated, Some(patient), None, &info)],
        ))
    }

    /// Files a pending request. The outcome is decided later by the owner
    /// and observed through [`Registry::trace_authorization`].
    pub fn requesting_access(
        &mut self,
        ctx: CallContext,
        image: &Cid,
        patient: Address,
        requester: Address,
        requester_pubkey: &[u8],
        notes: &str,
    ) -> Result<CallOutcome, PcacError> {
        if ctx.sender != requester {
            return Err(PcacError::Unauthorized);
        }
        self.owned_by(image, &patient)?;
        if requester == patient {
            return Err(PcacError::SelfRequest);
        }
        let contract = self.contracts.get_mut(image).expect("checked above");
        match contract.status_of(&requester) {
            Some(RequestStatus::Pending) => return Err(PcacError::DuplicatePending),
            Some(RequestStatus::Approved) => return Err(PcacError::AlreadyAuthorized),
            Some(RequestStatus::Removed) => return Err(PcacError::Revoked),
            Some(RequestStatus::Denied) | None => {}
        }
        contract.requests.insert(
            requester,
            RequestRecord {
                requester,
                requester_pubkey: requester_pubkey.to_vec(),
                notes: notes.to_string(),
                status: RequestStatus::Pending,
                requested_at: ctx.now,
                decided_at: None,
            },
        );
        Ok(CallOutcome::new(
            true,
            alloc::vec![Event::new(EventName::AccessRequested, Some(patient), Some(requester), notes)],
        ))
    }

    /// Owner grants or denies a pending request. Returns `false` without
    /// effect when the requester is already authorized, and `false` on deny.
    pub fn approve_irs(
        &mut self,
        ctx: CallContext,
        image: &Cid,
        requester: Address,
        decision: Decision,
        notes: &str,
        shared_cid: Option<Cid>,
    ) -> Result<CallOutcome, PcacError> {
        let over_limit = self.would_rate_limit(&ctx.sender, ctx.now);
        let window = self.rate_limit.map(|p| p.window);
        let contract = self.owned_by_caller(image, &ctx.sender)?;
        if contract.is_authorized(&requester) {
            return Ok(CallOutcome::new(false, Vec::new()));
        }
        if contract.status_of(&requester) != Some(RequestStatus::Pending) {
            return Err(PcacError::NoPendingRequest);
        }
        let patient = contract.owner;
        match decision {
            Decision::Grant => {
                if over_limit {
                    return Err(PcacError::RateLimited);
                }
                contract.authorize_user.insert(requester, true);
                let record = contract.requests.get_mut(&requester).expect("pending record");
                record.status = RequestStatus::Approved;
                record.decided_at = Some(ctx.now);
                if let Some(cid) = shared_cid {
                    contract.share_map.insert(requester, cid);
                }
                if let Some(window) = window {
                    let times = self.grants.entry(patient).or_default();
                    times.retain(|t| ctx.now.saturating_sub(*t) < window);
                    times.push(ctx.now);
                }
                Ok(CallOutcome::new(
                    true,
                    alloc::vec![
                        Event::new(EventName::Requestaccepted, Some(patient), None, INFO_APPROVED_BY_PATIENT),
                        Event::new(EventName::Approved, None, Some(requester), INFO_AUTHORIZED),
                    ],
                ))
            }
            Decision::Deny => {
                let record = contract.requests.get_mut(&requester).expect("pending record");
                record.status = RequestStatus::Denied;
                record.decided_at = Some(ctx.now);
                Ok(CallOutcome::new(
                    false,
                    alloc::vec![
                        Event::new(EventName::Requestdenied, Some(patient), None, INFO_DENIED_BY_PATIENT),
                        Event::new(EventName::Reason, None, Some(requester), notes),
                    ],
                ))
            }
        }
    }

    /// Reports whether `requester` may access `patient`'s image. Callable by
    /// the patient or by the requester being traced; only appends an event.
    pub fn trace_authorization(
        &mut self,
        ctx: CallContext,
        image: &Cid,
        patient: Address,
        requester: Address,
    ) -> Result<CallOutcome, PcacError> {
        let contract = self.owned_by(image, &patient)?;
        if ctx.sender != patient && ctx.sender != requester {
            return Err(PcacError::Unauthorized);
        }
        let event = if contract.is_authorized(&requester) {
            Event::new(EventName::AuthorizationSuccess, Some(patient), Some(requester), INFO_AUTHORIZED)
        } else {
            let info = alloc::format!("{} is not authorized to access", contract.description);
            Event::new(EventName::AuthorizationFailed, Some(patient), Some(requester), &info)
        };
        Ok(CallOutcome::new(
            event.name == EventName::AuthorizationSuccess,
            alloc::vec![event],
        ))
    }

    /// Revokes an authorized requester. Returns `false` when the requester is
    /// not currently authorized.
    pub fn remove_irs(
        &mut self,
        ctx: CallContext,
        image: &Cid,
        requester: Address,
    ) -> Result<CallOutcome, PcacError> {
        let contract = self.owned_by_caller(image, &ctx.sender)?;
        if !contract.is_authorized(&requester) {
            return Ok(CallOutcome::new(false, Vec::new()));
        }
        contract.authorize_user.insert(requester, false);
        contract.share_map.remove(&requester);
        if let Some(record) = contract.requests.get_mut(&requester) {
            record.status = RequestStatus::Removed;
            record.decided_at = Some(ctx.now);
        }
        let patient = contract.owner;
        Ok(CallOutcome::new(
            true,
            alloc::vec![Event::new(EventName::Removed, Some(patient), Some(requester), INFO_REMOVED)],
        ))
    }
}
