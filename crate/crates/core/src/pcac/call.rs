use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::cas::Cid;
use crate::codec::{DecodeError, Reader, Writer};
use crate::ledger::Address;

/// The five contract entry points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FunctionId {
    #[serde(rename = "create_contract")]
    CreateContract = 1,
    #[serde(rename = "requesting_access")]
    RequestingAccess = 2,
    #[serde(rename = "approve_IRs")]
    ApproveIrs = 3,
    #[serde(rename = "trace_authorization")]
    TraceAuthorization = 4,
    #[serde(rename = "remove_IRs")]
    RemoveIrs = 5,
}

impl FunctionId {
    pub const ALL: [FunctionId; 5] = [
        FunctionId::CreateContract,
        FunctionId::RequestingAccess,
        FunctionId::ApproveIrs,
        FunctionId::TraceAuthorization,
        FunctionId::RemoveIrs,
    ];

    pub fn from_u8(id: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|f| *f as u8 == id)
    }

    pub fn name(self) -> &'static str {
        match self {
            FunctionId::CreateContract => "create_contract",
            FunctionId::RequestingAccess => "requesting_access",
            FunctionId::ApproveIrs => "approve_IRs",
            FunctionId::TraceAuthorization => "trace_authorization",
            FunctionId::RemoveIrs => "remove_IRs",
        }
    }
}

impl fmt::Display for FunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Grant,
    Deny,
}

/// A contract invocation as carried inside a transaction. The image,
/// patient address and encryption key travel in the surrounding
/// [`PcimData`](crate::ledger::PcimData).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ContractCall {
    CreateContract,
    RequestingAccess {
        requester: Address,
        notes: String,
    },
    ApproveIrs {
        requester: Address,
        decision: Decision,
        notes: String,
        /// Envelope re-encrypted for the requester, when granting.
        shared_cid: Option<Cid>,
    },
    TraceAuthorization {
        requester: Address,
    },
    RemoveIrs {
        requester: Address,
    },
}

const TAG_REQUESTER: u8 = 1;
const TAG_NOTES: u8 = 2;
const TAG_DECISION: u8 = 3;
const TAG_SHARED: u8 = 4;

impl ContractCall {
    pub fn function(&self) -> FunctionId {
        match self {
            ContractCall::CreateContract => FunctionId::CreateContract,
            ContractCall::RequestingAccess { .. } => FunctionId::RequestingAccess,
            ContractCall::ApproveIrs { .. } => FunctionId::ApproveIrs,
            ContractCall::TraceAuthorization { .. } => FunctionId::TraceAuthorization,
            ContractCall::RemoveIrs { .. } => FunctionId::RemoveIrs,
        }
    }

    pub fn notes(&self) -> Option<&str> {
        match self {
            ContractCall::RequestingAccess { notes, .. } | ContractCall::ApproveIrs { notes, .. } => {
                Some(notes)
            }
            _ => None,
        }
    }

    /// `function id ‖ tagged arguments`.
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u8(self.function() as u8);
        match self {
            ContractCall::CreateContract => {}
            ContractCall::RequestingAccess { requester, notes } => {
                w.field(TAG_REQUESTER, requester.as_bytes())
                    .field(TAG_NOTES, notes.as_bytes());
            }
            ContractCall::ApproveIrs {
                requester,
                decision,
                notes,
                shared_cid,
            } => {
                let d = match decision {
                    Decision::Grant => 1,
                    Decision::Deny => 0,
                };
                w.field(TAG_REQUESTER, requester.as_bytes())
                    .field(TAG_DECISION, &[d])
                    .field(TAG_NOTES, notes.as_bytes());
                if let Some(cid) = shared_cid {
                    w.field(TAG_SHARED, cid.multihash());
                }
            }
            ContractCall::TraceAuthorization { requester } | ContractCall::RemoveIrs { requester } => {
                w.field(TAG_REQUESTER, requester.as_bytes());
            }
        }
        w.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let id = r.u8("function id")?;
        let function = FunctionId::from_u8(id).ok_or(DecodeError::Invalid("function id"))?;
        let requester = |r: &mut Reader<'_>| -> Result<Address, DecodeError> {
            let raw: [u8; 20] = r
                .field(TAG_REQUESTER, "requester")?
                .try_into()
                .map_err(|_| DecodeError::Invalid("requester"))?;
            Ok(Address::new(raw))
        };
        let notes = |r: &mut Reader<'_>| -> Result<String, DecodeError> {
            String::from_utf8(r.field(TAG_NOTES, "notes")?.to_vec())
                .map_err(|_| DecodeError::Invalid("notes"))
        };
        let call = match function {
            FunctionId::CreateContract => ContractCall::CreateContract,
            FunctionId::RequestingAccess => ContractCall::RequestingAccess {
                requester: requester(&mut r)?,
                notes: notes(&mut r)?,
            },
            FunctionId::ApproveIrs => {
                let requester = requester(&mut r)?;
                let decision = match r.field(TAG_DECISION, "decision")? {
                    [1] => Decision::Grant,
                    [0] => Decision::Deny,
                    _ => return Err(DecodeError::Invalid("decision")),
                };
                let notes = notes(&mut r)?;
                let shared_cid = if r.peek() == Some(TAG_SHARED) {
                    let raw = r.field(TAG_SHARED, "shared cid")?;
                    Some(Cid::from_multihash(raw).map_err(|_| DecodeError::Invalid("shared cid"))?)
                } else {
                    None
                };
                ContractCall::ApproveIrs {
                    requester,
                    decision,
                    notes,
                    shared_cid,
                }
            }
            FunctionId::TraceAuthorization => ContractCall::TraceAuthorization {
                requester: requester(&mut r)?,
            },
            FunctionId::RemoveIrs => ContractCall::RemoveIrs {
                requester: requester(&mut r)?,
            },
        };
        r.finish()?;
        Ok(call)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn samples() -> Vec<ContractCall> {
        let a = Address::new([7; 20]);
        alloc::vec![
            ContractCall::CreateContract,
            ContractCall::RequestingAccess {
                requester: a,
                notes: "research use".to_string()
            },
            ContractCall::ApproveIrs {
                requester: a,
                decision: Decision::Grant,
                notes: String::new(),
                shared_cid: Some(Cid::of_bytes(b"x"))
            },
            ContractCall::ApproveIrs {
                requester: a,
                decision: Decision::Deny,
                notes: "no".to_string(),
                shared_cid: None
            },
            ContractCall::TraceAuthorization { requester: a },
            ContractCall::RemoveIrs { requester: a },
        ]
    }

    #[test]
    fn decode_inverts_encode() {
        for call in samples() {
            assert_eq!(ContractCall::decode(&call.encode()).unwrap(), call);
        }
    }

    #[test]
    fn unknown_function_rejected() {
        assert_eq!(
            ContractCall::decode(&[9]),
            Err(DecodeError::Invalid("function id"))
        );
        let mut bytes = ContractCall::CreateContract.encode();
        bytes.push(0);
        assert!(ContractCall::decode(&bytes).is_err());
    }
}
