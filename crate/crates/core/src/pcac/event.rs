use alloc::collections::BTreeMap;
use alloc::string::String;
use core::fmt::{self, Write};

use serde::{Deserialize, Serialize};

use crate::cas::Cid;
use crate::ledger::Address;

pub const INFO_APPROVED_BY_PATIENT: &str = "approved by patient.";
pub const INFO_AUTHORIZED: &str = "Authorized to access image";
pub const INFO_DENIED_BY_PATIENT: &str = "Failed to be approved by patient";
pub const INFO_REMOVED: &str = "Access permission revoked by patient";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EventName {
    ContractCreated,
    AccessRequested,
    Requestaccepted,
    Approved,
    Requestdenied,
    Reason,
    AuthorizationSuccess,
    AuthorizationFailed,
    Removed,
}

impl EventName {
    pub const ALL: [EventName; 9] = [
        EventName::ContractCreated,
        EventName::AccessRequested,
        EventName::Requestaccepted,
        EventName::Approved,
        EventName::Requestdenied,
        EventName::Reason,
        EventName::AuthorizationSuccess,
        EventName::AuthorizationFailed,
        EventName::Removed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventName::ContractCreated => "ContractCreated",
            EventName::AccessRequested => "AccessRequested",
            EventName::Requestaccepted => "Requestaccepted",
            EventName::Approved => "Approved",
            EventName::Requestdenied => "Requestdenied",
            EventName::Reason => "Reason",
            EventName::AuthorizationSuccess => "AuthorizationSuccess",
            EventName::AuthorizationFailed => "AuthorizationFailed",
            EventName::Removed => "Removed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|n| n.as_str().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for EventName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One audit record emitted by the contract.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub name: EventName,
    pub patient: Option<Address>,
    pub requester: Option<Address>,
    pub info: String,
}

impl Event {
    pub fn new(name: EventName, patient: Option<Address>, requester: Option<Address>, info: &str) -> Self {
        Self {
            name,
            patient,
            requester,
            info: String::from(info),
        }
    }

    pub fn involves(&self, address: &Address) -> bool {
        self.patient.as_ref() == Some(address) || self.requester.as_ref() == Some(address)
    }

    /// Single-line record with keys `event`, then `patient` or `requester`,
    /// then `info`; records naming both parties put `patient` last.
    pub fn to_line(&self) -> String {
        let mut out = String::new();
        self.write_fields(&mut out).expect("writing to a String cannot fail");
        let mut line = String::with_capacity(out.len() + 2);
        line.push('{');
        line.push_str(&out);
        line.push('}');
        line
    }

    /// The comma-separated key/value pairs of [`Event::to_line`], without braces.
    pub fn write_fields<W: Write>(&self, out: &mut W) -> fmt::Result {
        write!(out, "\"event\": \"{}\"", self.name)?;
        match (self.patient, self.requester) {
            (Some(patient), Some(requester)) => {
                write!(out, ", \"requester\": \"{}\"", requester.to_checksum_string())?;
                write_info(out, &self.info)?;
                write!(out, ", \"patient\": \"{}\"", patient.to_checksum_string())
            }
            (Some(patient), None) => {
                write!(out, ", \"patient\": \"{}\"", patient.to_checksum_string())?;
                write_info(out, &self.info)
            }
            (None, Some(requester)) => {
                write!(out, ", \"requester\": \"{}\"", requester.to_checksum_string())?;
                write_info(out, &self.info)
            }
            (None, None) => write_info(out, &self.info),
        }
    }
}

fn write_info<W: Write>(out: &mut W, info: &str) -> fmt::Result {
    out.write_str(", \"info\": ")?;
    write_json_string(out, info)
}

/// JSON string literal with the mandatory escapes.
pub fn write_json_string<W: Write>(out: &mut W, s: &str) -> fmt::Result {
    out.write_char('"')?;
    for ch in s.chars() {
        match ch {
            '"' => out.write_str("\\\"")?,
            '\\' => out.write_str("\\\\")?,
            '\n' => out.write_str("\\n")?,
            '\r' => out.write_str("\\r")?,
            '\t' => out.write_str("\\t")?,
            c if (c as u32) < 0x20 => write!(out, "\\u{:04x}", c as u32)?,
            c => out.write_char(c)?,
        }
    }
    out.write_char('"')
}

/// Rebuilds every contract's authorization map from its event stream alone:
/// `Approved` sets a requester, `Removed` clears it.
pub fn replay_authorizations<'a>(
    events: impl IntoIterator<Item = (&'a Cid, &'a Event)>,
) -> BTreeMap<(Cid, Address), bool> {
    let mut out = BTreeMap::new();
    for (contract, event) in events {
        match (event.name, event.requester) {
            (EventName::Approved, Some(r)) => {
                out.insert((*contract, r), true);
            }
            (EventName::Removed, Some(r)) => {
                out.insert((*contract, r), false);
            }
            _ => {}
        }
    }
    out
}
