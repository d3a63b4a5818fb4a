use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use super::{Gas, LedgerError, Wei};
use crate::pcac::{ContractCall, FunctionId};

pub const GWEI: Wei = 1_000_000_000;
pub const ETHER: Wei = 1_000_000_000_000_000_000;

/// Per-function gas charges plus pricing defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GasSchedule {
    pub base_gas: BTreeMap<FunctionId, Gas>,
    /// Surcharge per byte of free-text notes carried by a call.
    #[serde(default)]
    pub per_note_byte: Gas,
    /// Charge for a plain value transfer without a contract call.
    #[serde(default = "default_transfer_gas")]
    pub transfer_gas: Gas,
    pub gas_price_default: Wei,
    pub usd_per_ether: f64,
}

fn default_transfer_gas() -> Gas {
    21_000
}

impl Default for GasSchedule {
    /// Measured gas of the deployed contract, 2 Gwei, 187 USD/ether.
    fn default() -> Self {
        let base_gas = [
            (FunctionId::CreateContract, 67_394),
            (FunctionId::RequestingAccess, 246_908),
            (FunctionId::ApproveIrs, 170_412),
            (FunctionId::TraceAuthorization, 34_266),
            (FunctionId::RemoveIrs, 59_358),
        ]
        .into_iter()
        .collect();
        Self {
            base_gas,
            per_note_byte: 0,
            transfer_gas: default_transfer_gas(),
            gas_price_default: 2 * GWEI,
            usd_per_ether: 187.0,
        }
    }
}

impl GasSchedule {
    pub fn base(&self, function: FunctionId) -> Result<Gas, LedgerError> {
        self.base_gas
            .get(&function)
            .copied()
            .ok_or(LedgerError::UnknownFunction(function as u8))
    }

    pub fn to_usd(&self, wei: Wei) -> f64 {
        wei as f64 / ETHER as f64 * self.usd_per_ether
    }
}

/// Gas charged for a contract call: base cost plus the notes surcharge.
pub fn gas_for_call(call: &ContractCall, schedule: &GasSchedule) -> Result<Gas, LedgerError> {
    let base = schedule.base(call.function())?;
    let notes = call.notes().map_or(0, |n| n.len() as u64);
    schedule
        .per_note_byte
        .checked_mul(notes)
        .and_then(|extra| base.checked_add(extra))
        .ok_or(LedgerError::Overflow)
}

/// `gas_used × gas_price`, exact.
pub fn compute_tx_cost(gas_used: Gas, gas_price: Wei) -> Result<Wei, LedgerError> {
    (gas_used as Wei)
        .checked_mul(gas_price)
        .ok_or(LedgerError::Overflow)
}

/// Exact decimal rendering of a wei amount in ether, without trailing zeros.
pub fn format_ether(wei: Wei) -> String {
    let whole = wei / ETHER;
    let frac = wei % ETHER;
    if frac == 0 {
        return format!("{whole}");
    }
    let digits = format!("{frac:018}");
    format!("{whole}.{}", digits.trim_end_matches('0'))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pcac::Decision;
    use crate::ledger::Address;
    use alloc::string::ToString;

    #[test]
    fn create_contract_cost() {
        let cost = compute_tx_cost(67_394, 2 * GWEI).unwrap();
        assert_eq!(cost, 134_788 * GWEI);
        assert_eq!(format_ether(cost), "0.000134788");
        let usd = GasSchedule::default().to_usd(cost);
        assert!((usd - 0.025).abs() <= 0.001, "{usd}");
    }

    #[test]
    fn trace_cost_and_zero() {
        let cost = compute_tx_cost(34_266, 2 * GWEI).unwrap();
        assert_eq!(format_ether(cost), "0.000068532");
        assert!((GasSchedule::default().to_usd(cost) - 0.013).abs() <= 0.001);
        assert_eq!(compute_tx_cost(0, 123).unwrap(), 0);
    }

    #[test]
    fn overflow_fails_loudly() {
        assert_eq!(compute_tx_cost(u64::MAX, u128::MAX), Err(LedgerError::Overflow));
    }

    #[test]
    fn format_ether_whole_values() {
        assert_eq!(format_ether(0), "0");
        assert_eq!(format_ether(3 * ETHER), "3");
        assert_eq!(format_ether(ETHER + 1), "1.000000000000000001");
    }

    #[test]
    fn default_schedule_gas() {
        let s = GasSchedule::default();
        let req = ContractCall::RequestingAccess {
            requester: Address::ZERO,
            notes: "x".repeat(500),
        };
        assert_eq!(gas_for_call(&req, &s).unwrap(), 246_908);
        let remove = ContractCall::RemoveIrs {
            requester: Address::ZERO,
        };
        assert_eq!(gas_for_call(&remove, &s).unwrap(), 59_358);
    }

    #[test]
    fn notes_surcharge() {
        let s = GasSchedule {
            per_note_byte: 68,
            ..GasSchedule::default()
        };
        let call = ContractCall::ApproveIrs {
            requester: Address::ZERO,
            decision: Decision::Deny,
            notes: "abcd".to_string(),
            shared_cid: None,
        };
        assert_eq!(gas_for_call(&call, &s).unwrap(), 170_412 + 4 * 68);
    }

    #[test]
    fn missing_function_is_unknown() {
        let mut s = GasSchedule::default();
        s.base_gas.remove(&FunctionId::RemoveIrs);
        let call = ContractCall::RemoveIrs {
            requester: Address::ZERO,
        };
        assert_eq!(gas_for_call(&call, &s), Err(LedgerError::UnknownFunction(5)));
    }
}
