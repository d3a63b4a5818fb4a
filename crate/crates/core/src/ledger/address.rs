use alloc::string::String;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha3::{Digest, Keccak256};

use super::LedgerError;

/// 20-byte account identifier.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Address([u8; 20]);

impl Address {
    pub const ZERO: Address = Address([0; 20]);

    pub const fn new(bytes: [u8; 20]) -> Self {
        Address(bytes)
    }

    /// Last 20 bytes of `sha256(pubkey)`.
    pub fn derive(pubkey: &[u8]) -> Result<Self, LedgerError> {
        if pubkey.is_empty() {
            return Err(LedgerError::InvalidKey);
        }
        let digest = crate::sha256(pubkey);
        let mut out = [0u8; 20];
        out.copy_from_slice(&digest[12..]);
        Ok(Address(out))
    }

    pub fn as_bytes(&self) -> &[u8; 20] {
        &self.0
    }

    /// Mixed-case checksum rendering (keccak-256 over the lowercase hex),
    /// the form wallets and block explorers print.
    pub fn to_checksum_string(&self) -> String {
        let lower = hex::encode(self.0);
        let hash = Keccak256::digest(lower.as_bytes());
        let mut out = String::with_capacity(42);
        out.push_str("0x");
        for (i, ch) in lower.chars().enumerate() {
            let nibble = (hash[i / 2] >> if i % 2 == 0 { 4 } else { 0 }) & 0x0f;
            if ch.is_ascii_alphabetic() && nibble >= 8 {
                out.push(ch.to_ascii_uppercase());
            } else {
                out.push(ch);
            }
        }
        out
    }
}

/// `derive_address` under its operational name.
pub fn derive_address(pubkey: &[u8]) -> Result<Address, LedgerError> {
    Address::derive(pubkey)
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(self.0))
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Address({self})")
    }
}

impl FromStr for Address {
    type Err = LedgerError;

    /// Accepts `0x` + 40 hex digits. All-lowercase or all-uppercase input is
    /// taken as is; mixed case must carry a valid checksum.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s
            .strip_prefix("0x")
            .or_else(|| s.strip_prefix("0X"))
            .ok_or(LedgerError::InvalidAddress)?;
        if digits.len() != 40 {
            return Err(LedgerError::InvalidAddress);
        }
        let mut bytes = [0u8; 20];
        hex::decode_to_slice(digits, &mut bytes).map_err(|_| LedgerError::InvalidAddress)?;
        let addr = Address(bytes);
        let has_lower = digits.chars().any(|c| c.is_ascii_lowercase());
        let has_upper = digits.chars().any(|c| c.is_ascii_uppercase());
        if has_lower && has_upper && addr.to_checksum_string()[2..] != *digits {
            return Err(LedgerError::InvalidAddress);
        }
        Ok(addr)
    }
}

impl Serialize for Address {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_checksum_string())
    }
}

impl<'de> Deserialize<'de> for Address {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn derive_single_byte_key() {
        // independent oracle: python hashlib.sha256(b"\x01").digest()[-20:]
        let addr = Address::derive(&[0x01]).unwrap();
        assert_eq!(addr.to_string(), "0x8cd2b7e3d1600ad631c385a5d7cce23c7785459a");
        assert_eq!(addr, Address::derive(&[0x01]).unwrap());
    }

    #[test]
    fn empty_key_rejected() {
        assert_eq!(Address::derive(&[]), Err(LedgerError::InvalidKey));
    }

    #[test]
    fn fixture_addresses_checksum_roundtrip() {
        for text in [
            "0x5575805E19b4807974Be0B77Fd9d385D4A0e6d1E",
            "0xdD870fA1b7C4700F2BD7f44238821C26f7392148",
            "0x583031D1113aD414F02576BD6afaBfb302140225",
        ] {
            let addr: Address = text.parse().unwrap();
            assert_eq!(addr.to_checksum_string(), text);
            assert_eq!(addr.to_string(), text.to_lowercase());
            assert_eq!(addr.to_string().len(), 42);
        }
    }

    #[test]
    fn bad_checksum_rejected() {
        assert!("0x5575805e19B4807974Be0B77Fd9d385D4A0e6d1E".parse::<Address>().is_err());
        assert!("0x5575".parse::<Address>().is_err());
        assert!("5575805E19b4807974Be0B77Fd9d385D4A0e6d1E00".parse::<Address>().is_err());
    }
}
