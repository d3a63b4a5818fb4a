use alloc::string::{String, ToString};
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::CasError;

pub const MULTIHASH_LEN: usize = 34;
const SHA2_256: u8 = 0x12;
const DIGEST_LEN: u8 = 0x20;

/// Content identifier: `0x12 ‖ 0x20 ‖ sha256`, shown as base58btc ("Qm…").
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cid([u8; MULTIHASH_LEN]);

impl Cid {
    pub fn from_digest(digest: [u8; 32]) -> Self {
        let mut mh = [0u8; MULTIHASH_LEN];
        mh[0] = SHA2_256;
        mh[1] = DIGEST_LEN;
        mh[2..].copy_from_slice(&digest);
        Cid(mh)
    }

    /// Cid of arbitrary bytes (the canonical encoding of an object).
    pub fn of_bytes(bytes: &[u8]) -> Self {
        Self::from_digest(crate::sha256(bytes))
    }

    pub fn from_multihash(bytes: &[u8]) -> Result<Self, CasError> {
        let mh: [u8; MULTIHASH_LEN] = bytes
            .try_into()
            .map_err(|_| CasError::InvalidCid("multihash must be 34 bytes".to_string()))?;
        if mh[0] != SHA2_256 || mh[1] != DIGEST_LEN {
            return Err(CasError::InvalidCid("unsupported multihash prefix".to_string()));
        }
        Ok(Cid(mh))
    }

    pub fn multihash(&self) -> &[u8; MULTIHASH_LEN] {
        &self.0
    }

    pub fn digest(&self) -> &[u8] {
        &self.0[2..]
    }
}

impl fmt::Display for Cid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&bs58::encode(&self.0).into_string())
    }
}

impl fmt::Debug for Cid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Cid({self})")
    }
}

impl FromStr for Cid {
    type Err = CasError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bytes = bs58::decode(s)
            .into_vec()
            .map_err(|e| CasError::InvalidCid(e.to_string()))?;
        Self::from_multihash(&bytes)
    }
}

impl Serialize for Cid {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Cid {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}
