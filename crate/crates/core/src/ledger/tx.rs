use alloc::string::String;
use alloc::vec::Vec;

use super::{Address, Gas, LedgerError, Wei};
use crate::cas::Cid;
use crate::codec::{DecodeError, Reader, Writer};
use crate::envelope::{verify_signature, KeyKind, KeyPair};
use crate::pcac::ContractCall;
use crate::Hash;

pub const TX_VERSION: u8 = 0x01;

/// Recipient of every contract call.
pub const PCAC_CONTRACT: Address = Address::new(*b"pcac-sc:access-ctrl!");

const TAG_IMAGE: u8 = 1;
const TAG_PATIENT: u8 = 2;
const TAG_TIMESTAMP: u8 = 3;
const TAG_ENC_KEY: u8 = 4;
const TAG_DESCRIPTION: u8 = 5;
const TAG_CALL: u8 = 6;

/// Image-management payload carried by a transaction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PcimData {
    pub image_cid: Cid,
    pub patient_address: Address,
    pub timestamp: u64,
    /// Encryption public key of the caller (patient or requester).
    pub encryption_pubkey: Vec<u8>,
    pub description: String,
    pub call: ContractCall,
}

impl PcimData {
    fn encode_into(&self, w: &mut Writer) {
        w.field(TAG_IMAGE, self.image_cid.multihash())
            .field(TAG_PATIENT, self.patient_address.as_bytes())
            .field(TAG_TIMESTAMP, &self.timestamp.to_be_bytes())
            .field(TAG_ENC_KEY, &self.encryption_pubkey)
            .field(TAG_DESCRIPTION, self.description.as_bytes())
            .field(TAG_CALL, &self.call.encode());
    }

    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let image_cid = Cid::from_multihash(r.field(TAG_IMAGE, "image cid")?)
            .map_err(|_| DecodeError::Invalid("image cid"))?;
        let patient: [u8; 20] = r
            .field(TAG_PATIENT, "patient address")?
            .try_into()
            .map_err(|_| DecodeError::Invalid("patient address"))?;
        let timestamp: [u8; 8] = r
            .field(TAG_TIMESTAMP, "timestamp")?
            .try_into()
            .map_err(|_| DecodeError::Invalid("timestamp"))?;
        let encryption_pubkey = r.field(TAG_ENC_KEY, "encryption key")?.to_vec();
        let description = String::from_utf8(r.field(TAG_DESCRIPTION, "description")?.to_vec())
            .map_err(|_| DecodeError::Invalid("description"))?;
        let call = ContractCall::decode(r.field(TAG_CALL, "call")?)?;
        Ok(Self {
            image_cid,
            patient_address: Address::new(patient),
            timestamp: u64::from_be_bytes(timestamp),
            encryption_pubkey,
            description,
            call,
        })
    }
}

/// The signed part of a transaction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxBody {
    pub nonce: u64,
    pub gas_price: Wei,
    pub gas_limit: Gas,
    pub value: Wei,
    pub recipient: Address,
    pub pcim: Option<PcimData>,
}

impl TxBody {
    /// `0x01 ‖ nonce ‖ gas_price ‖ gas_limit ‖ value ‖ recipient ‖ pcim fields`.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_capacity(128);
        w.u8(TX_VERSION)
            .u64(self.nonce)
            .u128(self.gas_price)
            .u64(self.gas_limit)
            .u128(self.value)
            .bytes(self.recipient.as_bytes());
        if let Some(pcim) = &self.pcim {
            pcim.encode_into(&mut w);
        }
        w.finish()
    }

    pub fn decode_canonical(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let version = r.u8("tx version")?;
        if version != TX_VERSION {
            return Err(DecodeError::Version(version));
        }
        let nonce = r.u64("nonce")?;
        let gas_price = r.u128("gas price")?;
        let gas_limit = r.u64("gas limit")?;
        let value = r.u128("value")?;
        let recipient = Address::new(r.array("recipient")?);
        let pcim = if r.remaining() == 0 {
            None
        } else {
            Some(PcimData::decode_from(&mut r)?)
        };
        r.finish()?;
        Ok(Self {
            nonce,
            gas_price,
            gas_limit,
            value,
            recipient,
            pcim,
        })
    }

    /// The message that gets signed: `sha256(canonical bytes)`.
    pub fn signing_hash(&self) -> Hash {
        crate::sha256(&self.canonical_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    pub body: TxBody,
    pub sender: Address,
    pub sender_pubkey: [u8; 32],
    pub signature: [u8; 64],
}

impl Transaction {
    /// `u32 len ‖ canonical ‖ sender ‖ public key ‖ signature`.
    pub fn encode(&self) -> Vec<u8> {
        let canonical = self.body.canonical_bytes();
        let mut w = Writer::with_capacity(4 + canonical.len() + 20 + 32 + 64);
        w.u32(canonical.len() as u32)
            .bytes(&canonical)
            .bytes(self.sender.as_bytes())
            .bytes(&self.sender_pubkey)
            .bytes(&self.signature);
        w.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let len = r.u32("canonical length")? as usize;
        let body = TxBody::decode_canonical(r.take(len, "canonical tx")?)?;
        let sender = Address::new(r.array("sender")?);
        let sender_pubkey = r.array("sender key")?;
        let signature = r.array("signature")?;
        r.finish()?;
        Ok(Self {
            body,
            sender,
            sender_pubkey,
            signature,
        })
    }

    /// `sha256` of the full encoding, signature included.
    pub fn hash(&self) -> Hash {
        crate::sha256(&self.encode())
    }

    /// Checks the signature against the attached public key only; binding
    /// the key to the sender account is the chain's job.
    pub fn signature_valid(&self) -> bool {
        verify_signature(&self.sender_pubkey, &self.body.signing_hash(), &self.signature)
    }
}

/// A signing identity on the chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Wallet {
    keys: KeyPair,
    address: Address,
}

impl Wallet {
    /// Wallet whose address is derived from its public key.
    pub fn new(keys: KeyPair) -> Result<Self, LedgerError> {
        keys.expect_kind(KeyKind::Signing)
            .map_err(|_| LedgerError::InvalidKey)?;
        let address = Address::derive(&keys.public().bytes)?;
        Ok(Self { keys, address })
    }

    /// Wallet bound to a fixed address; the chain must know the binding
    /// (see [`Allocation::public_key`](super::Allocation)).
    pub fn with_address(keys: KeyPair, address: Address) -> Result<Self, LedgerError> {
        keys.expect_kind(KeyKind::Signing)
            .map_err(|_| LedgerError::InvalidKey)?;
        Ok(Self { keys, address })
    }

    pub fn from_seed(seed: [u8; 32]) -> Self {
        Self::new(KeyPair::from_seed(KeyKind::Signing, seed)).expect("signing key")
    }

    pub fn address(&self) -> Address {
        self.address
    }

    pub fn public_key(&self) -> [u8; 32] {
        self.keys.public().bytes
    }

    pub fn keys(&self) -> &KeyPair {
        &self.keys
    }

    pub fn sign(&self, body: TxBody) -> Transaction {
        let signature = self
            .keys
            .sign(&body.signing_hash())
            .expect("wallet keys are signing keys");
        Transaction {
            body,
            sender: self.address,
            sender_pubkey: self.public_key(),
            signature,
        }
    }
}

pub fn sign_transaction(wallet: &Wallet, body: TxBody) -> Transaction {
    wallet.sign(body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pcac::Decision;
    use alloc::string::ToString;

    fn body(pcim: Option<PcimData>) -> TxBody {
        TxBody {
            nonce: 3,
            gas_price: 2_000_000_000,
            gas_limit: 300_000,
            value: 0,
            recipient: PCAC_CONTRACT,
            pcim,
        }
    }

    fn pcim() -> PcimData {
        PcimData {
            image_cid: Cid::of_bytes(b"img"),
            patient_address: Address::new([5; 20]),
            timestamp: 1_600_000_000,
            encryption_pubkey: alloc::vec![1, 2, 3],
            description: "CT liver".to_string(),
            call: ContractCall::ApproveIrs {
                requester: Address::new([6; 20]),
                decision: Decision::Grant,
                notes: "until 2021".to_string(),
                shared_cid: None,
            },
        }
    }

    #[test]
    fn canonical_layout_prefix() {
        let bytes = body(None).canonical_bytes();
        assert_eq!(bytes.len(), 1 + 8 + 16 + 8 + 16 + 20);
        assert_eq!(bytes[0], 0x01);
        assert_eq!(&bytes[1..9], &3u64.to_be_bytes());
        assert_eq!(&bytes[9..25], &2_000_000_000u128.to_be_bytes());
        assert_eq!(&bytes[25..33], &300_000u64.to_be_bytes());
        assert_eq!(&bytes[49..69], PCAC_CONTRACT.as_bytes());
        let with = body(Some(pcim())).canonical_bytes();
        // first pcim field: tag 1, 34-byte multihash
        assert_eq!(&with[69..74], &[1, 0, 0, 0, 34]);
    }

    #[test]
    fn decode_inverts_encode() {
        let w = Wallet::from_seed([1; 32]);
        for b in [body(None), body(Some(pcim()))] {
            let tx = w.sign(b);
            assert_eq!(Transaction::decode(&tx.encode()).unwrap(), tx);
        }
    }

    #[test]
    fn sign_verify_and_binding() {
        let w = Wallet::from_seed([2; 32]);
        let tx = sign_transaction(&w, body(Some(pcim())));
        assert!(tx.signature_valid());
        // deterministic scheme: identical bytes, identical signature
        assert_eq!(tx.signature, w.sign(body(Some(pcim()))).signature);
        let mut tampered = tx.clone();
        tampered.body.nonce += 1;
        assert!(!tampered.signature_valid());
        let mut bytes = tx.encode();
        bytes[10] ^= 1;
        assert!(!Transaction::decode(&bytes).unwrap().signature_valid());
    }
}
