use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::cas::Cid;
use crate::envelope::{ImageSignature, KeyKind, KeyPair, PublicKey};
use crate::ledger::{Address, Wallet};
use crate::sha256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Patient,
    Radiologist,
    Requestor,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Patient => "patient",
            Role::Radiologist => "radiologist",
            Role::Requestor => "requestor",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "patient" => Some(Role::Patient),
            "radiologist" => Some(Role::Radiologist),
            "requestor" | "requester" => Some(Role::Requestor),
            _ => None,
        }
    }
}

/// How an actor enters the world. A fixed address is bound to the actor's
/// wallet key at genesis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActorSpec {
    pub name: String,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub address: Option<Address>,
}

/// A secure-channel message. Carries only public material.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Message {
    EncryptionKey { from: String, key: PublicKey },
    ImageCid { from: String, cid: Cid },
    SharedImage {
        from: String,
        image: Cid,
        cid: Cid,
        signature: ImageSignature,
    },
}

#[derive(Debug, Clone)]
pub struct Actor {
    pub name: String,
    pub role: Role,
    pub wallet: Wallet,
    pub sign_keys: KeyPair,
    enc_seed: [u8; 32],
    enc_keys: Option<KeyPair>,
    pub inbox: Vec<Message>,
    /// Image roots this actor owns, oldest first.
    pub images: Vec<Cid>,
}

fn derive_seed(world_seed: u64, name: &str, purpose: &str) -> [u8; 32] {
    let mut input = Vec::with_capacity(16 + name.len() + purpose.len());
    input.extend_from_slice(purpose.as_bytes());
    input.push(0);
    input.extend_from_slice(&world_seed.to_be_bytes());
    input.extend_from_slice(name.as_bytes());
    sha256(&input)
}

impl Actor {
    /// Builds an actor whose keys are derived from the world seed and name.
    pub fn new(spec: &ActorSpec, world_seed: u64) -> Self {
        let chain_keys = KeyPair::from_seed(KeyKind::Signing, derive_seed(world_seed, &spec.name, "wallet"));
        let wallet = match spec.address {
            Some(address) => Wallet::with_address(chain_keys, address).expect("signing key"),
            None => Wallet::new(chain_keys).expect("signing key"),
        };
        Self {
            name: spec.name.clone(),
            role: spec.role,
            wallet,
            sign_keys: KeyPair::from_seed(KeyKind::Signing, derive_seed(world_seed, &spec.name, "sign")),
            enc_seed: derive_seed(world_seed, &spec.name, "enc"),
            enc_keys: None,
            inbox: Vec::new(),
            images: Vec::new(),
        }
    }

    pub fn address(&self) -> Address {
        self.wallet.address()
    }

    /// The encryption key pair, generated on first use.
    pub fn enc_keys(&mut self) -> &KeyPair {
        let seed = self.enc_seed;
        self.enc_keys.get_or_insert_with(|| KeyPair::from_seed(KeyKind::Encryption, seed))
    }

    pub fn has_enc_keys(&self) -> bool {
        self.enc_keys.is_some()
    }

    pub fn enc_public(&mut self) -> PublicKey {
        self.enc_keys().public()
    }

    pub fn latest_image(&self) -> Option<Cid> {
        self.images.last().copied()
    }
}
