use core::fmt;

use ed25519_dalek::{Signer, Verifier};
use rand_chacha::ChaCha20Rng;
use rand_core::{CryptoRng, RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use zeroize::Zeroizing;

use super::EnvelopeError;
use crate::codec::{DecodeError, Reader, Writer};

pub const KEY_LEN: usize = 32;
const KEY_VERSION: u8 = 0x01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeyKind {
    Encryption,
    Signing,
}

impl KeyKind {
    fn tag(self) -> u8 {
        match self {
            KeyKind::Encryption => 1,
            KeyKind::Signing => 2,
        }
    }

    fn from_tag(tag: u8) -> Result<Self, DecodeError> {
        match tag {
            1 => Ok(KeyKind::Encryption),
            2 => Ok(KeyKind::Signing),
            _ => Err(DecodeError::Invalid("key kind")),
        }
    }
}

/// First 8 bytes of `sha256(public key)`.
pub fn fingerprint(public: &[u8; KEY_LEN]) -> [u8; 8] {
    let digest = crate::sha256(public);
    let mut out = [0u8; 8];
    out.copy_from_slice(&digest[..8]);
    out
}

/// The shareable half of a [`KeyPair`].
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PublicKey {
    pub kind: KeyKind,
    pub bytes: [u8; KEY_LEN],
}

impl PublicKey {
    pub fn fingerprint(&self) -> [u8; 8] {
        fingerprint(&self.bytes)
    }

    /// `0x01 ‖ kind ‖ 32 key bytes`.
    pub fn to_bytes(&self) -> alloc::vec::Vec<u8> {
        let mut w = Writer::with_capacity(2 + KEY_LEN);
        w.u8(KEY_VERSION).u8(self.kind.tag()).bytes(&self.bytes);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let version = r.u8("key version")?;
        if version != KEY_VERSION {
            return Err(DecodeError::Version(version));
        }
        let kind = KeyKind::from_tag(r.u8("key kind")?)?;
        let bytes = r.array("public key")?;
        r.finish()?;
        Ok(Self { kind, bytes })
    }

    pub fn expect_kind(&self, expected: KeyKind) -> Result<(), EnvelopeError> {
        if self.kind == expected {
            Ok(())
        } else {
            Err(EnvelopeError::WrongKeyKind {
                expected,
                actual: self.kind,
            })
        }
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({:?}, {})", self.kind, hex::encode(self.bytes))
    }
}

/// An asymmetric key pair. The private half is zeroized on drop and is never
/// part of any export.
#[derive(Clone)]
pub struct KeyPair {
    kind: KeyKind,
    public: [u8; KEY_LEN],
    private: Zeroizing<[u8; KEY_LEN]>,
}

impl KeyPair {
    /// Rebuilds a pair from its private scalar/seed; the public half is
    /// always recomputed.
    pub fn from_private(kind: KeyKind, private: [u8; KEY_LEN]) -> Self {
        let public = match kind {
            KeyKind::Encryption => {
                let secret = x25519_dalek::StaticSecret::from(private);
                x25519_dalek::PublicKey::from(&secret).to_bytes()
            }
            KeyKind::Signing => ed25519_dalek::SigningKey::from_bytes(&private)
                .verifying_key()
                .to_bytes(),
        };
        Self {
            kind,
            public,
            private: Zeroizing::new(private),
        }
    }

    pub fn generate<R: RngCore + CryptoRng>(kind: KeyKind, rng: &mut R) -> Self {
        let mut private = [0u8; KEY_LEN];
        rng.fill_bytes(&mut private);
        Self::from_private(kind, private)
    }

    /// Deterministic generation for reproducible runs.
    pub fn from_seed(kind: KeyKind, seed: [u8; 32]) -> Self {
        Self::generate(kind, &mut ChaCha20Rng::from_seed(seed))
    }

    pub fn kind(&self) -> KeyKind {
        self.kind
    }

    pub fn public(&self) -> PublicKey {
        PublicKey {
            kind: self.kind,
            bytes: self.public,
        }
    }

    pub(crate) fn private_bytes(&self) -> &[u8; KEY_LEN] {
        &self.private
    }

    pub fn expect_kind(&self, expected: KeyKind) -> Result<(), EnvelopeError> {
        self.public().expect_kind(expected)
    }

    /// Ed25519 signature over `message`.
    pub fn sign(&self, message: &[u8]) -> Result<[u8; 64], EnvelopeError> {
        self.expect_kind(KeyKind::Signing)?;
        let key = ed25519_dalek::SigningKey::from_bytes(&self.private);
        Ok(key.sign(message).to_bytes())
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair")
            .field("kind", &self.kind)
            .field("public", &hex::encode(self.public))
            .finish_non_exhaustive()
    }
}

impl PartialEq for KeyPair {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.public == other.public && *self.private == *other.private
    }
}

impl Eq for KeyPair {}

/// Verifies an Ed25519 signature. Malformed keys verify as false.
pub fn verify_signature(public: &[u8; KEY_LEN], message: &[u8], signature: &[u8; 64]) -> bool {
    let Ok(key) = ed25519_dalek::VerifyingKey::from_bytes(public) else {
        return false;
    };
    key.verify(message, &ed25519_dalek::Signature::from_bytes(signature))
        .is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_generation_is_deterministic() {
        for kind in [KeyKind::Encryption, KeyKind::Signing] {
            let a = KeyPair::from_seed(kind, [7; 32]);
            let b = KeyPair::from_seed(kind, [7; 32]);
            assert_eq!(a, b);
            assert_ne!(a.public(), KeyPair::from_seed(kind, [8; 32]).public());
        }
    }

    #[test]
    fn public_is_derived_from_private() {
        let pair = KeyPair::from_seed(KeyKind::Signing, [1; 32]);
        let rebuilt = KeyPair::from_private(KeyKind::Signing, *pair.private_bytes());
        assert_eq!(rebuilt.public(), pair.public());
    }

    #[test]
    fn debug_hides_private_half() {
        let pair = KeyPair::from_seed(KeyKind::Encryption, [3; 32]);
        let shown = alloc::format!("{pair:?}");
        assert!(!shown.contains(&hex::encode(pair.private_bytes())));
    }

    #[test]
    fn public_key_bytes_roundtrip() {
        let public = KeyPair::from_seed(KeyKind::Encryption, [4; 32]).public();
        let bytes = public.to_bytes();
        assert_eq!(bytes.len(), 34);
        assert_eq!(PublicKey::from_bytes(&bytes).unwrap(), public);
        assert!(PublicKey::from_bytes(&bytes[..33]).is_err());
    }

    #[test]
    fn deterministic_signatures() {
        let pair = KeyPair::from_seed(KeyKind::Signing, [5; 32]);
        let a = pair.sign(b"msg").unwrap();
        assert_eq!(a, pair.sign(b"msg").unwrap());
        assert!(verify_signature(&pair.public().bytes, b"msg", &a));
        assert!(!verify_signature(&pair.public().bytes, b"msh", &a));
    }

    #[test]
    fn encryption_key_cannot_sign() {
        let pair = KeyPair::from_seed(KeyKind::Encryption, [5; 32]);
        assert!(matches!(
            pair.sign(b"x"),
            Err(EnvelopeError::WrongKeyKind { .. })
        ));
    }
}
