use alloc::vec::Vec;

use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use hkdf::Hkdf;
use rand_core::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use sha2::Sha256;
use zeroize::Zeroizing;

use super::{EnvelopeError, KeyKind, KeyPair, PublicKey, KEY_LEN};
use crate::codec::{DecodeError, Reader, Writer};

const ENVELOPE_VERSION: u8 = 0x01;
const WRAP_INFO: &[u8] = b"pcim envelope key wrap v1";

pub const NONCE_LEN: usize = 12;
pub const TAG_LEN: usize = 16;
/// Ephemeral X25519 public key followed by the sealed content key.
pub const WRAPPED_KEY_LEN: usize = KEY_LEN + KEY_LEN + TAG_LEN;

/// A hybrid-encrypted payload addressed to one recipient.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Envelope {
    pub wrapped_key: Vec<u8>,
    pub nonce: Vec<u8>,
    pub ciphertext: Vec<u8>,
    pub recipient_hint: [u8; 8],
}

impl Envelope {
    /// `0x01 ‖ u16 len ‖ wrapped_key ‖ u8 len ‖ nonce ‖ u64 len ‖ ciphertext ‖ hint`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_capacity(1 + 2 + 1 + 8 + 8 + self.wrapped_key.len() + self.nonce.len() + self.ciphertext.len());
        w.u8(ENVELOPE_VERSION)
            .u16(u16::try_from(self.wrapped_key.len()).expect("wrapped key too long"))
            .bytes(&self.wrapped_key)
            .u8(u8::try_from(self.nonce.len()).expect("nonce too long"))
            .bytes(&self.nonce)
            .u64(self.ciphertext.len() as u64)
            .bytes(&self.ciphertext)
            .bytes(&self.recipient_hint);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let version = r.u8("envelope version")?;
        if version != ENVELOPE_VERSION {
            return Err(DecodeError::Version(version));
        }
        let len = r.u16("wrapped key length")? as usize;
        let wrapped_key = r.take(len, "wrapped key")?.to_vec();
        let len = r.u8("nonce length")? as usize;
        let nonce = r.take(len, "nonce")?.to_vec();
        let len = usize::try_from(r.u64("ciphertext length")?)
            .map_err(|_| DecodeError::Invalid("ciphertext length"))?;
        let ciphertext = r.take(len, "ciphertext")?.to_vec();
        let recipient_hint = r.array("recipient hint")?;
        r.finish()?;
        Ok(Self {
            wrapped_key,
            nonce,
            ciphertext,
            recipient_hint,
        })
    }

    fn content_aad(&self) -> Vec<u8> {
        let mut aad = Vec::with_capacity(1 + 8 + self.wrapped_key.len());
        aad.push(ENVELOPE_VERSION);
        aad.extend_from_slice(&self.recipient_hint);
        aad.extend_from_slice(&self.wrapped_key);
        aad
    }
}

fn wrapping_cipher(shared: &[u8; 32], ephemeral: &[u8; 32], recipient: &[u8; 32]) -> ChaCha20Poly1305 {
    let mut salt = [0u8; 64];
    salt[..32].copy_from_slice(ephemeral);
    salt[32..].copy_from_slice(recipient);
    let mut kek = Zeroizing::new([0u8; 32]);
    Hkdf::<Sha256>::new(Some(&salt), shared)
        .expand(WRAP_INFO, kek.as_mut())
        .expect("32 bytes is a valid HKDF-SHA256 output length");
    ChaCha20Poly1305::new(Key::from_slice(kek.as_ref()))
}

/// Encrypts `plaintext` so that only the holder of `recipient`'s private key
/// can read it. A fresh content key, nonce and ephemeral key are drawn from
/// `rng` on every call.
pub fn encrypt_for<R: RngCore + CryptoRng>(
    recipient: &PublicKey,
    plaintext: &[u8],
    rng: &mut R,
) -> Result<Envelope, EnvelopeError> {
    recipient.expect_kind(KeyKind::Encryption)?;

    let mut content_key = Zeroizing::new([0u8; 32]);
    rng.fill_bytes(content_key.as_mut());
    let mut nonce = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut nonce);

    let ephemeral = KeyPair::generate(KeyKind::Encryption, rng);
    let eph_secret = x25519_dalek::StaticSecret::from(*ephemeral.private_bytes());
    let shared = eph_secret.diffie_hellman(&x25519_dalek::PublicKey::from(recipient.bytes));
    let hint = recipient.fingerprint();
    let eph_public = ephemeral.public().bytes;

    let sealed_key = wrapping_cipher(shared.as_bytes(), &eph_public, &recipient.bytes)
        .encrypt(
            Nonce::from_slice(&[0u8; NONCE_LEN]),
            Payload {
                msg: content_key.as_ref(),
                aad: &hint,
            },
        )
        .expect("in-memory AEAD encryption cannot fail");
    let mut wrapped_key = Vec::with_capacity(WRAPPED_KEY_LEN);
    wrapped_key.extend_from_slice(&eph_public);
    wrapped_key.extend_from_slice(&sealed_key);

    let mut envelope = Envelope {
        wrapped_key,
        nonce: nonce.to_vec(),
        ciphertext: Vec::new(),
        recipient_hint: hint,
    };
    let aad = envelope.content_aad();
    envelope.ciphertext = ChaCha20Poly1305::new(Key::from_slice(content_key.as_ref()))
        .encrypt(
            Nonce::from_slice(&nonce),
            Payload {
                msg: plaintext,
                aad: &aad,
            },
        )
        .expect("in-memory AEAD encryption cannot fail");
    Ok(envelope)
}

/// Opens an envelope with the recipient's private key. Any modified byte in
/// any field yields [`EnvelopeError::AuthFailure`].
pub fn decrypt_with(private: &KeyPair, envelope: &Envelope) -> Result<Vec<u8>, EnvelopeError> {
    private.expect_kind(KeyKind::Encryption)?;
    let own = private.public();
    if envelope.recipient_hint != own.fingerprint()
        || envelope.wrapped_key.len() != WRAPPED_KEY_LEN
        || envelope.nonce.len() != NONCE_LEN
    {
        return Err(EnvelopeError::AuthFailure);
    }

    let mut eph_public = [0u8; KEY_LEN];
    eph_public.copy_from_slice(&envelope.wrapped_key[..KEY_LEN]);
    let secret = x25519_dalek::StaticSecret::from(*private.private_bytes());
    let shared = secret.diffie_hellman(&x25519_dalek::PublicKey::from(eph_public));
    if !shared.was_contributory() {
        return Err(EnvelopeError::AuthFailure);
    }

    let content_key = Zeroizing::new(
        wrapping_cipher(shared.as_bytes(), &eph_public, &own.bytes)
            .decrypt(
                Nonce::from_slice(&[0u8; NONCE_LEN]),
                Payload {
                    msg: &envelope.wrapped_key[KEY_LEN..],
                    aad: &envelope.recipient_hint,
                },
            )
            .map_err(|_| EnvelopeError::AuthFailure)?,
    );
    if content_key.len() != 32 {
        return Err(EnvelopeError::AuthFailure);
    }

    ChaCha20Poly1305::new(Key::from_slice(&content_key))
        .decrypt(
            Nonce::from_slice(&envelope.nonce),
            Payload {
                msg: &envelope.ciphertext,
                aad: &envelope.content_aad(),
            },
        )
        .map_err(|_| EnvelopeError::AuthFailure)
}

/// Parses and opens serialized envelope bytes. Bytes that no longer parse
/// count as tampering and also yield [`EnvelopeError::AuthFailure`].
pub fn decrypt_bytes(private: &KeyPair, bytes: &[u8]) -> Result<Vec<u8>, EnvelopeError> {
    private.expect_kind(KeyKind::Encryption)?;
    let envelope = Envelope::from_bytes(bytes).map_err(|_| EnvelopeError::AuthFailure)?;
    decrypt_with(private, &envelope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha20Rng;
    use rand_core::SeedableRng;

    fn pair(seed: u8) -> KeyPair {
        KeyPair::from_seed(KeyKind::Encryption, [seed; 32])
    }

    #[test]
    fn roundtrip_and_overhead() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let alice = pair(1);
        for len in [0usize, 1, 31, 4096] {
            let plain: Vec<u8> = (0..len).map(|i| i as u8).collect();
            let env = encrypt_for(&alice.public(), &plain, &mut rng).unwrap();
            assert_eq!(env.ciphertext.len(), len + TAG_LEN);
            assert_eq!(decrypt_with(&alice, &env).unwrap(), plain);
        }
    }

    #[test]
    fn other_private_key_fails() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let env = encrypt_for(&pair(1).public(), b"scan", &mut rng).unwrap();
        assert_eq!(decrypt_with(&pair(2), &env), Err(EnvelopeError::AuthFailure));
        // same hint cannot be forged into a different key
        let mut forged = env.clone();
        forged.recipient_hint = pair(2).public().fingerprint();
        assert_eq!(decrypt_with(&pair(2), &forged), Err(EnvelopeError::AuthFailure));
    }

    #[test]
    fn fresh_randomness_per_call() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let key = pair(1).public();
        let a = encrypt_for(&key, b"same", &mut rng).unwrap();
        let b = encrypt_for(&key, b"same", &mut rng).unwrap();
        assert_ne!(a.ciphertext, b.ciphertext);
        assert_ne!(a.wrapped_key, b.wrapped_key);
    }

    #[test]
    fn signing_key_is_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let signing = KeyPair::from_seed(KeyKind::Signing, [1; 32]);
        assert!(matches!(
            encrypt_for(&signing.public(), b"x", &mut rng),
            Err(EnvelopeError::WrongKeyKind { .. })
        ));
    }

    #[test]
    fn file_layout() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let env = encrypt_for(&pair(9).public(), b"abc", &mut rng).unwrap();
        let bytes = env.to_bytes();
        assert_eq!(bytes[0], 0x01);
        assert_eq!(u16::from_be_bytes([bytes[1], bytes[2]]) as usize, WRAPPED_KEY_LEN);
        assert_eq!(bytes[3 + WRAPPED_KEY_LEN] as usize, NONCE_LEN);
        assert_eq!(bytes.len(), 1 + 2 + WRAPPED_KEY_LEN + 1 + NONCE_LEN + 8 + 3 + TAG_LEN + 8);
        assert_eq!(&bytes[bytes.len() - 8..], &env.recipient_hint);
        assert_eq!(Envelope::from_bytes(&bytes).unwrap(), env);
        assert!(Envelope::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }
}
