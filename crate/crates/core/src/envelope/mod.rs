//! Identity keys, hybrid envelope encryption and detached image signatures.
//!
//! Encryption keys are X25519; signing keys are Ed25519. An [`Envelope`]
//! wraps a fresh ChaCha20-Poly1305 content key to the recipient with an
//! ephemeral Diffie-Hellman exchange, so only the holder of the matching
//! private key can open it.

mod keys;
mod seal;
mod signature;

pub use keys::{fingerprint, verify_signature, KeyKind, KeyPair, PublicKey, KEY_LEN};
pub use seal::{decrypt_bytes, decrypt_with, encrypt_for, Envelope, NONCE_LEN, TAG_LEN, WRAPPED_KEY_LEN};
pub use signature::{sign_image, verify_image, ImageSignature};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvelopeError {
    #[error("expected a {expected:?} key, got {actual:?}")]
    WrongKeyKind { expected: KeyKind, actual: KeyKind },
    #[error("envelope failed authentication")]
    AuthFailure,
    #[error("malformed envelope or key bytes: {0}")]
    Malformed(#[from] crate::codec::DecodeError),
}
