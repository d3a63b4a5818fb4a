use serde::{Deserialize, Serialize};

use super::{verify_signature, EnvelopeError, KeyKind, KeyPair, PublicKey};

/// Detached signature over `sha256(image)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageSignature {
    pub signer: [u8; 8],
    #[serde(with = "sig_hex")]
    pub signature: [u8; 64],
}

mod sig_hex {
    use alloc::string::String;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(sig: &[u8; 64], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(sig))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 64], D::Error> {
        let text = String::deserialize(d)?;
        let mut out = [0u8; 64];
        hex::decode_to_slice(text, &mut out).map_err(serde::de::Error::custom)?;
        Ok(out)
    }
}

pub fn sign_image(signer: &KeyPair, image: &[u8]) -> Result<ImageSignature, EnvelopeError> {
    signer.expect_kind(KeyKind::Signing)?;
    Ok(ImageSignature {
        signer: signer.public().fingerprint(),
        signature: signer.sign(&crate::sha256(image))?,
    })
}

pub fn verify_image(
    signer: &PublicKey,
    image: &[u8],
    signature: &ImageSignature,
) -> Result<bool, EnvelopeError> {
    signer.expect_kind(KeyKind::Signing)?;
    Ok(signature.signer == signer.fingerprint()
        && verify_signature(&signer.bytes, &crate::sha256(image), &signature.signature))
}
