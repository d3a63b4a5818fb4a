use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{Message, ProtocolError, Role, World};
use crate::cas::{Backend, Cid};
use crate::envelope::{decrypt_with, encrypt_for, sign_image, verify_image, Envelope, KeyKind, PublicKey};
use crate::ledger::Receipt;
use crate::pcac::{ContractCall, Decision, PcacError};
use crate::Hash;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoreOutcome {
    pub root: Cid,
    pub tx_hash: Hash,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShareOutcome {
    pub shared_cid: Cid,
    pub tx_hash: Hash,
}

impl<B: Backend> World<B> {
    /// Radiologist side of the storage protocol: receives the patient's
    /// encryption key, encrypts the image for it, stores and pins the
    /// envelope and hands the root back to the patient.
    pub fn upload_image(&mut self, patient: &str, radiologist: &str, image: &[u8]) -> Result<Cid, ProtocolError> {
        self.expect_role(patient, Role::Patient)?;
        self.expect_role(radiologist, Role::Radiologist)?;
        if image.is_empty() {
            return Err(ProtocolError::EmptyImage);
        }
        let key = self.actor_mut(patient)?.enc_public();
        self.actor_mut(radiologist)?.inbox.push(Message::EncryptionKey {
            from: patient.to_string(),
            key,
        });
        let envelope = encrypt_for(&key, image, &mut self.rng())?;
        self.store_envelope(patient, radiologist, &envelope.to_bytes())
    }

    /// Puts already-encrypted envelope bytes and sends the root to the patient.
    pub fn store_envelope(&mut self, patient: &str, radiologist: &str, envelope: &[u8]) -> Result<Cid, ProtocolError> {
        let root = self.store.put_file(envelope)?;
        self.store.pin(&root)?;
        self.actor_mut(patient)?.inbox.push(Message::ImageCid {
            from: radiologist.to_string(),
            cid: root,
        });
        Ok(root)
    }

    /// Patient registers a stored image on chain. The radiologist first
    /// checks that no contract exists for the root yet.
    pub fn register_image(&mut self, patient: &str, root: Cid, description: &str) -> Result<Receipt, ProtocolError> {
        let address = self.expect_role(patient, Role::Patient)?;
        if self.chain.registry().contract(&root).is_some() {
            return Err(ProtocolError::Contract(PcacError::DuplicateImage(root)));
        }
        let key = self.actor_mut(patient)?.enc_public().to_bytes();
        let receipt = self.submit_ok(
            patient,
            root,
            address,
            key,
            description.to_string(),
            ContractCall::CreateContract,
        )?;
        self.actor_mut(patient)?.images.push(root);
        Ok(receipt)
    }

    /// Full storage protocol. The transaction is left pending; the caller
    /// decides when to seal.
    pub fn store_image_flow(
        &mut self,
        patient: &str,
        radiologist: &str,
        image: &[u8],
        description: &str,
    ) -> Result<StoreOutcome, ProtocolError> {
        let root = self.upload_image(patient, radiologist, image)?;
        let receipt = self.register_image(patient, root, description)?;
        Ok(StoreOutcome {
            root,
            tx_hash: receipt.tx_hash,
        })
    }

    /// Patient fetches and decrypts one of their own images.
    pub fn open_image(&mut self, patient: &str, root: &Cid) -> Result<Vec<u8>, ProtocolError> {
        let bytes = self.store.get_file(root)?;
        let envelope = Envelope::from_bytes(&bytes).map_err(crate::envelope::EnvelopeError::Malformed)?;
        Ok(decrypt_with(self.actor_mut(patient)?.enc_keys(), &envelope)?)
    }

    pub fn request_access(
        &mut self,
        requester: &str,
        patient: &str,
        image: Option<Cid>,
        notes: &str,
    ) -> Result<Receipt, ProtocolError> {
        let requester_addr = self.actor(requester)?.address();
        let patient_addr = self.actor(patient)?.address();
        let image = self.image_of(patient, image)?;
        let key = self.actor_mut(requester)?.enc_public().to_bytes();
        self.submit_ok(
            requester,
            image,
            patient_addr,
            key,
            String::new(),
            ContractCall::RequestingAccess {
                requester: requester_addr,
                notes: notes.to_string(),
            },
        )
    }

    /// Plain approve or deny without re-encrypting anything.
    pub fn decide(
        &mut self,
        patient: &str,
        requester: &str,
        image: Option<Cid>,
        decision: Decision,
        notes: &str,
    ) -> Result<Receipt, ProtocolError> {
        let requester_addr = self.actor(requester)?.address();
        let patient_addr = self.actor(patient)?.address();
        let image = self.image_of(patient, image)?;
        self.submit_ok(
            patient,
            image,
            patient_addr,
            Vec::new(),
            String::new(),
            ContractCall::ApproveIrs {
                requester: requester_addr,
                decision,
                notes: notes.to_string(),
                shared_cid: None,
            },
        )
    }

    /// Patient side of sharing: decrypt the original, re-encrypt it for the
    /// key the requester put on chain, store it and approve with its Cid.
    pub fn approve_and_share(
        &mut self,
        patient: &str,
        requester: &str,
        image: Option<Cid>,
    ) -> Result<ShareOutcome, ProtocolError> {
        let patient_addr = self.expect_role(patient, Role::Patient)?;
        let requester_addr = self.actor(requester)?.address();
        let image = self.image_of(patient, image)?;
        let contract = self
            .chain
            .registry()
            .contract(&image)
            .ok_or(ProtocolError::Contract(PcacError::NoSuchContract))?;
        let record = contract
            .requests
            .get(&requester_addr)
            .filter(|r| r.status == crate::pcac::RequestStatus::Pending)
            .ok_or(ProtocolError::Contract(PcacError::NoPendingRequest))?;
        let key = PublicKey::from_bytes(&record.requester_pubkey)
            .map_err(crate::envelope::EnvelopeError::Malformed)?;
        key.expect_kind(KeyKind::Encryption)?;
        if self.chain.registry().would_rate_limit(&patient_addr, self.now()) {
            return Err(ProtocolError::Contract(PcacError::RateLimited));
        }

        let plaintext = self.open_image(patient, &image)?;
        let envelope = encrypt_for(&key, &plaintext, &mut self.rng())?;
        if envelope.recipient_hint != key.fingerprint() {
            return Err(ProtocolError::Envelope(crate::envelope::EnvelopeError::AuthFailure));
        }
        let signature = sign_image(&self.actor(patient)?.sign_keys, &plaintext)?;
        let shared_cid = self.store.put_file(&envelope.to_bytes())?;
        self.store.pin(&shared_cid)?;

        let receipt = self.submit_ok(
            patient,
            image,
            patient_addr,
            Vec::new(),
            String::new(),
            ContractCall::ApproveIrs {
                requester: requester_addr,
                decision: Decision::Grant,
                notes: String::new(),
                shared_cid: Some(shared_cid),
            },
        );
        let receipt = match receipt {
            Ok(r) => r,
            Err(e) => {
                self.store.unpin(&shared_cid)?;
                return Err(e);
            }
        };
        if receipt.returned != Some(true) {
            self.store.unpin(&shared_cid)?;
            return Err(ProtocolError::Contract(PcacError::AlreadyAuthorized));
        }
        self.actor_mut(requester)?.inbox.push(Message::SharedImage {
            from: patient.to_string(),
            image,
            cid: shared_cid,
            signature,
        });
        Ok(ShareOutcome {
            shared_cid,
            tx_hash: receipt.tx_hash,
        })
    }

    /// Requester side: fetch the envelope shared for `image`, decrypt it and
    /// check the patient's signature over the plaintext.
    pub fn fetch_shared(&mut self, requester: &str, patient: &str, image: Option<Cid>) -> Result<Vec<u8>, ProtocolError> {
        let requester_addr = self.actor(requester)?.address();
        let image = self.image_of(patient, image)?;
        let authorized = self
            .chain
            .registry()
            .contract(&image)
            .is_some_and(|c| c.is_authorized(&requester_addr));
        if !authorized {
            return Err(ProtocolError::NotAuthorized);
        }
        let (cid, signature) = self
            .actor(requester)?
            .inbox
            .iter()
            .rev()
            .find_map(|m| match m {
                Message::SharedImage { image: i, cid, signature, .. } if *i == image => Some((*cid, *signature)),
                _ => None,
            })
            .ok_or(ProtocolError::NothingShared)?;
        let bytes = self.store.get_file(&cid)?;
        let envelope = Envelope::from_bytes(&bytes).map_err(crate::envelope::EnvelopeError::Malformed)?;
        let plaintext = decrypt_with(self.actor_mut(requester)?.enc_keys(), &envelope)?;
        let signer = self.actor(patient)?.sign_keys.public();
        if !verify_image(&signer, &plaintext, &signature)? {
            return Err(ProtocolError::BadImageSignature);
        }
        Ok(plaintext)
    }

    /// Request, approve and fetch in three consecutive blocks at the current
    /// time. Returns the requester's plaintext.
    pub fn share_image_flow(
        &mut self,
        patient: &str,
        requester: &str,
        image: Option<Cid>,
        notes: &str,
    ) -> Result<(ShareOutcome, Vec<u8>), ProtocolError> {
        self.request_access(requester, patient, image, notes)?;
        self.flush();
        let outcome = self.approve_and_share(patient, requester, image)?;
        self.flush();
        let plaintext = self.fetch_shared(requester, patient, image)?;
        Ok((outcome, plaintext))
    }

    /// Calls trace_authorization and returns the contract's answer.
    pub fn trace(&mut self, caller: &str, patient: &str, requester: &str, image: Option<Cid>) -> Result<Receipt, ProtocolError> {
        let patient_addr = self.actor(patient)?.address();
        let requester_addr = self.actor(requester)?.address();
        let image = self.image_of(patient, image)?;
        self.submit_ok(
            caller,
            image,
            patient_addr,
            Vec::new(),
            String::new(),
            ContractCall::TraceAuthorization {
                requester: requester_addr,
            },
        )
    }

    /// Revokes a requester, unpins the envelope that was shared with them
    /// and withdraws it from their inbox.
    pub fn revoke(&mut self, patient: &str, requester: &str, image: Option<Cid>) -> Result<Receipt, ProtocolError> {
        let patient_addr = self.actor(patient)?.address();
        let requester_addr = self.actor(requester)?.address();
        let image = self.image_of(patient, image)?;
        let shared = self
            .chain
            .registry()
            .contract(&image)
            .and_then(|c| c.share_map.get(&requester_addr).copied());
        let receipt = self.submit_ok(
            patient,
            image,
            patient_addr,
            Vec::new(),
            String::new(),
            ContractCall::RemoveIrs {
                requester: requester_addr,
            },
        )?;
        if receipt.returned == Some(true) {
            if let Some(cid) = shared {
                self.store.unpin(&cid)?;
            }
            self.actor_mut(requester)?
                .inbox
                .retain(|m| !matches!(m, Message::SharedImage { image: i, .. } if *i == image));
        }
        Ok(receipt)
    }
}
