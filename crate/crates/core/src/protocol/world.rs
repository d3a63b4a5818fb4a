use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand_chacha::ChaCha20Rng;
use rand_core::SeedableRng;
use serde::{Deserialize, Serialize};

use super::{Actor, ActorSpec, ProtocolError, Role};
use crate::cas::{Backend, Cid, Store};
use crate::ledger::{
    Address, Allocation, Chain, ChainConfig, Gas, PcimData, Receipt, TxBody, TxStatus, Wei, ETHER,
    GWEI, PCAC_CONTRACT,
};
use crate::pcac::ContractCall;
use crate::sha256;

/// Everything needed to rebuild a world from scratch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub seed: u64,
    pub gas_price: Wei,
    pub gas_limit: Gas,
    pub initial_balance: Wei,
    pub actors: Vec<ActorSpec>,
    /// Genesis allocations for actors are added on top of `chain.allocations`.
    pub chain: ChainConfig,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            gas_price: 2 * GWEI,
            gas_limit: 300_000,
            initial_balance: 100 * ETHER,
            actors: Vec::new(),
            chain: ChainConfig::default(),
        }
    }
}

impl WorldConfig {
    /// Chain genesis including one funded, key-bound account per actor.
    pub fn chain_config(&self) -> ChainConfig {
        let mut chain = self.chain.clone();
        for spec in &self.actors {
            let actor = Actor::new(spec, self.seed);
            chain.allocations.push(Allocation {
                address: actor.address(),
                balance: self.initial_balance,
                public_key: spec.address.map(|_| actor.wallet.public_key()),
            });
        }
        chain
    }
}

/// Ledger, object store and actors sharing one simulated clock.
#[derive(Debug)]
pub struct World<B: Backend> {
    pub chain: Chain,
    pub store: Store<B>,
    actors: BTreeMap<String, Actor>,
    config: WorldConfig,
}

impl<B: Backend> World<B> {
    pub fn new(config: WorldConfig, store: Store<B>) -> Result<Self, ProtocolError> {
        let chain = Chain::new(config.chain_config())?;
        Self::with_chain(config, chain, store)
    }

    /// Attaches actors to an existing chain, such as one replayed from disk.
    pub fn with_chain(config: WorldConfig, chain: Chain, mut store: Store<B>) -> Result<Self, ProtocolError> {
        let mut actors = BTreeMap::new();
        for spec in &config.actors {
            let actor = Actor::new(spec, config.seed);
            if actors.insert(spec.name.clone(), actor).is_some() {
                return Err(ProtocolError::DuplicateActor(spec.name.clone()));
            }
        }
        for contract in chain.registry().contracts() {
            if let Some(owner) = actors.values_mut().find(|a| a.address() == contract.owner) {
                owner.images.push(contract.image_cid);
            }
        }
        for actor in actors.values_mut() {
            actor.images.sort_by_key(|cid| chain.registry().contract(cid).map(|c| c.created_at));
        }
        store.set_clock(chain.now());
        Ok(Self {
            chain,
            store,
            actors,
            config,
        })
    }

    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    pub fn now(&self) -> u64 {
        self.chain.now()
    }

    pub fn actor(&self, name: &str) -> Result<&Actor, ProtocolError> {
        self.actors
            .get(name)
            .ok_or_else(|| ProtocolError::UnknownActor(name.to_string()))
    }

    pub fn actor_mut(&mut self, name: &str) -> Result<&mut Actor, ProtocolError> {
        self.actors
            .get_mut(name)
            .ok_or_else(|| ProtocolError::UnknownActor(name.to_string()))
    }

    pub fn actors(&self) -> impl Iterator<Item = &Actor> {
        self.actors.values()
    }

    pub fn actor_by_address(&self, address: &Address) -> Option<&Actor> {
        self.actors.values().find(|a| a.address() == *address)
    }

    pub(crate) fn expect_role(&self, name: &str, role: Role) -> Result<Address, ProtocolError> {
        let actor = self.actor(name)?;
        if actor.role != role {
            return Err(ProtocolError::WrongRole {
                actor: name.to_string(),
                expected: role,
            });
        }
        Ok(actor.address())
    }

    /// Seals pending transactions (if any) and moves both clocks forward.
    pub fn advance_to(&mut self, timestamp: u64) -> Result<(), ProtocolError> {
        if timestamp != self.now() {
            self.flush();
        }
        self.chain.advance_to(timestamp)?;
        self.store.set_clock(timestamp);
        Ok(())
    }

    /// Seals a block only when transactions are waiting.
    pub fn flush(&mut self) {
        if !self.chain.pending().is_empty() {
            self.chain.seal_block();
        }
    }

    /// Fresh randomness derived from the seed and the current world state, so
    /// identical histories draw identical bytes.
    pub(crate) fn rng(&self) -> ChaCha20Rng {
        let mut input = Vec::with_capacity(64);
        input.extend_from_slice(&self.config.seed.to_be_bytes());
        input.extend_from_slice(&self.chain.tip().block_hash);
        input.extend_from_slice(&(self.chain.pending().len() as u64).to_be_bytes());
        input.extend_from_slice(&self.now().to_be_bytes());
        input.extend_from_slice(&(self.store.len() as u64).to_be_bytes());
        ChaCha20Rng::from_seed(sha256(&input))
    }

    /// Signs and applies a contract call from `sender`. Reverts and
    /// out-of-gas are returned as receipts, not errors.
    pub fn submit(
        &mut self,
        sender: &str,
        image: Cid,
        patient: Address,
        encryption_pubkey: Vec<u8>,
        description: String,
        call: ContractCall,
    ) -> Result<Receipt, ProtocolError> {
        let actor = self.actor(sender)?;
        let body = TxBody {
            nonce: self.chain.nonce(&actor.address()),
            gas_price: self.config.gas_price,
            gas_limit: self.config.gas_limit,
            value: 0,
            recipient: PCAC_CONTRACT,
            pcim: Some(PcimData {
                image_cid: image,
                patient_address: patient,
                timestamp: self.now(),
                encryption_pubkey,
                description,
                call,
            }),
        };
        let tx = actor.wallet.sign(body);
        Ok(self.chain.apply_transaction(tx)?)
    }

    /// Plain value transfer with no contract call.
    pub fn transfer(&mut self, sender: &str, recipient: Address, value: Wei) -> Result<Receipt, ProtocolError> {
        let actor = self.actor(sender)?;
        let body = TxBody {
            nonce: self.chain.nonce(&actor.address()),
            gas_price: self.config.gas_price,
            gas_limit: self.config.gas_limit,
            value,
            recipient,
            pcim: None,
        };
        let tx = actor.wallet.sign(body);
        Ok(self.chain.apply_transaction(tx)?)
    }

    /// Overrides the price and limit used for subsequent transactions.
    pub fn set_tx_params(&mut self, gas_price: Wei, gas_limit: Gas) {
        self.config.gas_price = gas_price;
        self.config.gas_limit = gas_limit;
    }

    /// Like [`World::submit`] but treats anything other than success as an error.
    pub fn submit_ok(
        &mut self,
        sender: &str,
        image: Cid,
        patient: Address,
        encryption_pubkey: Vec<u8>,
        description: String,
        call: ContractCall,
    ) -> Result<Receipt, ProtocolError> {
        let receipt = self.submit(sender, image, patient, encryption_pubkey, description, call)?;
        match receipt.status {
            TxStatus::Success => Ok(receipt),
            TxStatus::Reverted(e) => Err(ProtocolError::Contract(e)),
            TxStatus::OutOfGas => Err(ProtocolError::OutOfGas(receipt.gas_used)),
        }
    }

    /// Image owned by `patient`: the latest one unless `image` is given.
    pub fn image_of(&self, patient: &str, image: Option<Cid>) -> Result<Cid, ProtocolError> {
        match image {
            Some(cid) => Ok(cid),
            None => self
                .actor(patient)?
                .latest_image()
                .ok_or_else(|| ProtocolError::NoImage(patient.to_string())),
        }
    }
}
