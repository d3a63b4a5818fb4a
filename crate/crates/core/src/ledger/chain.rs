use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::block::tx_root;
use super::{compute_tx_cost, gas_for_call, Address, Block, Gas, GasSchedule, LedgerError, Transaction, Wei};
use crate::cas::Cid;
use crate::pcac::{CallContext, Event, EventName, PcacError, RateLimitPolicy, Registry};
use crate::Hash;

/// Genesis balance, optionally bound to a public key. A bound account
/// accepts only that key regardless of its address; unbound accounts use
/// the derived-address rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    pub address: Address,
    pub balance: Wei,
    #[serde(default, with = "opt_key_hex")]
    pub public_key: Option<[u8; 32]>,
}

mod opt_key_hex {
    use alloc::string::String;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(key: &Option<[u8; 32]>, s: S) -> Result<S::Ok, S::Error> {
        match key {
            Some(k) => s.serialize_some(&hex::encode(k)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<[u8; 32]>, D::Error> {
        let Some(text) = Option::<String>::deserialize(d)? else {
            return Ok(None);
        };
        let mut out = [0u8; 32];
        hex::decode_to_slice(text, &mut out).map_err(serde::de::Error::custom)?;
        Ok(Some(out))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub schedule: GasSchedule,
    pub genesis_timestamp: u64,
    pub allocations: Vec<Allocation>,
    #[serde(default)]
    pub rate_limit: Option<RateLimitPolicy>,
    /// Reference gas per block for utilisation reporting.
    pub block_gas_target: Gas,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            schedule: GasSchedule::default(),
            genesis_timestamp: 0,
            allocations: Vec::new(),
            rate_limit: Some(RateLimitPolicy::default()),
            block_gas_target: 1_500_000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Account {
    pub nonce: u64,
    pub balance: Wei,
    pub public_key: Option<[u8; 32]>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TxStatus {
    Success,
    Reverted(PcacError),
    OutOfGas,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Receipt {
    pub tx_hash: Hash,
    pub status: TxStatus,
    pub gas_used: Gas,
    pub cost_wei: Wei,
    pub events: Vec<Event>,
    /// Boolean result of the contract call, when it succeeded.
    pub returned: Option<bool>,
    /// Owner of the contract the call touched.
    pub contract: Option<(Cid, Address)>,
}

impl Receipt {
    pub fn is_success(&self) -> bool {
        self.status == TxStatus::Success
    }
}

/// An event as stored on chain, with its location.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventRecord {
    pub height: u64,
    pub tx_hash: Hash,
    pub caller: Address,
    pub contract: Cid,
    pub owner: Address,
    pub event: Event,
}

/// Event query. `address` matches the patient or requester field of the
/// event, or the owner of the contract that emitted it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EventFilter {
    pub address: Option<Address>,
    pub name: Option<EventName>,
    pub min_height: Option<u64>,
    pub max_height: Option<u64>,
}

impl EventFilter {
    pub fn matches(&self, record: &EventRecord) -> bool {
        self.address
            .is_none_or(|a| record.owner == a || record.event.involves(&a))
            && self.name.is_none_or(|n| record.event.name == n)
            && self.min_height.is_none_or(|h| record.height >= h)
            && self.max_height.is_none_or(|h| record.height <= h)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ViolationKind {
    #[error("genesis block does not match the configuration")]
    Genesis,
    #[error("unexpected height")]
    Height,
    #[error("parent hash does not link to the previous block")]
    ParentHash,
    #[error("stored block hash does not match the header")]
    BlockHash,
    #[error("transaction root mismatch")]
    TxRoot,
    #[error("invalid signature on transaction {0}")]
    Signature(usize),
    #[error("timestamp goes backwards")]
    Timestamp,
    #[error("transaction {index} does not re-apply: {error}")]
    Replay { index: usize, error: LedgerError },
    #[error("re-executed block differs from the stored one")]
    Execution,
    #[error("stored receipts differ from re-execution")]
    Receipts,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("block {height}: {kind}")]
pub struct Violation {
    pub height: u64,
    pub kind: ViolationKind,
}

/// Ledger state plus the sealed block history.
#[derive(Debug, Clone)]
pub struct Chain {
    config: ChainConfig,
    accounts: BTreeMap<Address, Account>,
    registry: Registry,
    blocks: Vec<Block>,
    receipts: Vec<Vec<Receipt>>,
    pending: Vec<(Transaction, Receipt)>,
    now: u64,
    fees: Wei,
}

impl Chain {
    pub fn new(config: ChainConfig) -> Result<Self, LedgerError> {
        let mut accounts = BTreeMap::new();
        for alloc in &config.allocations {
            let prev = accounts.insert(
                alloc.address,
                Account {
                    nonce: 0,
                    balance: alloc.balance,
                    public_key: alloc.public_key,
                },
            );
            if prev.is_some() {
                return Err(LedgerError::DuplicateAllocation(alloc.address));
            }
        }
        let genesis = Block::build(0, [0; 32], config.genesis_timestamp, Vec::new(), 0);
        Ok(Self {
            registry: Registry::new(config.rate_limit),
            now: config.genesis_timestamp,
            config,
            accounts,
            blocks: alloc::vec![genesis],
            receipts: alloc::vec![Vec::new()],
            pending: Vec::new(),
            fees: 0,
        })
    }

    pub fn config(&self) -> &ChainConfig {
        &self.config
    }

    pub fn schedule(&self) -> &GasSchedule {
        &self.config.schedule
    }

    pub fn account(&self, address: &Address) -> Option<&Account> {
        self.accounts.get(address)
    }

    pub fn accounts(&self) -> impl Iterator<Item = (&Address, &Account)> {
        self.accounts.iter()
    }

    pub fn balance(&self, address: &Address) -> Wei {
        self.accounts.get(address).map_or(0, |a| a.balance)
    }

    pub fn nonce(&self, address: &Address) -> u64 {
        self.accounts.get(address).map_or(0, |a| a.nonce)
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn receipts(&self, height: u64) -> Option<&[Receipt]> {
        self.receipts.get(height as usize).map(Vec::as_slice)
    }

    pub fn tip(&self) -> &Block {
        self.blocks.last().expect("genesis always present")
    }

    pub fn height(&self) -> u64 {
        self.tip().height
    }

    pub fn pending(&self) -> &[(Transaction, Receipt)] {
        &self.pending
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn fees_collected(&self) -> Wei {
        self.fees
    }

    /// Sum of balances plus collected fees; constant across any sequence
    /// of transactions.
    pub fn total_supply(&self) -> Wei {
        self.accounts.values().map(|a| a.balance).sum::<Wei>() + self.fees
    }

    /// Moves the simulated clock forward. Only allowed between blocks.
    pub fn advance_to(&mut self, timestamp: u64) -> Result<(), LedgerError> {
        if timestamp < self.now {
            return Err(LedgerError::ClockRegression {
                now: self.now,
                requested: timestamp,
            });
        }
        if timestamp != self.now && !self.pending.is_empty() {
            return Err(LedgerError::PendingTransactions);
        }
        self.now = timestamp;
        Ok(())
    }

    fn check_sender(&self, tx: &Transaction) -> Result<(), LedgerError> {
        let bound = self.accounts.get(&tx.sender).and_then(|a| a.public_key);
        let key_ok = match bound {
            Some(key) => key == tx.sender_pubkey,
            None => Address::derive(&tx.sender_pubkey)? == tx.sender,
        };
        if key_ok && tx.signature_valid() {
            Ok(())
        } else {
            Err(LedgerError::InvalidSignature)
        }
    }

    /// Validates, meters and executes one transaction against current state.
    ///
    /// Signature, nonce and balance failures reject the transaction outright.
    /// Once admitted, the transaction is charged gas even when it runs out of
    /// gas or the contract reverts; a revert leaves contract state untouched.
    pub fn apply_transaction(&mut self, tx: Transaction) -> Result<Receipt, LedgerError> {
        self.check_sender(&tx)?;
        let body = &tx.body;
        let account = self.accounts.get(&tx.sender).cloned().unwrap_or_default();
        if body.nonce != account.nonce {
            return Err(LedgerError::BadNonce {
                expected: account.nonce,
                got: body.nonce,
            });
        }
        let upfront = compute_tx_cost(body.gas_limit, body.gas_price)?
            .checked_add(body.value)
            .ok_or(LedgerError::Overflow)?;
        if account.balance < upfront {
            return Err(LedgerError::InsufficientFunds {
                needed: upfront,
                available: account.balance,
            });
        }

        let required = match &body.pcim {
            Some(pcim) => gas_for_call(&pcim.call, &self.config.schedule)?,
            None => self.config.schedule.transfer_gas,
        };
        let tx_hash = tx.hash();
        let mut receipt = Receipt {
            tx_hash,
            status: TxStatus::Success,
            gas_used: required,
            cost_wei: 0,
            events: Vec::new(),
            returned: None,
            contract: None,
        };
        let mut transfer = 0;
        if required > body.gas_limit {
            receipt.status = TxStatus::OutOfGas;
            receipt.gas_used = body.gas_limit;
        } else if let Some(pcim) = &body.pcim {
            let ctx = CallContext {
                sender: tx.sender,
                now: self.now,
            };
            match self.registry.execute(ctx, pcim) {
                Ok(outcome) => {
                    receipt.returned = Some(outcome.returned);
                    receipt.events = outcome.events;
                    receipt.contract = self
                        .registry
                        .contract(&pcim.image_cid)
                        .map(|c| (c.image_cid, c.owner));
                    transfer = body.value;
                }
                Err(e) => receipt.status = TxStatus::Reverted(e),
            }
        } else {
            transfer = body.value;
        }
        receipt.cost_wei = compute_tx_cost(receipt.gas_used, body.gas_price)?;

        let sender = self.accounts.entry(tx.sender).or_default();
        sender.nonce += 1;
        sender.balance -= receipt.cost_wei + transfer;
        self.accounts.entry(body.recipient).or_default().balance += transfer;
        self.fees += receipt.cost_wei;

        self.pending.push((tx, receipt.clone()));
        Ok(receipt)
    }

    /// Seals all pending transactions into a new block stamped with the
    /// current clock.
    pub fn seal_block(&mut self) -> &Block {
        let (txs, receipts): (Vec<_>, Vec<_>) = core::mem::take(&mut self.pending).into_iter().unzip();
        let gas_used = receipts.iter().map(|r: &Receipt| r.gas_used).sum();
        let parent = self.tip().block_hash;
        let block = Block::build(self.height() + 1, parent, self.now, txs, gas_used);
        self.blocks.push(block);
        self.receipts.push(receipts);
        self.tip()
    }

    /// Events in block order, filtered.
    pub fn query_events(&self, filter: &EventFilter) -> Vec<EventRecord> {
        let mut out = Vec::new();
        for (block, receipts) in self.blocks.iter().zip(&self.receipts) {
            for (tx, receipt) in block.transactions.iter().zip(receipts) {
                let Some((contract, owner)) = receipt.contract else {
                    continue;
                };
                for event in &receipt.events {
                    let record = EventRecord {
                        height: block.height,
                        tx_hash: receipt.tx_hash,
                        caller: tx.sender,
                        contract,
                        owner,
                        event: event.clone(),
                    };
                    if filter.matches(&record) {
                        out.push(record);
                    }
                }
            }
        }
        out
    }

    /// Rebuilds a chain by re-executing persisted blocks, checking every
    /// hash link, signature, root and execution result on the way.
    pub fn from_blocks(config: ChainConfig, blocks: &[Block]) -> Result<Self, Violation> {
        let violation = |height, kind| Violation { height, kind };
        let mut chain = Chain::new(config).map_err(|error| violation(0, ViolationKind::Replay { index: 0, error }))?;
        match blocks.first() {
            Some(g) if g == chain.tip() => {}
            _ => return Err(violation(0, ViolationKind::Genesis)),
        }
        for block in &blocks[1..] {
            let h = block.height;
            let tip = chain.tip();
            if h != tip.height + 1 {
                return Err(violation(h, ViolationKind::Height));
            }
            if block.parent_hash != tip.block_hash {
                return Err(violation(h, ViolationKind::ParentHash));
            }
            if block.block_hash != block.computed_hash() {
                return Err(violation(h, ViolationKind::BlockHash));
            }
            if block.tx_root != tx_root(&block.transactions) {
                return Err(violation(h, ViolationKind::TxRoot));
            }
            if let Some(i) = block.transactions.iter().position(|tx| !tx.signature_valid()) {
                return Err(violation(h, ViolationKind::Signature(i)));
            }
            chain
                .advance_to(block.timestamp)
                .map_err(|_| violation(h, ViolationKind::Timestamp))?;
            for (index, tx) in block.transactions.iter().enumerate() {
                chain
                    .apply_transaction(tx.clone())
                    .map_err(|error| violation(h, ViolationKind::Replay { index, error }))?;
            }
            if chain.seal_block() != block {
                return Err(violation(h, ViolationKind::Execution));
            }
        }
        Ok(chain)
    }

    /// Full integrity check of this chain; see [`Chain::from_blocks`].
    pub fn validate(&self) -> Result<(), Violation> {
        let rebuilt = Chain::from_blocks(self.config.clone(), &self.blocks)?;
        if let Some(h) = (0..self.receipts.len()).find(|&h| rebuilt.receipts[h] != self.receipts[h]) {
            return Err(Violation {
                height: h as u64,
                kind: ViolationKind::Receipts,
            });
        }
        Ok(())
    }
}

pub fn validate_chain(chain: &Chain) -> bool {
    chain.validate().is_ok()
}

#[cfg(test)]
mod tests;
