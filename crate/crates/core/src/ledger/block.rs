use alloc::vec::Vec;

use super::{Gas, Transaction};
use crate::codec::{DecodeError, Reader, Writer};
use crate::Hash;

pub const BLOCK_VERSION: u8 = 0x01;
const HEADER_LEN: usize = 1 + 8 + 32 + 8 + 32 + 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub height: u64,
    pub parent_hash: Hash,
    pub timestamp: u64,
    pub tx_root: Hash,
    pub transactions: Vec<Transaction>,
    pub gas_used: Gas,
    /// Length of [`Block::encode`].
    pub size_bytes: u64,
    pub block_hash: Hash,
}

impl Block {
    /// Seals a block: computes the tx root, size and hash.
    pub fn build(height: u64, parent_hash: Hash, timestamp: u64, transactions: Vec<Transaction>, gas_used: Gas) -> Self {
        let mut block = Block {
            height,
            parent_hash,
            timestamp,
            tx_root: tx_root(&transactions),
            transactions,
            gas_used,
            size_bytes: 0,
            block_hash: [0; 32],
        };
        block.block_hash = crate::sha256(&block.header_bytes());
        block.size_bytes = block.encode().len() as u64;
        block
    }

    /// `0x01 ‖ height ‖ parent_hash ‖ timestamp ‖ tx_root ‖ gas_used`.
    pub fn header_bytes(&self) -> [u8; HEADER_LEN] {
        let mut w = Writer::with_capacity(HEADER_LEN);
        w.u8(BLOCK_VERSION)
            .u64(self.height)
            .bytes(&self.parent_hash)
            .u64(self.timestamp)
            .bytes(&self.tx_root)
            .u64(self.gas_used);
        w.finish().try_into().expect("fixed header length")
    }

    pub fn computed_hash(&self) -> Hash {
        crate::sha256(&self.header_bytes())
    }

    /// Persisted form: `header ‖ block_hash ‖ u32 count ‖ (u32 len ‖ tx)*`.
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(&self.header_bytes())
            .bytes(&self.block_hash)
            .u32(self.transactions.len() as u32);
        for tx in &self.transactions {
            let bytes = tx.encode();
            w.u32(bytes.len() as u32).bytes(&bytes);
        }
        w.finish()
    }

    /// Parses the persisted form. Hashes are taken as stored; checking them
    /// is validation's job.
    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let version = r.u8("block version")?;
        if version != BLOCK_VERSION {
            return Err(DecodeError::Version(version));
        }
        let height = r.u64("height")?;
        let parent_hash = r.array("parent hash")?;
        let timestamp = r.u64("timestamp")?;
        let tx_root = r.array("tx root")?;
        let gas_used = r.u64("gas used")?;
        let block_hash = r.array("block hash")?;
        let count = r.u32("tx count")? as usize;
        let mut transactions = Vec::with_capacity(count.min(r.remaining() / 4));
        for _ in 0..count {
            let len = r.u32("tx length")? as usize;
            transactions.push(Transaction::decode(r.take(len, "transaction")?)?);
        }
        r.finish()?;
        Ok(Block {
            height,
            parent_hash,
            timestamp,
            tx_root,
            transactions,
            gas_used,
            size_bytes: bytes.len() as u64,
            block_hash,
        })
    }
}

/// `sha256` of the concatenated transaction hashes, in block order.
pub fn tx_root(transactions: &[Transaction]) -> Hash {
    let mut buf = Vec::with_capacity(transactions.len() * 32);
    for tx in transactions {
        buf.extend_from_slice(&tx.hash());
    }
    crate::sha256(&buf)
}
