use serde::{Deserialize, Serialize};

use crate::crypto::{tags, Digest, HashAlg};
use crate::wire::{Decode, Encode, Message, MessageType, Reader, WireError, Writer};

use super::tx::{Tx, TxOutcome};

/// A transaction together with the contract's verdict on it. Rejected
/// transactions are logged but leave state untouched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxRecord {
    pub tx: Tx,
    pub outcome: TxOutcome,
}

impl Encode for TxRecord {
    fn encode(&self, w: &mut Writer) {
        w.put(&self.tx);
        w.put(&self.outcome);
    }
}

impl Decode for TxRecord {
    const MIN_ENCODED_LEN: usize = 66;
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        Ok(TxRecord {
            tx: r.get()?,
            outcome: r.get()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub height: u64,
    pub prev_hash: Digest,
    pub timestamp: u64,
    pub txs: Vec<TxRecord>,
    /// Digest of every preceding field's canonical bytes.
    pub block_hash: Digest,
}

impl Block {
    pub fn seal(alg: HashAlg, height: u64, prev_hash: Digest, timestamp: u64, txs: Vec<TxRecord>) -> Self {
        let mut b = Block {
            height,
            prev_hash,
            timestamp,
            txs,
            block_hash: Digest::ZERO,
        };
        b.block_hash = b.compute_hash(alg);
        b
    }

    pub fn genesis(alg: HashAlg) -> Self {
        Self::seal(alg, 0, Digest::ZERO, 0, Vec::new())
    }

    fn header_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.put_u64(self.height);
        w.put(&self.prev_hash);
        w.put_u64(self.timestamp);
        w.put_seq(&self.txs);
        w.into_bytes()
    }

    pub fn compute_hash(&self, alg: HashAlg) -> Digest {
        Digest::of(alg, tags::BLOCK, &[&self.header_bytes()])
    }
}

impl Encode for Block {
    fn encode(&self, w: &mut Writer) {
        w.put_raw(&self.header_bytes());
        w.put(&self.block_hash);
    }
}

impl Decode for Block {
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        Ok(Block {
            height: r.u64()?,
            prev_hash: r.get()?,
            timestamp: r.u64()?,
            txs: r.seq()?,
            block_hash: r.get()?,
        })
    }
}

impl Message for Block {
    const TYPE: MessageType = MessageType::Block;
}

/// Appends `[u32 LE length][block bytes]`.
pub fn write_frame(out: &mut Vec<u8>, block: &Block) {
    let bytes = block.to_bytes();
    out.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(&bytes);
}
