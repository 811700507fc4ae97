use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::crypto::{Digest, HashAlg};
use crate::protocol::{ModelHashSource, ProtocolError, Registry, RoundHeader};

use super::block::{write_frame, Block, TxRecord};
use super::contract::{Applied, ContractState, FinalizedRound};
use super::genesis::GenesisConfig;
use super::tx::{LedgerReject, Tx, TxBody, TxOutcome};
use super::LedgerError;

/// Where an accepted transaction landed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxReceipt {
    pub height: u64,
    pub index: usize,
}

/// Produces blocks. The single-writer simulator is the only implementation;
/// a consensus engine would sit behind the same interface.
pub trait BlockProducer {
    fn submit_tx(&mut self, tx: Tx) -> Result<TxReceipt, LedgerReject>;
    fn seal_block(&mut self) -> &Block;
}

/// Single-writer chain with deterministic logical time: the block at height
/// `h` has timestamp `h · block_interval`.
#[derive(Debug, Clone)]
pub struct Ledger {
    genesis: GenesisConfig,
    alg: HashAlg,
    contract: ContractState,
    blocks: Vec<Block>,
    pending: Vec<TxRecord>,
}

impl Ledger {
    pub fn new(genesis: GenesisConfig) -> Result<Self, LedgerError> {
        let contract = ContractState::new(&genesis)?;
        let alg = genesis.policy.hash;
        let mut ledger = Self {
            alg,
            contract,
            blocks: Vec::new(),
            pending: Vec::new(),
            genesis,
        };
        let g = Block::genesis(alg);
        ledger.push_block(g);
        Ok(ledger)
    }

    pub fn genesis(&self) -> &GenesisConfig {
        &self.genesis
    }

    pub fn contract(&self) -> &ContractState {
        &self.contract
    }

    /// Timestamp of the block currently being assembled.
    pub fn now(&self) -> u64 {
        self.tip().timestamp + self.genesis.block_interval
    }

    pub fn tip(&self) -> &Block {
        self.blocks.last().expect("genesis always present")
    }

    pub fn height(&self) -> u64 {
        self.tip().height
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    pub fn registry(&self) -> &Registry {
        self.contract.registry()
    }

    pub fn open_round(&self) -> Option<&RoundHeader> {
        self.contract.open_round()
    }

    pub fn round_registry(&self) -> Option<&Registry> {
        self.contract.round_registry()
    }

    pub fn commitments(&self, round_t: u64) -> Result<Vec<(Digest, Digest)>, LedgerError> {
        self.contract.commitments(round_t)
    }

    pub fn finalized(&self, round_t: u64) -> Result<&FinalizedRound, LedgerError> {
        self.contract.finalized(round_t)
    }

    pub fn model_hash(&self, round_t: u64) -> Result<Digest, LedgerError> {
        self.finalized(round_t).map(|f| f.model_hash)
    }

    /// Canonical chain file contents: every sealed block as a length-prefixed frame.
    pub fn chain_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for b in &self.blocks {
            write_frame(&mut out, b);
        }
        out
    }

    pub fn write_chain(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.chain_bytes())
    }

    fn push_block(&mut self, block: Block) {
        let open_next = self.contract.awaiting_next_round();
        let seed = if block.height == 0 {
            [self.genesis.hash().0, block.block_hash.0].concat()
        } else {
            block.block_hash.0.to_vec()
        };
        let ts = block.timestamp;
        self.blocks.push(block);
        if open_next {
            self.contract.open_next_round(&seed, ts);
        }
    }

    /// Applies `tx` to the contract state for the pending block. Rejected
    /// transactions are still recorded. A successful finalization seals
    /// the block immediately.
    pub fn submit_tx(&mut self, tx: Tx) -> Result<TxReceipt, LedgerReject> {
        let now = self.now();
        let height = self.height() + 1;
        let result = self.contract.apply(&tx, now, height);
        let outcome = match result {
            Ok(_) => TxOutcome::Accepted,
            Err(r) => TxOutcome::Rejected(r),
        };
        let index = self.pending.len();
        self.pending.push(TxRecord { tx, outcome });
        if let Ok(Applied::Finalized(_)) = result {
            self.seal_block();
        }
        result.map(|_| TxReceipt { height, index })
    }

    pub fn seal_block(&mut self) -> &Block {
        let txs = std::mem::take(&mut self.pending);
        let block = Block::seal(self.alg, self.height() + 1, self.tip().block_hash, self.now(), txs);
        self.push_block(block);
        self.tip()
    }

    /// Re-executes a block produced elsewhere, checking its links and that
    /// every recorded outcome is what this ledger computes.
    pub(crate) fn replay_block(&mut self, block: &Block, mut on_finalize: impl FnMut(&ContractState, &Tx)) -> Result<(), String> {
        let expected_height = self.height() + 1;
        if block.height != expected_height {
            return Err(format!("height {} where {expected_height} was expected", block.height));
        }
        if block.prev_hash != self.tip().block_hash {
            return Err("prev_hash does not link to the parent block".into());
        }
        if block.timestamp != self.now() {
            return Err(format!("timestamp {} where {} was expected", block.timestamp, self.now()));
        }
        if block.compute_hash(self.alg) != block.block_hash {
            return Err("block_hash does not match block contents".into());
        }
        let mut finalized_here = false;
        for (i, rec) in block.txs.iter().enumerate() {
            if finalized_here {
                return Err(format!("tx {i} follows a finalization in the same block"));
            }
            if matches!(rec.tx.body, TxBody::FinalizeRound { .. }) {
                on_finalize(&self.contract, &rec.tx);
            }
            let result = self.contract.apply(&rec.tx, block.timestamp, block.height);
            finalized_here = matches!(result, Ok(Applied::Finalized(_)));
            let outcome = match result {
                Ok(_) => TxOutcome::Accepted,
                Err(r) => TxOutcome::Rejected(r),
            };
            if outcome != rec.outcome {
                return Err(format!(
                    "tx {i} ({}) recorded as {:?}, replay gives {:?}",
                    rec.tx.body.kind(),
                    rec.outcome,
                    outcome
                ));
            }
        }
        self.push_block(block.clone());
        Ok(())
    }
}

impl BlockProducer for Ledger {
    fn submit_tx(&mut self, tx: Tx) -> Result<TxReceipt, LedgerReject> {
        Ledger::submit_tx(self, tx)
    }

    fn seal_block(&mut self) -> &Block {
        Ledger::seal_block(self)
    }
}

impl ModelHashSource for Ledger {
    fn finalized_model_hash(&self, round_t: u64) -> Result<Digest, ProtocolError> {
        self.model_hash(round_t)
            .map_err(|_| ProtocolError::RoundNotFinalized(round_t))
    }
}
