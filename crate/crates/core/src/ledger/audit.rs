//! Offline replay of a persisted chain against its genesis configuration.

use serde::{Deserialize, Serialize};

use crate::wire::Decode;

use super::block::Block;
use super::chain::Ledger;
use super::genesis::GenesisConfig;
use super::tx::TxBody;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FindingKind {
    /// Bytes that do not parse as a chain of blocks.
    Malformed,
    /// Broken height, parent link, timestamp or block hash.
    Link,
    /// A recorded transaction outcome differs from the replayed one.
    Replay,
    InvalidGenesis,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditFinding {
    pub height: u64,
    pub kind: FindingKind,
    pub detail: String,
}

/// Re-derived facts about one finalization attempt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundAudit {
    pub round_t: u64,
    pub height: u64,
    /// Every finalization predicate held on replay.
    pub accepted: bool,
    pub proof_reverified: bool,
    pub commitment_set_hash_match: bool,
    pub registry_gating_respected: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub chain_valid: bool,
    pub first_bad_height: Option<u64>,
    pub blocks_checked: u64,
    pub rounds_finalized: u64,
    pub findings: Vec<AuditFinding>,
    pub rounds: Vec<RoundAudit>,
}

impl AuditReport {
    fn fail(mut self, height: u64, kind: FindingKind, detail: String) -> Self {
        self.chain_valid = false;
        self.first_bad_height = Some(height);
        self.findings.push(AuditFinding { height, kind, detail });
        self
    }
}

/// Splits a chain file into frames; stops at the first malformed frame.
fn parse_frames(bytes: &[u8]) -> (Vec<Block>, Option<String>) {
    let mut blocks = Vec::new();
    let mut pos = 0usize;
    while pos < bytes.len() {
        let Some(len_bytes) = bytes.get(pos..pos + 4) else {
            return (blocks, Some("truncated length prefix".into()));
        };
        let len = u32::from_le_bytes(len_bytes.try_into().expect("4 bytes")) as usize;
        pos += 4;
        let Some(body) = bytes.get(pos..pos.saturating_add(len)) else {
            return (blocks, Some(format!("frame of {len} bytes runs past end of file")));
        };
        match Block::from_bytes(body) {
            Ok(b) => blocks.push(b),
            Err(e) => return (blocks, Some(format!("undecodable block: {e}"))),
        }
        pos += len;
    }
    (blocks, None)
}

/// Parses a chain file into blocks without checking links or contents.
pub fn read_chain(bytes: &[u8]) -> Result<Vec<Block>, String> {
    match parse_frames(bytes) {
        (blocks, None) => Ok(blocks),
        (_, Some(e)) => Err(e),
    }
}

/// Total over arbitrary input: never panics, reports the first bad height.
pub fn audit_chain(chain: &[u8], genesis: &GenesisConfig) -> AuditReport {
    let report = AuditReport {
        chain_valid: true,
        first_bad_height: None,
        blocks_checked: 0,
        rounds_finalized: 0,
        findings: Vec::new(),
        rounds: Vec::new(),
    };
    let mut ledger = match Ledger::new(genesis.clone()) {
        Ok(l) => l,
        Err(e) => return report.fail(0, FindingKind::InvalidGenesis, e.to_string()),
    };
    let (blocks, parse_error) = parse_frames(chain);
    audit_blocks(report, &mut ledger, &blocks, parse_error)
}

fn audit_blocks(mut report: AuditReport, ledger: &mut Ledger, blocks: &[Block], parse_error: Option<String>) -> AuditReport {
    let alg = ledger.genesis().policy.hash;
    let Some(first) = blocks.first() else {
        let detail = parse_error.unwrap_or_else(|| "empty chain".into());
        return report.fail(0, FindingKind::Malformed, detail);
    };
    if *first != Block::genesis(alg) {
        return report.fail(0, FindingKind::Link, "genesis block differs from the canonical genesis".into());
    }
    report.blocks_checked = 1;
    // Cheap structural pass first so the replay can stop at the first broken link.
    let mut structural_bad = None;
    for (i, pair) in blocks.windows(2).enumerate() {
        let (parent, b) = (&pair[0], &pair[1]);
        if b.height != parent.height + 1 || b.prev_hash != parent.block_hash || b.compute_hash(alg) != b.block_hash {
            structural_bad = Some(i + 1);
            break;
        }
    }
    let replay_until = structural_bad.unwrap_or(blocks.len());
    for block in &blocks[1..replay_until] {
        let mut rounds = Vec::new();
        let result = ledger.replay_block(block, |contract, tx| {
            if let TxBody::FinalizeRound { statement, .. } = &tx.body {
                let c = contract.finalize_checks(tx);
                rounds.push(RoundAudit {
                    round_t: statement.header.round_t,
                    height: block.height,
                    accepted: c.first_failure().is_none(),
                    proof_reverified: c.proof,
                    commitment_set_hash_match: c.commitment_set,
                    registry_gating_respected: c.registry_gating,
                });
            }
        });
        report.rounds.extend(rounds);
        if let Err(detail) = result {
            return report.fail(block.height, FindingKind::Replay, detail);
        }
        report.blocks_checked += 1;
    }
    if let Some(i) = structural_bad {
        return report.fail(i as u64, FindingKind::Link, "height, parent link or block hash is broken".into());
    }
    if let Some(detail) = parse_error {
        return report.fail(blocks.len() as u64, FindingKind::Malformed, detail);
    }
    report.rounds_finalized = ledger.contract().finalized_rounds().count() as u64;
    report
}
