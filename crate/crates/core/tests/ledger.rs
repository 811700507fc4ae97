use zkfl_core::crypto::{Digest, KeyPair};
use zkfl_core::encoding::QuantizedUpdate;
use zkfl_core::ledger::{
    audit_chain, measure_throughput, read_chain, scan_for_secrets, write_frame, Block, FindingKind, LedgerError,
    LedgerReject, Secret, ThroughputWorkload, Tx, TxBody, TxOutcome,
};
use zkfl_core::protocol::{submission_message, ClientIdentity, ClientSubmission};
use zkfl_core::session::{Federation, FederationConfig, OperatorOutput, RoundInterceptor, TrafficContext};

fn tiny(seed: u64) -> FederationConfig {
    let mut cfg = FederationConfig {
        seed,
        ..FederationConfig::default()
    };
    cfg.sites.num_clients = 3;
    cfg.sites.per_site = 24;
    cfg.sites.feature_dim = 3;
    cfg.sites.holdout = 40;
    cfg.policy.quorum = 2;
    cfg
}

fn federation(seed: u64, rounds: usize) -> Federation {
    let mut fed = Federation::new(tiny(seed)).unwrap();
    for _ in 0..rounds {
        fed.run_honest_round().unwrap();
    }
    fed
}

/// `(start, end)` byte ranges of each block frame.
fn frame_ranges(chain: &[u8]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < chain.len() {
        let len = u32::from_le_bytes(chain[pos..pos + 4].try_into().unwrap()) as usize;
        out.push((pos, pos + 4 + len));
        pos += 4 + len;
    }
    out
}

#[test]
fn register_identity_once() {
    let mut fed = federation(1, 0);
    let mut fresh = ClientIdentity::new(fed.policy().hash, KeyPair::from_seed(b"fresh"));
    assert_eq!(fed.register_identity(&mut fresh, "new site"), Ok(()));
    assert!(fresh.registered);
    assert_eq!(
        fed.register_identity(&mut fresh, "again"),
        Err(LedgerReject::AlreadyRegistered)
    );
    let mut existing = fed.identities()[0].clone();
    assert_eq!(
        fed.register_identity(&mut existing, "dup"),
        Err(LedgerReject::AlreadyRegistered)
    );
}

#[test]
fn registration_needs_the_authority() {
    let mut fed = federation(2, 0);
    let rogue = KeyPair::from_seed(b"rogue");
    let body = TxBody::RegisterIdentity {
        public_key: rogue.public(),
        metadata: String::new(),
    };
    let before = fed.ledger().registry().len();
    let mut ledger = fed.ledger().clone();
    assert_eq!(
        ledger.submit_tx(Tx::sign(fed.policy().hash, &rogue, body)),
        Err(LedgerReject::BadSignature)
    );
    assert_eq!(ledger.registry().len(), before);
    fed.seal_block();
}

/// Replays a round-1 post in round 2: verbatim, and re-signed over the new header.
struct Replay {
    previous: Vec<(Tx, ClientSubmission)>,
    keys: Vec<ClientIdentity>,
}

impl RoundInterceptor for Replay {
    fn client_traffic(&mut self, ctx: &mut TrafficContext<'_>) {
        if ctx.header.round_t == 1 {
            self.previous = ctx.outgoing.iter().map(|o| (o.post.clone(), o.submission.clone())).collect();
            return;
        }
        let alg = ctx.policy.hash;
        let (old_post, old_sub) = self.previous[0].clone();
        let id = &self.keys[0];
        let resigned = Tx::sign(
            alg,
            id.keypair(),
            TxBody::PostCommitment {
                client_id: old_sub.client_id,
                round_t: ctx.header.round_t,
                anchor: old_sub.anchor,
                submission_signature: id.keypair().sign(alg, &submission_message(ctx.header, &old_sub.anchor)),
            },
        );
        // Ahead of the honest post, so first-submission-wins cannot hide it.
        for post in [resigned, old_post] {
            ctx.outgoing.insert(
                0,
                zkfl_core::session::Outgoing {
                    site: None,
                    post,
                    submission: old_sub.clone(),
                },
            );
        }
    }
}

#[test]
fn replayed_anchor_is_stale() {
    let mut fed = federation(3, 0);
    let mut hooks = Replay {
        previous: Vec::new(),
        keys: fed.identities().to_vec(),
    };
    fed.run_round(&mut hooks).unwrap();
    let record = fed.run_round(&mut hooks).unwrap();
    use zkfl_core::session::DetectionLayer;
    let stale = |layer| {
        record
            .events
            .iter()
            .filter(|e| e.layer == layer && e.reason == LedgerReject::StaleRound.code())
            .count()
    };
    assert_eq!(record.events.len(), 4, "{:?}", record.events);
    assert_eq!(stale(DetectionLayer::ContractVerify), 2);
    assert_eq!(stale(DetectionLayer::EnclaveIngest), 2);
    // The honest round-2 post still landed: the replays were rejected, not the client.
    assert_eq!(record.participants, 3);
}

struct DropAtIngress(Digest);

impl RoundInterceptor for DropAtIngress {
    fn operator_ingress(&mut self, _: u64, sub: &ClientSubmission) -> bool {
        sub.client_id != self.0
    }
}

#[test]
fn exclusion_is_an_anchor_mismatch_and_round_stays_open() {
    let mut fed = federation(4, 1);
    let victim = fed.identities()[1].client_id;
    let failed = fed.run_round(&mut DropAtIngress(victim)).unwrap_err();
    assert_eq!(
        failed.events.last().unwrap().reason,
        LedgerReject::AnchorMismatch.code()
    );
    assert_eq!(fed.ledger().open_round().unwrap().round_t, 2);
    let tip = fed.ledger().tip();
    let last = tip.txs.last().unwrap();
    assert!(matches!(last.tx.body, TxBody::FinalizeRound { .. }));
    assert_eq!(last.outcome, TxOutcome::Rejected(LedgerReject::AnchorMismatch));
}

#[test]
fn read_state_views() {
    let fed = federation(5, 2);
    let ledger = fed.ledger();
    let rec = ledger.finalized(2).unwrap();
    assert_eq!(ledger.model_hash(2).unwrap(), rec.model_hash);
    assert_eq!(ledger.model_hash(2).unwrap(), fed.global().hash(fed.policy().hash));
    assert_eq!(ledger.model_hash(3), Err(LedgerError::UnknownRound(3)));
    assert_eq!(ledger.open_round().unwrap().round_t, 3);
    let anchors = ledger.commitments(1).unwrap();
    assert_eq!(anchors.len(), 3);
    assert!(anchors.windows(2).all(|w| w[0].0 < w[1].0));
    assert!(ledger.commitments(9).is_err());
}

#[test]
fn finalized_rounds_are_append_only() {
    let mut fed = federation(6, 2);
    let snapshot = fed.ledger().finalized(1).unwrap().clone();
    let prefix = fed.ledger().chain_bytes();
    for _ in 0..3 {
        fed.run_honest_round().unwrap();
    }
    assert_eq!(fed.ledger().finalized(1).unwrap(), &snapshot);
    assert!(fed.ledger().chain_bytes().starts_with(&prefix));
}

#[test]
fn replay_is_deterministic() {
    let a = federation(7, 3).ledger().chain_bytes();
    let b = federation(7, 3).ledger().chain_bytes();
    assert_eq!(a, b);
    assert_ne!(a, federation(8, 3).ledger().chain_bytes());
}

/// Sybil posts from identities outside the registry.
struct Sybil(Vec<ClientIdentity>);

impl RoundInterceptor for Sybil {
    fn client_traffic(&mut self, ctx: &mut TrafficContext<'_>) {
        let d = ctx.policy.dimension();
        let q = QuantizedUpdate {
            values: vec![1000; d],
            config_id: ctx.policy.fixed_point.id(),
            round: ctx.header.round_t,
        };
        for id in &self.0 {
            let o = ctx.craft(id, &q, 10);
            ctx.outgoing.push(o);
        }
    }
}

#[test]
fn unregistered_identities_never_mutate_state() {
    let mut fed = federation(9, 0);
    let alg = fed.policy().hash;
    let sybils: Vec<ClientIdentity> = (0..3u8)
        .map(|i| ClientIdentity::new(alg, KeyPair::from_seed(&[b's', i])))
        .collect();
    let record = fed.run_round(&mut Sybil(sybils.clone())).unwrap();
    let unknown = record.events.iter().filter(|e| e.reason == "unknown-identity").count();
    assert_eq!(unknown, 3);
    let anchors = fed.ledger().commitments(1).unwrap();
    assert_eq!(anchors.len(), 3);
    assert!(sybils.iter().all(|s| anchors.iter().all(|(c, _)| *c != s.client_id)));
    assert_eq!(record.participants, 3);
}

#[test]
fn mid_round_registration_gates_the_next_round() {
    let mut fed = federation(10, 0);
    let alg = fed.policy().hash;
    let mut late = ClientIdentity::new(alg, KeyPair::from_seed(b"late"));
    fed.register_identity(&mut late, "late").unwrap();
    let record = fed.run_round(&mut Sybil(vec![late.clone()])).unwrap();
    assert!(record.events.iter().any(|e| e.reason == "unknown-identity"));
    let record = fed.run_round(&mut Sybil(vec![late])).unwrap();
    assert!(record.events.iter().all(|e| e.reason != "unknown-identity"));
}

#[test]
fn honest_chain_audits_clean() {
    let fed = federation(11, 10);
    let report = audit_chain(&fed.ledger().chain_bytes(), fed.genesis());
    assert!(report.chain_valid, "{:?}", report.findings);
    assert!(report.findings.is_empty());
    assert_eq!(report.rounds_finalized, 10);
    assert_eq!(report.rounds.len(), 10);
    assert!(report
        .rounds
        .iter()
        .all(|r| r.accepted && r.proof_reverified && r.commitment_set_hash_match && r.registry_gating_respected));
    assert_eq!(report.blocks_checked as usize, fed.ledger().blocks().len());
}

#[test]
fn flipped_byte_in_block_four_is_located() {
    let fed = federation(12, 3);
    let chain = fed.ledger().chain_bytes();
    let (start, end) = frame_ranges(&chain)[4];
    let blocks = read_chain(&chain).unwrap();
    assert!(!blocks[4].txs.is_empty());
    // Somewhere inside the tx list, away from the frame header.
    let mut bad = chain.clone();
    bad[start + 4 + 8 + 32 + 8 + 40] ^= 0x01;
    assert!(start + 4 + 8 + 32 + 8 + 40 < end);
    let report = audit_chain(&bad, fed.genesis());
    assert!(!report.chain_valid);
    assert_eq!(report.first_bad_height, Some(4));
}

#[test]
fn strided_byte_flips_are_all_located() {
    let fed = federation(13, 2);
    let chain = fed.ledger().chain_bytes();
    let ranges = frame_ranges(&chain);
    for i in (0..chain.len()).step_by(37) {
        let mut bad = chain.clone();
        bad[i] ^= 0x80;
        let expected = ranges.iter().position(|&(s, e)| s <= i && i < e).unwrap() as u64;
        let report = audit_chain(&bad, fed.genesis());
        assert!(!report.chain_valid, "flip at {i} not detected");
        assert_eq!(report.first_bad_height, Some(expected), "flip at {i}");
        assert!(!report.findings.is_empty());
    }
}

#[test]
fn truncated_chain_is_malformed() {
    let fed = federation(14, 2);
    let chain = fed.ledger().chain_bytes();
    let report = audit_chain(&chain[..chain.len() - 3], fed.genesis());
    assert!(!report.chain_valid);
    assert_eq!(report.findings[0].kind, FindingKind::Malformed);
    assert_eq!(report.first_bad_height, Some(fed.ledger().height()));
    assert!(!audit_chain(&[], fed.genesis()).chain_valid);
    assert!(!audit_chain(&[0xff; 7], fed.genesis()).chain_valid);
}

#[test]
fn spliced_proof_from_another_round_is_flagged() {
    let fed = federation(15, 3);
    let alg = fed.policy().hash;
    let mut blocks = read_chain(&fed.ledger().chain_bytes()).unwrap();
    let finalize_at = |blocks: &[Block], round: u64| {
        blocks
            .iter()
            .position(|b| {
                b.txs.iter().any(|r| {
                    matches!(&r.tx.body, TxBody::FinalizeRound { statement, .. } if statement.header.round_t == round)
                        && r.outcome == TxOutcome::Accepted
                })
            })
            .unwrap()
    };
    let (h2, h3) = (finalize_at(&blocks, 2), finalize_at(&blocks, 3));
    let TxBody::FinalizeRound { proof: donor, .. } = blocks[h2].txs.last().unwrap().tx.body.clone() else {
        unreachable!()
    };
    // A fully re-signed, re-hashed forgery: only the proof binding can catch it.
    let rec = blocks[h3].txs.last_mut().unwrap();
    let TxBody::FinalizeRound { proof, .. } = &mut rec.tx.body else { unreachable!() };
    *proof = donor;
    rec.tx = Tx::sign(alg, fed.operator_key(), rec.tx.body.clone());
    for h in h3..blocks.len() {
        let prev = blocks[h - 1].block_hash;
        let b = &blocks[h];
        blocks[h] = Block::seal(alg, b.height, prev, b.timestamp, b.txs.clone());
    }
    let mut forged = Vec::new();
    for b in &blocks {
        write_frame(&mut forged, b);
    }
    let report = audit_chain(&forged, fed.genesis());
    assert!(!report.chain_valid);
    assert_eq!(report.first_bad_height, Some(h3 as u64));
    assert_eq!(report.findings[0].kind, FindingKind::Replay);
    let r3 = report.rounds.iter().find(|r| r.round_t == 3).unwrap();
    assert!(!r3.proof_reverified && !r3.accepted);
}

struct TamperDelta;

impl RoundInterceptor for TamperDelta {
    fn operator_output(&mut self, _: u64, out: &mut OperatorOutput, _: &KeyPair) {
        out.statement.aggregate[0] += 1;
    }
}

#[test]
fn rejected_finalization_is_logged_and_audits_clean() {
    let mut fed = federation(16, 1);
    let failed = fed.run_round(&mut TamperDelta).unwrap_err();
    assert_eq!(failed.events.last().unwrap().reason, "proof-invalid");
    let report = audit_chain(&fed.ledger().chain_bytes(), fed.genesis());
    assert!(report.chain_valid);
    let r2 = report.rounds.iter().find(|r| r.round_t == 2).unwrap();
    assert!(!r2.accepted && !r2.proof_reverified);
    assert_eq!(fed.ledger().open_round().unwrap().round_t, 2);
    let halted = fed.run_honest_round().unwrap_err();
    assert_eq!(halted.failure, zkfl_core::session::RoundFailure::Halted(2));
}

#[test]
fn chain_holds_no_updates_models_or_blindings() {
    let mut fed = Federation::new(tiny(17)).unwrap();
    fed.retain_openings(true);
    let mut models = vec![fed.global().clone()];
    for _ in 0..4 {
        fed.run_honest_round().unwrap();
        models.push(fed.global().clone());
    }
    let mut secrets = Vec::new();
    for (t, c, o) in fed.openings() {
        secrets.push(Secret::update(format!("update {t}/{c}"), &o.update));
        secrets.push(Secret::blinding(format!("blinding {t}/{c}"), &o.blinding));
    }
    for (t, m) in models.iter().enumerate().skip(1) {
        secrets.push(Secret::model(format!("model {t}"), m));
    }
    assert_eq!(fed.openings().len(), 12);
    let leaks = scan_for_secrets(&fed.ledger().chain_bytes(), &secrets);
    assert!(leaks.is_empty(), "{leaks:?}");
}

#[test]
fn throughput_measurement() {
    let empty = measure_throughput(&ThroughputWorkload {
        posts: 0,
        block_interval: 3,
        seed: 1,
    });
    assert_eq!((empty.txs, empty.tps), (0, 0.0));
    let r = measure_throughput(&ThroughputWorkload {
        posts: 200,
        block_interval: 3,
        seed: 1,
    });
    assert_eq!(r.txs, 200);
    assert!(r.tps > 0.0);
    assert_eq!(r.finality_ticks, 3);
}
