//! Scripted deviations at each trust boundary, run against the full stack.
//!
//! Each scenario builds an honest federation, runs an honest warm-up round,
//! injects one deviation through a [`RoundInterceptor`], and then runs an
//! honest follow-up round when the attack round still finalized. A report
//! counts as a detection only if the designated layer fired with an
//! expected reason and the evidence re-confirms from the persisted chain.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{Digest, KeyPair, PedersenParams, Scalar};
use crate::encoding::{encode_to_scalars, QuantizedUpdate};
use crate::fl::ModelParams;
use crate::ledger::{audit_chain, read_chain, GenesisConfig, TxBody, TxOutcome};
use crate::protocol::{AggregationProof, ClientIdentity, ClientSubmission, Participant};
use crate::session::{
    ConfigError, DetectionEvent, DetectionLayer, Federation, FederationConfig, OperatorOutput, Outgoing,
    RoundInterceptor, TrafficContext,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioName {
    TamperDelta,
    ExcludeClient,
    InjectFabricated,
    ReplayUpdate,
    SybilUnregistered,
    DuplicateSubmission,
    NormPoison,
    EquivocateModel,
    LedgerMutation,
    /// Control: a poisoned update inside the norm bound. Must go undetected.
    SemanticPoison,
    /// Control: no deviation at all.
    HonestBaseline,
}

impl ScenarioName {
    /// The threat matrix: every one of these must be detected.
    pub const REQUIRED: [ScenarioName; 9] = [
        ScenarioName::TamperDelta,
        ScenarioName::ExcludeClient,
        ScenarioName::InjectFabricated,
        ScenarioName::ReplayUpdate,
        ScenarioName::SybilUnregistered,
        ScenarioName::DuplicateSubmission,
        ScenarioName::NormPoison,
        ScenarioName::EquivocateModel,
        ScenarioName::LedgerMutation,
    ];

    pub const CONTROLS: [ScenarioName; 2] = [ScenarioName::SemanticPoison, ScenarioName::HonestBaseline];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioName::TamperDelta => "tamper-delta",
            ScenarioName::ExcludeClient => "exclude-client",
            ScenarioName::InjectFabricated => "inject-fabricated",
            ScenarioName::ReplayUpdate => "replay-update",
            ScenarioName::SybilUnregistered => "sybil-unregistered",
            ScenarioName::DuplicateSubmission => "duplicate-submission",
            ScenarioName::NormPoison => "norm-poison",
            ScenarioName::EquivocateModel => "equivocate-model",
            ScenarioName::LedgerMutation => "ledger-mutation",
            ScenarioName::SemanticPoison => "semantic-poison",
            ScenarioName::HonestBaseline => "honest-baseline",
        }
    }

    /// Where the deviation enters the system.
    pub fn boundary(self) -> &'static str {
        match self {
            ScenarioName::TamperDelta | ScenarioName::InjectFabricated => "operator-output",
            ScenarioName::ExcludeClient => "operator-ingress",
            ScenarioName::EquivocateModel => "operator-distribution",
            ScenarioName::LedgerMutation => "persisted-chain",
            ScenarioName::ReplayUpdate
            | ScenarioName::SybilUnregistered
            | ScenarioName::DuplicateSubmission
            | ScenarioName::NormPoison
            | ScenarioName::SemanticPoison => "client-traffic",
            ScenarioName::HonestBaseline => "none",
        }
    }

    /// The layer that must catch it and the reason codes it may report;
    /// `None` for the controls, which must not be detected.
    pub fn expectation(self) -> Option<(DetectionLayer, &'static [&'static str])> {
        use DetectionLayer::*;
        match self {
            ScenarioName::TamperDelta => Some((ContractVerify, &["proof-invalid"])),
            ScenarioName::ExcludeClient => Some((ContractVerify, &["anchor-mismatch"])),
            // Anchor-mismatch when the fabricated participant is a registered
            // identity; proof-invalid when it is not or the proof cannot be patched.
            ScenarioName::InjectFabricated => Some((ContractVerify, &["anchor-mismatch", "proof-invalid"])),
            ScenarioName::ReplayUpdate => Some((ContractVerify, &["stale-round"])),
            ScenarioName::SybilUnregistered => Some((ContractVerify, &["unknown-identity"])),
            ScenarioName::DuplicateSubmission => Some((ContractVerify, &["duplicate-commitment"])),
            ScenarioName::NormPoison => Some((EnclaveIngest, &["norm-exceeded"])),
            ScenarioName::EquivocateModel => Some((ClientDistributionCheck, &["model-hash-mismatch"])),
            ScenarioName::LedgerMutation => Some((Auditor, &["link", "replay", "malformed", "invalid-genesis"])),
            ScenarioName::SemanticPoison | ScenarioName::HonestBaseline => None,
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

impl FromStr for ScenarioName {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScenarioName::REQUIRED
            .iter()
            .chain(&ScenarioName::CONTROLS)
            .copied()
            .find(|n| n.name() == s)
            .ok_or_else(|| HarnessError::UnknownScenario(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioParams {
    /// The site that misbehaves or is targeted.
    pub target_site: usize,
    pub sybil_count: usize,
    /// Semantic poison is scaled to this fraction of the norm bound.
    pub poison_fraction: f64,
    /// Norm poison is scaled to this multiple of the norm bound.
    pub norm_multiple: f64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            target_site: 0,
            sybil_count: 5,
            poison_fraction: 0.9,
            norm_multiple: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackScenario {
    pub name: ScenarioName,
    #[serde(default)]
    pub params: ScenarioParams,
    pub rng_seed: u64,
}

impl AttackScenario {
    pub fn new(name: ScenarioName, rng_seed: u64) -> Self {
        Self {
            name,
            params: ScenarioParams::default(),
            rng_seed,
        }
    }
}

/// What the detecting component reported, enough to re-check from the chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub reason: String,
    pub round_t: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub client_id: Option<Digest>,
    /// Model hash a client received, for distribution-check findings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed_model_hash: Option<Digest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub scenario: ScenarioName,
    pub rng_seed: u64,
    pub detected: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detecting_layer: Option<DetectionLayer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence: Option<Evidence>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_layer: Option<DetectionLayer>,
    /// An auditor re-run over the persisted chain confirms the evidence.
    pub reconfirmed: bool,
    /// The honest rounds around the attack produced no detections.
    pub honest_rounds_clean: bool,
    /// Every event observed, including secondary layers.
    pub events: Vec<DetectionEvent>,
}

impl DetectionReport {
    /// Detected at the designated layer with re-confirmed evidence, or,
    /// for a control, not detected at all.
    pub fn as_expected(&self) -> bool {
        let clean = self.honest_rounds_clean;
        match self.scenario.expectation() {
            Some((layer, _)) => clean && self.detected && self.detecting_layer == Some(layer) && self.reconfirmed,
            None => clean && !self.detected,
        }
    }
}

/// Chain and genesis a report's evidence refers to.
#[derive(Debug, Clone)]
pub struct ScenarioArtifacts {
    pub chain: Vec<u8>,
    pub genesis: GenesisConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessOptions {
    /// Layers whose findings are ignored. Only for harness self-tests: a
    /// suite with a required layer disabled must fail.
    pub disabled_layers: Vec<DetectionLayer>,
}

struct Adversary {
    scenario: ScenarioName,
    params: ScenarioParams,
    attack_round: u64,
    rng: ChaCha20Rng,
    pedersen: Arc<PedersenParams>,
    norm_bound: f64,
    sites: Vec<ClientIdentity>,
    idle: Option<ClientIdentity>,
    previous: Vec<Outgoing>,
    equivocated: Option<Digest>,
}

impl Adversary {
    fn target(&self) -> usize {
        self.params.target_site.min(self.sites.len() - 1)
    }

    /// Rescales `update` to L2 norm `norm`, keeping its direction (the
    /// all-ones direction for a zero update), optionally flipped.
    fn rescale(update: &mut [f64], norm: f64, flip: bool) {
        if update.iter().all(|x| *x == 0.0) {
            update.iter_mut().for_each(|x| *x = 1.0);
        }
        let current = update.iter().map(|x| x * x).sum::<f64>().sqrt();
        let k = if flip { -norm / current } else { norm / current };
        update.iter_mut().for_each(|x| *x *= k);
    }

    /// Adds a participant the enclave never saw. With the transparent
    /// backend the opened blinding is patched too, so the proof itself
    /// still checks and only the on-chain anchor set can catch it.
    fn inject(&mut self, out: &mut OperatorOutput) {
        let st = &mut out.statement;
        let weight = 1 + self.rng.gen_range(0..100u64);
        let values: Vec<i64> = (0..st.aggregate.len()).map(|_| self.rng.gen_range(-1000..=1000)).collect();
        let blinding = Scalar::random(&mut self.rng);
        let commitment = self
            .pedersen
            .commit(&encode_to_scalars(&values), &blinding)
            .expect("statement dimension matches the parameters");
        let client_id = match &self.idle {
            Some(id) => id.client_id,
            None => Digest(self.rng.gen()),
        };
        for (a, v) in st.aggregate.iter_mut().zip(&values) {
            *a += weight as i64 * v;
        }
        let w = Scalar::from_u64(weight);
        st.aggregate_commitment = st.aggregate_commitment + commitment * w;
        st.total_weight += weight;
        st.participants.push(Participant {
            client_id,
            commitment,
            weight,
        });
        st.canonicalize();
        if let AggregationProof::Transparent { r_agg } = &mut out.proof {
            *r_agg += w * blinding;
        }
    }
}

impl RoundInterceptor for Adversary {
    fn tamper_update(&mut self, round_t: u64, site: usize, update: &mut Vec<f64>) {
        if round_t != self.attack_round || site != self.target() {
            return;
        }
        match self.scenario {
            ScenarioName::NormPoison => Self::rescale(update, self.params.norm_multiple * self.norm_bound, false),
            ScenarioName::SemanticPoison => Self::rescale(update, self.params.poison_fraction * self.norm_bound, true),
            _ => {}
        }
    }

    fn client_traffic(&mut self, ctx: &mut TrafficContext<'_>) {
        let round_t = ctx.header.round_t;
        if round_t + 1 == self.attack_round {
            self.previous = ctx.outgoing.clone();
        }
        if round_t != self.attack_round {
            return;
        }
        let target = self.target();
        match self.scenario {
            ScenarioName::ReplayUpdate => {
                // Ahead of the honest traffic, so first-submission-wins cannot mask it.
                if let Some(old) = self.previous.iter().find(|o| o.site == Some(target)).cloned() {
                    ctx.outgoing.insert(0, Outgoing { site: None, ..old });
                }
            }
            ScenarioName::SybilUnregistered => {
                let q = random_update(&mut self.rng, ctx);
                for i in 0..self.params.sybil_count {
                    let seed = [&self.rng.gen::<[u8; 32]>()[..], &(i as u64).to_le_bytes()].concat();
                    let sybil = ClientIdentity::new(ctx.policy.hash, KeyPair::from_seed(&seed));
                    let o = ctx.craft(&sybil, &q, 1 + self.rng.gen_range(0..100));
                    ctx.outgoing.push(o);
                }
            }
            ScenarioName::DuplicateSubmission => {
                let q = random_update(&mut self.rng, ctx);
                let identity = self.sites[target].clone();
                let mut o = ctx.craft(&identity, &q, 1 + self.rng.gen_range(0..100));
                o.site = Some(target);
                ctx.outgoing.push(o);
            }
            _ => {}
        }
    }

    fn operator_ingress(&mut self, round_t: u64, submission: &ClientSubmission) -> bool {
        !(round_t == self.attack_round
            && self.scenario == ScenarioName::ExcludeClient
            && submission.client_id == self.sites[self.target()].client_id)
    }

    fn operator_output(&mut self, round_t: u64, out: &mut OperatorOutput, _operator: &KeyPair) {
        if round_t != self.attack_round {
            return;
        }
        match self.scenario {
            ScenarioName::TamperDelta => {
                let j = self.rng.gen_range(0..out.statement.aggregate.len());
                out.statement.aggregate[j] += 1;
            }
            ScenarioName::InjectFabricated => self.inject(out),
            _ => {}
        }
    }

    fn operator_distribution(&mut self, round_t: u64, site: usize, model: &mut ModelParams) {
        if round_t == self.attack_round && self.scenario == ScenarioName::EquivocateModel && site == self.target() {
            let j = self.rng.gen_range(0..model.weights.len());
            model.weights[j] += 1.0 / 1024.0;
            self.equivocated = Some(model.hash(self.pedersen.hash()));
        }
    }
}

/// A random in-range quantized update for the open round.
fn random_update(rng: &mut ChaCha20Rng, ctx: &TrafficContext<'_>) -> QuantizedUpdate {
    let d = ctx.policy.dimension();
    let per = (ctx.policy.norm_bound as f64 / (d as f64).sqrt() / 2.0).max(1.0) as i64;
    QuantizedUpdate {
        values: (0..d).map(|_| rng.gen_range(-per..=per)).collect(),
        config_id: ctx.policy.fixed_point.id(),
        round: ctx.header.round_t,
    }
}

/// Honest warm-up round, then the attack round, then (if the federation is
/// still live) an honest follow-up round.
const WARMUP_ROUNDS: u64 = 1;

pub fn run_scenario(
    scenario: &AttackScenario,
    cfg: &FederationConfig,
    opts: &HarnessOptions,
) -> Result<(DetectionReport, ScenarioArtifacts), HarnessError> {
    let mut cfg = cfg.clone();
    cfg.seed = scenario.rng_seed;
    let mut fed = Federation::new(cfg.clone())?;
    let attack_round = WARMUP_ROUNDS + 1;
    let mut adv = Adversary {
        scenario: scenario.name,
        params: scenario.params.clone(),
        attack_round,
        rng: ChaCha20Rng::seed_from_u64(scenario.rng_seed ^ 0xa77a_c4ed),
        pedersen: fed.params().clone(),
        norm_bound: cfg.policy.norm_bound,
        sites: fed.identities().to_vec(),
        idle: fed.idle_identities().first().cloned(),
        previous: Vec::new(),
        equivocated: None,
    };
    let mut honest_clean = true;
    let mut attack_events = Vec::new();
    for _ in 0..WARMUP_ROUNDS {
        match fed.run_round(&mut adv) {
            Ok(r) => honest_clean &= r.events.is_empty(),
            Err(_) => honest_clean = false,
        }
    }
    let attack_finalized = match fed.run_round(&mut adv) {
        Ok(r) => {
            attack_events = r.events;
            true
        }
        Err(f) => {
            attack_events.extend(f.events);
            false
        }
    };
    if attack_finalized {
        match fed.run_round(&mut adv) {
            Ok(r) => honest_clean &= r.events.is_empty(),
            Err(_) => honest_clean = false,
        }
    }
    let genesis = fed.genesis().clone();
    let mut chain = fed.ledger().chain_bytes();

    if scenario.name == ScenarioName::LedgerMutation {
        let frames = frame_starts(&chain);
        let block = adv.rng.gen_range(1..frames.len());
        let end = frames.get(block + 1).copied().unwrap_or(chain.len());
        let offset = adv.rng.gen_range(frames[block]..end);
        chain[offset] ^= 1 << adv.rng.gen_range(0..8);
        let report = audit_chain(&chain, &genesis);
        if let Some(f) = report.findings.first() {
            attack_events.push(DetectionEvent {
                round_t: attack_round,
                layer: DetectionLayer::Auditor,
                reason: kind_code(&f.kind).into(),
                client_id: None,
                height: report.first_bad_height,
            });
        }
    }

    let events: Vec<DetectionEvent> = attack_events
        .into_iter()
        .filter(|e| !opts.disabled_layers.contains(&e.layer))
        .collect();
    let expectation = scenario.name.expectation();
    let designated = expectation.and_then(|(layer, reasons)| {
        events
            .iter()
            .find(|e| e.layer == layer && reasons.contains(&e.reason.as_str()))
    });
    let primary = designated.or(events.first());
    let evidence = primary.map(|e| Evidence {
        reason: e.reason.clone(),
        round_t: e.round_t,
        height: e.height,
        client_id: e.client_id,
        observed_model_hash: (e.layer == DetectionLayer::ClientDistributionCheck)
            .then_some(adv.equivocated)
            .flatten(),
    });
    let reconfirmed = match (primary, &evidence) {
        (Some(e), Some(ev)) => reconfirm(e.layer, ev, &chain, &genesis),
        _ => false,
    };
    let report = DetectionReport {
        scenario: scenario.name,
        rng_seed: scenario.rng_seed,
        detected: !events.is_empty(),
        detecting_layer: primary.map(|e| e.layer),
        evidence,
        expected_layer: expectation.map(|(l, _)| l),
        reconfirmed,
        honest_rounds_clean: honest_clean,
        events,
    };
    Ok((report, ScenarioArtifacts { chain, genesis }))
}

fn kind_code(kind: &crate::ledger::FindingKind) -> &'static str {
    use crate::ledger::FindingKind::*;
    match kind {
        Malformed => "malformed",
        Link => "link",
        Replay => "replay",
        InvalidGenesis => "invalid-genesis",
    }
}

fn frame_starts(chain: &[u8]) -> Vec<usize> {
    let mut starts = Vec::new();
    let mut pos = 0;
    while pos + 4 <= chain.len() {
        starts.push(pos);
        pos += 4 + u32::from_le_bytes(chain[pos..pos + 4].try_into().expect("4 bytes")) as usize;
    }
    starts
}

/// Re-derives a finding from persisted bytes alone.
pub fn reconfirm(layer: DetectionLayer, ev: &Evidence, chain: &[u8], genesis: &GenesisConfig) -> bool {
    let audit = audit_chain(chain, genesis);
    if layer == DetectionLayer::Auditor {
        return !audit.chain_valid && audit.first_bad_height == ev.height;
    }
    // Every other layer's evidence must sit on a chain the auditor accepts,
    // so the recorded outcomes are the replayed ones.
    if !audit.chain_valid {
        return false;
    }
    let Ok(blocks) = read_chain(chain) else { return false };
    let alg = genesis.policy.hash;
    match layer {
        DetectionLayer::ContractVerify => ev.height.and_then(|h| blocks.get(h as usize)).is_some_and(|b| {
            b.txs.iter().any(|r| {
                matches!(r.outcome, TxOutcome::Rejected(reason) if reason.code() == ev.reason)
                    && match (&r.tx.body, ev.client_id) {
                        (TxBody::PostCommitment { client_id, .. }, Some(c)) => *client_id == c,
                        (TxBody::FinalizeRound { statement, .. }, None) => statement.header.round_t == ev.round_t,
                        _ => false,
                    }
            })
        }),
        DetectionLayer::EnclaveIngest => blocks.iter().flat_map(|b| &b.txs).any(|r| match &r.tx.body {
            TxBody::FinalizeRound { receipts, .. } => receipts.iter().any(|rc| {
                rc.round_t == ev.round_t
                    && Some(rc.client_id) == ev.client_id
                    && rc.rejection().is_some_and(|x| x.code() == ev.reason)
                    && rc.verify(alg, &genesis.enclave.attestation_key)
            }),
            _ => false,
        }),
        DetectionLayer::ClientDistributionCheck => blocks.iter().flat_map(|b| &b.txs).any(|r| match &r.tx.body {
            TxBody::FinalizeRound {
                statement, model_hash, ..
            } => {
                r.outcome == TxOutcome::Accepted
                    && statement.header.round_t == ev.round_t
                    && ev.observed_model_hash.is_some_and(|seen| seen != *model_hash)
            }
            _ => false,
        }),
        DetectionLayer::Auditor => unreachable!("handled above"),
    }
}

/// Whether the enclave accepts an update whose squared norm is exactly the
/// bound, and rejects one just above it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryProbe {
    pub norm_bound_squared: u128,
    pub at_bound_accepted: bool,
    pub above_bound_rejected: bool,
}

struct Boundary {
    sites: Vec<ClientIdentity>,
    at: Option<Digest>,
    above: Option<Digest>,
}

impl RoundInterceptor for Boundary {
    fn client_traffic(&mut self, ctx: &mut TrafficContext<'_>) {
        let b = ctx.policy.norm_bound as i64;
        let d = ctx.policy.dimension();
        let mut exact = vec![0i64; d];
        exact[0] = b;
        let mut over = exact.clone();
        over[1 % d] += 1;
        let cfg_id = ctx.policy.fixed_point.id();
        for (slot, values) in [(0usize, exact), (1, over)] {
            let q = QuantizedUpdate {
                values,
                config_id: cfg_id,
                round: ctx.header.round_t,
            };
            let identity = self.sites[slot].clone();
            let mut o = ctx.craft(&identity, &q, 1);
            o.site = Some(slot);
            if let Some(pos) = ctx.outgoing.iter().position(|x| x.site == Some(slot)) {
                ctx.outgoing[pos] = o;
            }
            if slot == 0 {
                self.at = Some(identity.client_id);
            } else {
                self.above = Some(identity.client_id);
            }
        }
    }
}

/// Probes the norm check at `B²` and `B² + 1` through the full stack.
/// Needs two sites, `d ≥ 2` and `B` within the per-coordinate clamp.
pub fn norm_boundary_probe(cfg: &FederationConfig) -> Result<BoundaryProbe, HarnessError> {
    let mut fed = Federation::new(cfg.clone())?;
    let policy = fed.policy().clone();
    let bad = |m: &str| Err(HarnessError::Config(ConfigError::Invalid(m.into())));
    if cfg.sites.num_clients < 2 || policy.dimension() < 2 {
        return bad("boundary probe needs two sites and dimension two");
    }
    if policy.norm_bound as i64 > policy.fixed_point.clamp_units() {
        return bad("boundary probe needs the norm bound within the clamp");
    }
    let mut hooks = Boundary {
        sites: fed.identities().to_vec(),
        at: None,
        above: None,
    };
    let events = match fed.run_round(&mut hooks) {
        Ok(r) => r.events,
        Err(f) => f.events,
    };
    let rejected = |c: Option<Digest>| {
        events
            .iter()
            .any(|e| e.layer == DetectionLayer::EnclaveIngest && e.reason == "norm-exceeded" && e.client_id == c)
    };
    Ok(BoundaryProbe {
        norm_bound_squared: policy.norm_bound_squared(),
        at_bound_accepted: !rejected(hooks.at),
        above_bound_rejected: rejected(hooks.above),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub scenarios: Vec<ScenarioName>,
    /// Seeded repetitions per scenario.
    pub repetitions: u64,
    pub base_seed: u64,
    pub params: ScenarioParams,
    pub options: HarnessOptions,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            scenarios: ScenarioName::REQUIRED.to_vec(),
            repetitions: 1,
            base_seed: 1,
            params: ScenarioParams::default(),
            options: HarnessOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub scenario: ScenarioName,
    pub expected_layer: Option<DetectionLayer>,
    pub runs: u64,
    pub detected: u64,
    pub as_expected: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub reports: Vec<DetectionReport>,
    pub summary: Vec<ScenarioSummary>,
    pub boundary: Option<BoundaryProbe>,
    /// Every run of every scenario, controls included, behaved as expected.
    pub complete: bool,
}

impl SuiteReport {
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<22} {:<26} {:>5} {:>9} {:>9}\n",
            "scenario", "expected layer", "runs", "detected", "expected"
        );
        for s in &self.summary {
            let layer = s.expected_layer.map_or("none (control)", |l| l.name());
            out.push_str(&format!(
                "{:<22} {:<26} {:>5} {:>9} {:>9}\n",
                s.scenario.name(),
                layer,
                s.runs,
                s.detected,
                s.as_expected
            ));
        }
        if let Some(b) = &self.boundary {
            out.push_str(&format!(
                "norm boundary: B² accepted = {}, B²+1 rejected = {}\n",
                b.at_bound_accepted, b.above_bound_rejected
            ));
        }
        out.push_str(if self.complete { "suite: complete\n" } else { "suite: INCOMPLETE\n" });
        out
    }
}

/// Runs every configured scenario plus both controls and the boundary probe.
pub fn run_all(cfg: &FederationConfig, suite: &SuiteConfig) -> Result<SuiteReport, HarnessError> {
    let mut names = suite.scenarios.clone();
    for c in ScenarioName::CONTROLS {
        if !names.contains(&c) {
            names.push(c);
        }
    }
    let jobs: Vec<AttackScenario> = names
        .iter()
        .flat_map(|&name| {
            (0..suite.repetitions).map(move |k| AttackScenario {
                name,
                params: suite.params.clone(),
                rng_seed: suite.base_seed.wrapping_add(k),
            })
        })
        .collect();
    let run = || {
        jobs.par_iter()
            .map(|s| run_scenario(s, cfg, &suite.options).map(|(r, _)| r))
            .collect::<Result<Vec<_>, _>>()
    };
    let reports = match cfg.workers {
        0 => run()?,
        n => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(run)?,
    };
    let summary: Vec<ScenarioSummary> = names
        .iter()
        .map(|&name| {
            let mine: Vec<&DetectionReport> = reports.iter().filter(|r| r.scenario == name).collect();
            ScenarioSummary {
                scenario: name,
                expected_layer: name.expectation().map(|(l, _)| l),
                runs: mine.len() as u64,
                detected: mine.iter().filter(|r| r.detected).count() as u64,
                as_expected: mine.iter().filter(|r| r.as_expected()).count() as u64,
            }
        })
        .collect();
    let boundary = norm_boundary_probe(cfg).ok();
    let complete = reports.iter().all(DetectionReport::as_expected)
        && boundary.is_some_and(|b| b.at_bound_accepted && b.above_bound_rejected);
    Ok(SuiteReport {
        reports,
        summary,
        boundary,
        complete,
    })
}
