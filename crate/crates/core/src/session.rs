//! End-to-end verified federation: clients train, commit and seal; the
//! operator relays traffic to the enclave and posts the result; the ledger
//! gates every step; clients check the distributed model against the chain.
//!
//! Every trust boundary the operator or a client controls is exposed as a
//! [`RoundInterceptor`] hook, so adversarial behaviour is injected by
//! wrapping the honest flow rather than by forking it.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{CryptoRng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{Digest, HashAlg, KeyPair, PedersenParams, Scalar};
use crate::encoding::{FixedPointConfig, QuantizedUpdate};
use crate::fl::{
    apply_update, evaluate, fedavg_aggregate, local_train, Dataset, Metrics, Model, ModelKind, ModelParams,
    SyntheticTask, TrainConfig,
};
use crate::ledger::{GenesisConfig, Ledger, LedgerReject, RegistryEntry, Tx, TxBody, GENESIS_SCHEMA_VERSION};
use crate::protocol::{
    check_aggregation, client_prepare_with_opening, client_verify_distribution, submit_quantized, AggregationPolicy,
    AggregationProof, AggregationStatement, Attestation, BackendKind, ClientIdentity, ClientSubmission, Enclave,
    EnclaveError, EnclaveKeys, EnclavePublicInfo, EnclaveReceipt, MockTimings, Opening, RoundHeader,
    SubmissionContext, VerifyContext,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SitesConfig {
    pub num_clients: usize,
    pub per_site: usize,
    /// Input features; the logistic model has `feature_dim + 1` parameters.
    pub feature_dim: usize,
    /// Label-skew strength in `[0, 1]`.
    pub skew: f64,
    pub holdout: usize,
    /// Registered identities that never submit.
    #[serde(default)]
    pub idle_clients: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub local_epochs: u32,
    pub batch_size: usize,
    /// Honest clients clip their delta to this L2 norm before quantizing.
    #[serde(default)]
    pub clip_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    /// L2 bound on a client update, in real units.
    pub norm_bound: f64,
    pub quorum: u32,
    pub max_clients: u64,
    pub max_weight: u64,
    pub round_timeout: u64,
    pub block_interval: u64,
    pub param_seed: String,
    #[serde(default)]
    pub hash: HashAlg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncodingConfig {
    pub fractional_bits: u32,
    pub clamp_magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FederationConfig {
    pub seed: u64,
    pub sites: SitesConfig,
    pub model: ModelKind,
    pub training: TrainingConfig,
    pub policy: PolicyConfig,
    pub encoding: EncodingConfig,
    #[serde(default)]
    pub backend: BackendKind,
    #[serde(default)]
    pub mock_timings: MockTimings,
    /// Threads used for local training; 0 uses the global pool.
    #[serde(default)]
    pub workers: usize,
}

impl Default for FederationConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            sites: SitesConfig {
                num_clients: 8,
                per_site: 200,
                feature_dim: 127,
                skew: 0.3,
                holdout: 2000,
                idle_clients: 0,
            },
            model: ModelKind::Logistic,
            training: TrainingConfig {
                learning_rate: 0.1,
                local_epochs: 1,
                batch_size: 32,
                clip_norm: Some(3.0),
            },
            policy: PolicyConfig {
                norm_bound: 4.0,
                quorum: 4,
                max_clients: 32,
                max_weight: 10_000,
                round_timeout: 8,
                block_interval: 1,
                param_seed: "zkfl-generators".into(),
                hash: HashAlg::Sha256,
            },
            encoding: EncodingConfig {
                fractional_bits: FixedPointConfig::DEFAULT_FRACTIONAL_BITS,
                clamp_magnitude: FixedPointConfig::DEFAULT_CLAMP,
            },
            backend: BackendKind::Transparent,
            mock_timings: MockTimings::default(),
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl FederationConfig {
    pub fn model(&self) -> Model {
        Model {
            kind: self.model,
            features: self.sites.feature_dim,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.training.learning_rate,
            local_epochs: self.training.local_epochs,
            batch_size: self.training.batch_size,
            rng_seed: self.seed,
            clip_norm: self.training.clip_norm,
        }
    }

    /// The aggregation policy this configuration induces. Fails on any
    /// inconsistent field, including the aggregate-safety bound.
    pub fn policy(&self) -> Result<AggregationPolicy, ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        let p = &self.policy;
        let fixed_point = FixedPointConfig {
            fractional_bits: self.encoding.fractional_bits,
            clamp_magnitude: self.encoding.clamp_magnitude,
            dimension: self.model().dimension(),
            max_clients: p.max_clients,
            max_weight: p.max_weight,
            hash: p.hash,
        }
        .validated()
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(p.norm_bound.is_finite() && p.norm_bound > 0.0) {
            return bad("norm_bound must be finite and positive".into());
        }
        let units = (p.norm_bound * fixed_point.scale()).round();
        if units < 1.0 || units > u64::MAX as f64 {
            return bad("norm_bound is not representable at this precision".into());
        }
        let policy = AggregationPolicy {
            hash: p.hash,
            fixed_point,
            param_seed: p.param_seed.clone(),
            norm_bound: units as u64,
            quorum: p.quorum,
            round_timeout: p.round_timeout,
            backend: self.backend,
        };
        policy.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<AggregationPolicy, ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        let s = &self.sites;
        if s.num_clients == 0 {
            return bad("num_clients must be at least 1".into());
        }
        if s.feature_dim == 0 {
            return bad("feature_dim must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&s.skew) {
            return bad("skew must lie in [0, 1]".into());
        }
        if s.per_site == 0 || s.holdout == 0 {
            return bad("per_site and holdout must be positive".into());
        }
        if let ModelKind::Mlp { hidden: 0 } = self.model {
            return bad("mlp hidden width must be positive".into());
        }
        self.train_config()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let policy = self.policy()?;
        if (s.num_clients + s.idle_clients) as u64 > self.policy.max_clients {
            return bad("num_clients + idle_clients exceeds max_clients".into());
        }
        if s.per_site as u64 > self.policy.max_weight {
            return bad("per_site exceeds max_weight".into());
        }
        if self.policy.block_interval == 0 || self.policy.round_timeout < self.policy.block_interval {
            return bad("round_timeout must be at least one positive block_interval".into());
        }
        let mock = &self.mock_timings;
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !(ok(mock.prove_ms) && ok(mock.verify_ms) && ok(mock.scale)) {
            return bad("mock timings must be finite and non-negative".into());
        }
        Ok(policy)
    }
}

/// Where a deviation was caught.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectionLayer {
    EnclaveIngest,
    ContractVerify,
    ClientDistributionCheck,
    Auditor,
}

impl DetectionLayer {
    pub fn name(self) -> &'static str {
        match self {
            DetectionLayer::EnclaveIngest => "enclave-ingest",
            DetectionLayer::ContractVerify => "contract-verify",
            DetectionLayer::ClientDistributionCheck => "client-distribution-check",
            DetectionLayer::Auditor => "auditor",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub round_t: u64,
    pub layer: DetectionLayer,
    /// Reason code of the rejecting component.
    pub reason: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub client_id: Option<Digest>,
    /// Block that records the rejection, when it is on chain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<u64>,
}

/// One client-side message pair: the on-chain anchor post and the sealed
/// submission relayed to the enclave.
#[derive(Debug, Clone)]
pub struct Outgoing {
    /// Index of the honest site that produced it, if any.
    pub site: Option<usize>,
    pub post: Tx,
    pub submission: ClientSubmission,
}

/// Client-side view handed to [`RoundInterceptor::client_traffic`].
pub struct TrafficContext<'a> {
    pub header: &'a RoundHeader,
    pub policy: &'a AggregationPolicy,
    pub params: &'a PedersenParams,
    pub enclave: &'a EnclavePublicInfo,
    pub sites: &'a [ClientIdentity],
    /// Honest traffic in site order; hooks may edit, drop or append.
    pub outgoing: &'a mut Vec<Outgoing>,
    pub rng: &'a mut ChaCha20Rng,
}

impl TrafficContext<'_> {
    /// Builds a signed anchor post and submission for an arbitrary quantized
    /// update, bypassing every client-side policy check.
    pub fn craft(&mut self, identity: &ClientIdentity, update: &QuantizedUpdate, weight: u64) -> Outgoing {
        let blinding = Scalar::random(self.rng);
        let ctx = SubmissionContext {
            policy: self.policy,
            params: self.params,
            enclave_sealing_key: &self.enclave.sealing_key,
            current_round: self.header.round_t,
        };
        let submission = submit_quantized(identity, update, &blinding, weight, self.header, &ctx, self.rng);
        Outgoing {
            site: None,
            post: post_tx(self.policy.hash, identity, &submission),
            submission,
        }
    }
}

/// Operator-side view of the enclave output before it is posted.
pub struct OperatorOutput {
    pub statement: AggregationStatement,
    pub proof: AggregationProof,
    pub attestation: Attestation,
    pub receipts: Vec<EnclaveReceipt>,
}

/// Hooks at every boundary an adversary controls. The defaults are honest.
pub trait RoundInterceptor {
    /// A client's float update before quantization.
    fn tamper_update(&mut self, _round_t: u64, _site: usize, _update: &mut Vec<f64>) {}
    /// All client traffic for the round, before it reaches ledger or operator.
    fn client_traffic(&mut self, _ctx: &mut TrafficContext<'_>) {}
    /// Whether the operator relays this submission to the enclave.
    fn operator_ingress(&mut self, _round_t: u64, _submission: &ClientSubmission) -> bool {
        true
    }
    /// The enclave output as the operator posts it.
    fn operator_output(&mut self, _round_t: u64, _output: &mut OperatorOutput, _operator: &KeyPair) {}
    /// The model the operator sends to one site.
    fn operator_distribution(&mut self, _round_t: u64, _site: usize, _model: &mut ModelParams) {}
}

/// The honest interceptor.
#[derive(Debug, Clone, Copy, Default)]
pub struct Honest;

impl RoundInterceptor for Honest {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round_t: u64,
    pub finalized: bool,
    pub participants: usize,
    /// `‖Δ − FedAvg(float updates)‖₁` over the aggregated clients.
    pub parity_gap_l1: f64,
    pub metrics: Metrics,
    pub proof_bytes: usize,
    pub prove_time: Duration,
    pub verify_time: Duration,
    /// The timings above are replayed from configuration, not measured.
    pub timings_replayed: bool,
    pub ledger_txs: usize,
    /// Logical ticks from round open to the block that finalized it.
    pub finality_ticks: u64,
    pub model_hash: Digest,
    pub events: Vec<DetectionEvent>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RoundFailure {
    #[error("round {round_t}: {accepted} accepted submissions, quorum is {quorum}")]
    BelowQuorum { round_t: u64, accepted: usize, quorum: u32 },
    #[error("round {round_t}: enclave failed: {error}")]
    Enclave { round_t: u64, error: EnclaveError },
    #[error("round {round_t}: finalization rejected: {reason}")]
    FinalizeRejected { round_t: u64, reason: LedgerReject },
    #[error("no round is open")]
    NoOpenRound,
    /// Anchors of the failed round are on chain, so its clients cannot resubmit.
    #[error("federation halted after round {0} failed")]
    Halted(u64),
}

/// A round that did not finalize, with everything observed up to the failure.
#[derive(Debug, Clone, PartialEq)]
pub struct FailedRound {
    pub failure: RoundFailure,
    pub events: Vec<DetectionEvent>,
}

struct Site {
    identity: ClientIdentity,
    data: Dataset,
}

/// Per-round training seed for site `i`; shared with the shadow run.
fn train_seed(seed: u64, round_t: u64, site: usize) -> u64 {
    let d = Digest::of(
        HashAlg::Sha256,
        b"zkfl/train-seed",
        &[&seed.to_le_bytes(), &round_t.to_le_bytes(), &(site as u64).to_le_bytes()],
    );
    u64::from_le_bytes(d.0[..8].try_into().expect("8 bytes"))
}

fn derive_key(seed: u64, role: &str) -> KeyPair {
    KeyPair::from_seed(format!("zkfl/{seed}/{role}").as_bytes())
}

fn post_tx(alg: HashAlg, identity: &ClientIdentity, sub: &ClientSubmission) -> Tx {
    Tx::sign(
        alg,
        identity.keypair(),
        TxBody::PostCommitment {
            client_id: sub.client_id,
            round_t: sub.round_t,
            anchor: sub.anchor,
            submission_signature: sub.signature,
        },
    )
}

fn build_pool(workers: usize) -> Option<rayon::ThreadPool> {
    (workers > 0).then(|| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("thread pool")
    })
}

fn train_all(
    pool: Option<&rayon::ThreadPool>,
    model: &Model,
    global: &ModelParams,
    data: &[&Dataset],
    train: &TrainConfig,
    seed: u64,
    round_t: u64,
) -> Vec<Vec<f64>> {
    let job = || {
        data.par_iter()
            .enumerate()
            .map(|(i, d)| {
                local_train(model, global, d, &train.with_seed(train_seed(seed, round_t, i)))
                    .expect("validated configuration trains")
            })
            .collect()
    };
    match pool {
        Some(p) => p.install(job),
        None => job(),
    }
}

/// A running verified federation.
pub struct Federation {
    cfg: FederationConfig,
    policy: AggregationPolicy,
    params: Arc<PedersenParams>,
    model: Model,
    global: ModelParams,
    sites: Vec<Site>,
    identities: Vec<ClientIdentity>,
    idle: Vec<ClientIdentity>,
    holdout: Dataset,
    enclave: Enclave,
    enclave_info: EnclavePublicInfo,
    authority: KeyPair,
    operator: KeyPair,
    ledger: Ledger,
    rng: ChaCha20Rng,
    pool: Option<rayon::ThreadPool>,
    retain_openings: bool,
    openings: Vec<(u64, Digest, Opening)>,
    halted: Option<u64>,
}

impl Federation {
    pub fn new(cfg: FederationConfig) -> Result<Self, ConfigError> {
        let policy = cfg.validate()?;
        let alg = policy.hash;
        let params = Arc::new(
            policy
                .pedersen_params()
                .map_err(|e| ConfigError::Invalid(e.to_string()))?,
        );
        let model = cfg.model();
        let task = SyntheticTask::new(cfg.seed, cfg.sites.feature_dim);
        let n = cfg.sites.num_clients;
        // Identities in genesis are registered from the first block on.
        let registered = |role: String| {
            let mut c = ClientIdentity::new(alg, derive_key(cfg.seed, &role));
            c.registered = true;
            c
        };
        let sites: Vec<Site> = (0..n)
            .map(|i| Site {
                identity: registered(format!("client/{i}")),
                data: task.site(i, n, cfg.sites.per_site, cfg.sites.skew),
            })
            .collect();
        let idle: Vec<ClientIdentity> = (0..cfg.sites.idle_clients)
            .map(|i| registered(format!("idle/{i}")))
            .collect();
        let keys = EnclaveKeys::from_seed(format!("zkfl/{}/enclave", cfg.seed).as_bytes());
        let enclave = Enclave::new(keys, policy.clone(), params.clone()).with_mock_timings(cfg.mock_timings);
        let enclave_info = enclave.public_info();
        let authority = derive_key(cfg.seed, "authority");
        let operator = derive_key(cfg.seed, "operator");
        let global = model.init(cfg.seed);
        let initial_registry = sites
            .iter()
            .enumerate()
            .map(|(i, s)| (format!("site-{i}"), &s.identity))
            .chain(idle.iter().enumerate().map(|(i, c)| (format!("idle-{i}"), c)))
            .map(|(metadata, c)| RegistryEntry {
                public_key: c.public(),
                metadata,
            })
            .collect();
        let genesis = GenesisConfig {
            schema_version: GENESIS_SCHEMA_VERSION,
            chain_id: format!("zkfl-sim-{}", cfg.seed),
            policy: policy.clone(),
            enclave: enclave_info.clone(),
            authority_key: authority.public(),
            operator_key: operator.public(),
            initial_registry,
            initial_model_hash: global.hash(alg),
            block_interval: cfg.policy.block_interval,
        };
        let ledger = Ledger::new(genesis).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let identities = sites.iter().map(|s| s.identity.clone()).collect();
        Ok(Self {
            holdout: task.holdout(cfg.sites.holdout),
            pool: build_pool(cfg.workers),
            rng: ChaCha20Rng::seed_from_u64(cfg.seed ^ 0x5eed_0fc1_1e57),
            cfg,
            policy,
            params,
            model,
            global,
            sites,
            identities,
            idle,
            enclave,
            enclave_info,
            authority,
            operator,
            ledger,
            retain_openings: false,
            openings: Vec::new(),
            halted: None,
        })
    }

    /// Keeps every client's opening so tests can scan artifacts for leaks.
    pub fn retain_openings(&mut self, on: bool) {
        self.retain_openings = on;
    }

    /// `(round_t, client_id, opening)` for every honest submission so far,
    /// if retention is on.
    pub fn openings(&self) -> &[(u64, Digest, Opening)] {
        &self.openings
    }

    pub fn config(&self) -> &FederationConfig {
        &self.cfg
    }

    pub fn policy(&self) -> &AggregationPolicy {
        &self.policy
    }

    pub fn params(&self) -> &Arc<PedersenParams> {
        &self.params
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn global(&self) -> &ModelParams {
        &self.global
    }

    pub fn holdout(&self) -> &Dataset {
        &self.holdout
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn genesis(&self) -> &GenesisConfig {
        self.ledger.genesis()
    }

    pub fn enclave_info(&self) -> &EnclavePublicInfo {
        &self.enclave_info
    }

    /// Site identities in site order.
    pub fn identities(&self) -> &[ClientIdentity] {
        &self.identities
    }

    pub fn idle_identities(&self) -> &[ClientIdentity] {
        &self.idle
    }

    pub fn operator_key(&self) -> &KeyPair {
        &self.operator
    }

    pub fn rng(&mut self) -> &mut (impl RngCore + CryptoRng) {
        &mut self.rng
    }

    /// Registers a new identity through an authority-signed transaction. It
    /// gates rounds opened after the registration.
    pub fn register_identity(&mut self, identity: &mut ClientIdentity, metadata: &str) -> Result<(), LedgerReject> {
        let tx = Tx::sign(
            self.policy.hash,
            &self.authority,
            TxBody::RegisterIdentity {
                public_key: identity.public(),
                metadata: metadata.to_string(),
            },
        );
        self.ledger.submit_tx(tx)?;
        identity.registered = true;
        Ok(())
    }

    /// Seals whatever is pending.
    pub fn seal_block(&mut self) {
        self.ledger.seal_block();
    }

    pub fn run_honest_round(&mut self) -> Result<RoundRecord, FailedRound> {
        self.run_round(&mut Honest)
    }

    /// Runs the open round to finalization through `hooks`. After a failed
    /// round every later call fails with [`RoundFailure::Halted`].
    pub fn run_round(&mut self, hooks: &mut dyn RoundInterceptor) -> Result<RoundRecord, FailedRound> {
        if let Some(t) = self.halted {
            return Err(FailedRound {
                failure: RoundFailure::Halted(t),
                events: Vec::new(),
            });
        }
        let result = self.run_round_inner(hooks);
        if result.is_err() {
            self.halted = Some(self.ledger.open_round().map_or(0, |h| h.round_t));
        }
        result
    }

    fn run_round_inner(&mut self, hooks: &mut dyn RoundInterceptor) -> Result<RoundRecord, FailedRound> {
        let alg = self.policy.hash;
        let mut events = Vec::new();
        let fail = |failure, events| Err(FailedRound { failure, events });
        let Some(header) = self.ledger.open_round().cloned() else {
            return fail(RoundFailure::NoOpenRound, events);
        };
        let round_t = header.round_t;
        let snapshot = self.ledger.round_registry().cloned().expect("open round has a snapshot");
        let open_tick = header.deadline - self.policy.round_timeout;
        let start_height = self.ledger.height();
        self.enclave
            .open_round(header.clone(), snapshot)
            .expect("enclave and ledger share the policy");

        let datasets: Vec<&Dataset> = self.sites.iter().map(|s| &s.data).collect();
        let mut updates = train_all(
            self.pool.as_ref(),
            &self.model,
            &self.global,
            &datasets,
            &self.cfg.train_config(),
            self.cfg.seed,
            round_t,
        );
        for (i, u) in updates.iter_mut().enumerate() {
            hooks.tamper_update(round_t, i, u);
        }

        let ctx = SubmissionContext {
            policy: &self.policy,
            params: &self.params,
            enclave_sealing_key: &self.enclave_info.sealing_key,
            current_round: round_t,
        };
        let mut outgoing = Vec::with_capacity(self.sites.len());
        let mut float_updates = std::collections::BTreeMap::new();
        for (i, (site, update)) in self.sites.iter().zip(&updates).enumerate() {
            let weight = site.data.len() as u64;
            match client_prepare_with_opening(&site.identity, update, weight, &header, &ctx, &mut self.rng) {
                Ok((submission, opening)) => {
                    if self.retain_openings {
                        self.openings.push((round_t, submission.client_id, opening));
                    }
                    float_updates.insert(submission.client_id, (update.clone(), weight));
                    outgoing.push(Outgoing {
                        site: Some(i),
                        post: post_tx(alg, &site.identity, &submission),
                        submission,
                    });
                }
                // A client whose update cannot be encoded sits the round out.
                Err(_) => continue,
            }
        }
        hooks.client_traffic(&mut TrafficContext {
            header: &header,
            policy: &self.policy,
            params: &self.params,
            enclave: &self.enclave_info,
            sites: &self.identities,
            outgoing: &mut outgoing,
            rng: &mut self.rng,
        });

        let post_height = self.ledger.height() + 1;
        for o in &outgoing {
            if let Err(reason) = self.ledger.submit_tx(o.post.clone()) {
                events.push(DetectionEvent {
                    round_t,
                    layer: DetectionLayer::ContractVerify,
                    reason: reason.code().into(),
                    client_id: Some(o.submission.client_id),
                    height: Some(post_height),
                });
            }
        }
        self.ledger.seal_block();

        for o in &outgoing {
            if !hooks.operator_ingress(round_t, &o.submission) {
                continue;
            }
            if let Some(reason) = self.enclave.ingest(&o.submission).reason() {
                events.push(DetectionEvent {
                    round_t,
                    layer: DetectionLayer::EnclaveIngest,
                    reason: reason.code().into(),
                    client_id: Some(o.submission.client_id),
                    height: None,
                });
            }
        }
        self.enclave.close_round();
        let out = match self.enclave.aggregate_and_prove() {
            Ok(out) => out,
            Err(EnclaveError::BelowQuorum { accepted, quorum }) => {
                return fail(
                    RoundFailure::BelowQuorum {
                        round_t,
                        accepted,
                        quorum,
                    },
                    events,
                )
            }
            Err(error) => return fail(RoundFailure::Enclave { round_t, error }, events),
        };
        let prove_time = out.prove_time;
        let mut output = OperatorOutput {
            statement: out.statement,
            proof: out.proof,
            attestation: out.attestation,
            receipts: out.receipts,
        };
        hooks.operator_output(round_t, &mut output, &self.operator);

        // The operator derives the model from the statement it posts.
        let statement = &output.statement;
        let denom = self.policy.fixed_point.scale() * statement.total_weight.max(1) as f64;
        let delta: Vec<f64> = statement.aggregate.iter().map(|&v| v as f64 / denom).collect();
        let next = apply_update(&self.global, &delta).unwrap_or_else(|_| self.global.clone());
        let model_hash = next.hash(alg);

        let (verify_time, timings_replayed) = match self.policy.backend {
            BackendKind::Transparent => {
                let vctx = VerifyContext {
                    policy: &self.policy,
                    params: &self.params,
                    registry: self.ledger.round_registry().expect("round still open"),
                    header: &header,
                    enclave_key: &self.enclave_info.attestation_key,
                };
                let t = Instant::now();
                let _ = check_aggregation(&output.statement, &output.proof, &vctx);
                (t.elapsed(), false)
            }
            BackendKind::Mock => (
                Duration::from_secs_f64(self.cfg.mock_timings.verify_ms * self.cfg.mock_timings.scale / 1e3),
                true,
            ),
        };

        let participants: Vec<Digest> = output.statement.participants.iter().map(|p| p.client_id).collect();
        let proof_bytes = output.proof.payload_len();
        let finalize = Tx::sign(
            alg,
            &self.operator,
            TxBody::FinalizeRound {
                statement: output.statement,
                proof: output.proof,
                attestation: output.attestation,
                model_hash,
                receipts: output.receipts,
            },
        );
        let finalize_height = self.ledger.height() + 1;
        if let Err(reason) = self.ledger.submit_tx(finalize) {
            self.ledger.seal_block();
            events.push(DetectionEvent {
                round_t,
                layer: DetectionLayer::ContractVerify,
                reason: reason.code().into(),
                client_id: None,
                height: Some(finalize_height),
            });
            return fail(RoundFailure::FinalizeRejected { round_t, reason }, events);
        }
        let finality_ticks = self.ledger.tip().timestamp - open_tick;
        self.global = next;

        for i in 0..self.sites.len() {
            let mut received = self.global.clone();
            hooks.operator_distribution(round_t, i, &mut received);
            let ok = client_verify_distribution(&header, &received, &self.ledger, &self.policy).unwrap_or(false);
            if !ok {
                events.push(DetectionEvent {
                    round_t,
                    layer: DetectionLayer::ClientDistributionCheck,
                    reason: "model-hash-mismatch".into(),
                    client_id: Some(self.sites[i].identity.client_id),
                    height: Some(finalize_height),
                });
            }
        }

        let known: Vec<&(Vec<f64>, u64)> = participants.iter().filter_map(|c| float_updates.get(c)).collect();
        let parity_gap_l1 = if known.is_empty() {
            0.0
        } else {
            let ups: Vec<Vec<f64>> = known.iter().map(|(u, _)| u.clone()).collect();
            let ws: Vec<u64> = known.iter().map(|(_, w)| *w).collect();
            let reference = fedavg_aggregate(&ups, &ws).expect("shapes match");
            delta.iter().zip(&reference).map(|(a, b)| (a - b).abs()).sum()
        };
        let ledger_txs = self.ledger.blocks()[start_height as usize + 1..]
            .iter()
            .map(|b| b.txs.len())
            .sum();
        Ok(RoundRecord {
            round_t,
            finalized: true,
            participants: participants.len(),
            parity_gap_l1,
            metrics: evaluate(&self.model, &self.global, &self.holdout),
            proof_bytes,
            prove_time,
            verify_time,
            timings_replayed,
            ledger_txs,
            finality_ticks,
            model_hash,
            events,
        })
    }
}

/// Plain FedAvg over the same sites, seeds and initial model, without
/// quantization, commitments or a ledger.
pub struct ShadowRun {
    seed: u64,
    model: Model,
    global: ModelParams,
    sites: Vec<Dataset>,
    holdout: Dataset,
    train: TrainConfig,
    pool: Option<rayon::ThreadPool>,
    round_t: u64,
}

impl ShadowRun {
    pub fn new(cfg: &FederationConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let model = cfg.model();
        let task = SyntheticTask::new(cfg.seed, cfg.sites.feature_dim);
        let n = cfg.sites.num_clients;
        Ok(Self {
            seed: cfg.seed,
            global: model.init(cfg.seed),
            model,
            sites: (0..n).map(|i| task.site(i, n, cfg.sites.per_site, cfg.sites.skew)).collect(),
            holdout: task.holdout(cfg.sites.holdout),
            train: cfg.train_config(),
            pool: build_pool(cfg.workers),
            round_t: 0,
        })
    }

    pub fn global(&self) -> &ModelParams {
        &self.global
    }

    pub fn step(&mut self) -> Metrics {
        self.round_t += 1;
        let data: Vec<&Dataset> = self.sites.iter().collect();
        let updates = train_all(
            self.pool.as_ref(),
            &self.model,
            &self.global,
            &data,
            &self.train,
            self.seed,
            self.round_t,
        );
        let weights: Vec<u64> = self.sites.iter().map(|d| d.len() as u64).collect();
        let delta = fedavg_aggregate(&updates, &weights).expect("shapes match");
        self.global = apply_update(&self.global, &delta).expect("shapes match");
        evaluate(&self.model, &self.global, &self.holdout)
    }
}
