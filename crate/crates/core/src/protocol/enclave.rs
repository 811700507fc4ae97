//! Simulated confidential aggregator.
//!
//! The enclave's only inputs are round headers and client submissions; its
//! only outputs are signed receipts and the round's aggregate, statement,
//! proof and attestation. Unsealed updates and blindings never leave it.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{tags, unseal, Commitment, Digest, HashAlg, KeyPair, PedersenParams, PublicKey, Scalar, Signature};
use crate::encoding::{encode_to_scalars, l2_norm_squared, QuantizedUpdate};
use crate::wire::{Decode, Encode, Message, MessageType, Reader, WireError, Writer};

use super::identity::Registry;
use super::messages::{compute_anchor, seal_aad, submission_message, ClientSubmission, RoundHeader};
use super::policy::AggregationPolicy;
use super::proof::{AggregationProof, BackendKind, MockTimings};
use super::statement::{AggregationStatement, Participant};

pub const ENCLAVE_CODE_VERSION: &str = concat!("zkfl-enclave/", env!("CARGO_PKG_VERSION"));

/// `H(code_version ‖ policy_id)`.
pub fn enclave_measurement(alg: HashAlg, code_version: &str, policy_id: &Digest) -> Digest {
    Digest::of(alg, tags::MEASUREMENT, &[code_version.as_bytes(), policy_id.as_bytes()])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    BadSignature,
    CommitmentMismatch,
    NormExceeded,
    DuplicateClient,
    UnknownClient,
    RoundClosed,
    /// Submission for another round, or a commitment already used.
    StaleRound,
    WeightOutOfRange,
}

impl RejectReason {
    pub const ALL: [RejectReason; 8] = [
        RejectReason::BadSignature,
        RejectReason::CommitmentMismatch,
        RejectReason::NormExceeded,
        RejectReason::DuplicateClient,
        RejectReason::UnknownClient,
        RejectReason::RoundClosed,
        RejectReason::StaleRound,
        RejectReason::WeightOutOfRange,
    ];

    pub fn code(self) -> &'static str {
        match self {
            RejectReason::BadSignature => "bad-signature",
            RejectReason::CommitmentMismatch => "commitment-mismatch",
            RejectReason::NormExceeded => "norm-exceeded",
            RejectReason::DuplicateClient => "duplicate-client",
            RejectReason::UnknownClient => "unknown-client",
            RejectReason::RoundClosed => "round-closed",
            RejectReason::StaleRound => "stale-round",
            RejectReason::WeightOutOfRange => "weight-out-of-range",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "status", content = "reason")]
pub enum ReceiptOutcome {
    Accepted,
    Rejected(RejectReason),
}

impl Encode for ReceiptOutcome {
    fn encode(&self, w: &mut Writer) {
        match self {
            ReceiptOutcome::Accepted => w.put_u8(0),
            ReceiptOutcome::Rejected(r) => w.put_u8(1 + *r as u8),
        }
    }
}

impl Decode for ReceiptOutcome {
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        match r.u8()? {
            0 => Ok(ReceiptOutcome::Accepted),
            tag => RejectReason::ALL
                .get(tag as usize - 1)
                .map(|&reason| ReceiptOutcome::Rejected(reason))
                .ok_or(WireError::InvalidTag { what: "receipt outcome", tag }),
        }
    }
}

/// Enclave-signed record of what happened to one submission.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnclaveReceipt {
    pub round_t: u64,
    pub client_id: Digest,
    pub anchor: Digest,
    pub outcome: ReceiptOutcome,
    pub signature: Signature,
}

impl EnclaveReceipt {
    fn signed_bytes(round_t: u64, client_id: &Digest, anchor: &Digest, outcome: ReceiptOutcome) -> Vec<u8> {
        let mut w = Writer::new();
        w.put_raw(tags::RECEIPT);
        w.put_u64(round_t);
        w.put(client_id);
        w.put(anchor);
        w.put(&outcome);
        w.into_bytes()
    }

    pub fn verify(&self, alg: HashAlg, enclave_key: &PublicKey) -> bool {
        let msg = Self::signed_bytes(self.round_t, &self.client_id, &self.anchor, self.outcome);
        enclave_key.verify(alg, &msg, &self.signature)
    }

    pub fn rejection(&self) -> Option<RejectReason> {
        match self.outcome {
            ReceiptOutcome::Accepted => None,
            ReceiptOutcome::Rejected(r) => Some(r),
        }
    }
}

impl Encode for EnclaveReceipt {
    fn encode(&self, w: &mut Writer) {
        w.put_u64(self.round_t);
        w.put(&self.client_id);
        w.put(&self.anchor);
        w.put(&self.outcome);
        w.put(&self.signature);
    }
}

impl Decode for EnclaveReceipt {
    const MIN_ENCODED_LEN: usize = 8 + 32 + 32 + 1 + 64;
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        Ok(EnclaveReceipt {
            round_t: r.u64()?,
            client_id: r.get()?,
            anchor: r.get()?,
            outcome: r.get()?,
            signature: r.get()?,
        })
    }
}

impl Message for EnclaveReceipt {
    const TYPE: MessageType = MessageType::EnclaveReceipt;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attestation {
    pub enclave_measurement: Digest,
    pub statement_hash: Digest,
    pub norm_checks_passed: bool,
    pub signature: Signature,
}

impl Attestation {
    fn signed_bytes(measurement: &Digest, statement_hash: &Digest, norm_ok: bool) -> Vec<u8> {
        let mut w = Writer::new();
        w.put_raw(tags::ATTEST);
        w.put(measurement);
        w.put(statement_hash);
        w.put_bool(norm_ok);
        w.into_bytes()
    }

    /// True iff signed by `enclave_key`, issued by the expected enclave build,
    /// bound to `statement`, and reporting that every norm check passed.
    pub fn verify(
        &self,
        alg: HashAlg,
        enclave_key: &PublicKey,
        expected_measurement: &Digest,
        statement: &AggregationStatement,
    ) -> bool {
        let msg = Self::signed_bytes(&self.enclave_measurement, &self.statement_hash, self.norm_checks_passed);
        self.norm_checks_passed
            && self.enclave_measurement == *expected_measurement
            && self.statement_hash == statement.hash(alg)
            && enclave_key.verify(alg, &msg, &self.signature)
    }
}

impl Encode for Attestation {
    fn encode(&self, w: &mut Writer) {
        w.put(&self.enclave_measurement);
        w.put(&self.statement_hash);
        w.put_bool(self.norm_checks_passed);
        w.put(&self.signature);
    }
}

impl Decode for Attestation {
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        Ok(Attestation {
            enclave_measurement: r.get()?,
            statement_hash: r.get()?,
            norm_checks_passed: r.bool()?,
            signature: r.get()?,
        })
    }
}

impl Message for Attestation {
    const TYPE: MessageType = MessageType::Attestation;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IngestOutcome {
    Accepted(EnclaveReceipt),
    Rejected(RejectReason, EnclaveReceipt),
}

impl IngestOutcome {
    pub fn is_accepted(&self) -> bool {
        matches!(self, IngestOutcome::Accepted(_))
    }

    pub fn reason(&self) -> Option<RejectReason> {
        match self {
            IngestOutcome::Accepted(_) => None,
            IngestOutcome::Rejected(r, _) => Some(*r),
        }
    }

    pub fn receipt(&self) -> &EnclaveReceipt {
        match self {
            IngestOutcome::Accepted(r) | IngestOutcome::Rejected(_, r) => r,
        }
    }
}

/// Sealing and attestation keys, provisioned at setup.
#[derive(Clone)]
pub struct EnclaveKeys {
    sealing: KeyPair,
    attestation: KeyPair,
}

impl EnclaveKeys {
    pub fn from_seed(seed: &[u8]) -> Self {
        Self {
            sealing: KeyPair::from_seed(&[seed, b"/sealing"].concat()),
            attestation: KeyPair::from_seed(&[seed, b"/attestation"].concat()),
        }
    }

    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        Self {
            sealing: KeyPair::generate(rng),
            attestation: KeyPair::generate(rng),
        }
    }

    pub fn sealing_public(&self) -> PublicKey {
        self.sealing.public()
    }

    pub fn attestation_public(&self) -> PublicKey {
        self.attestation.public()
    }
}

impl fmt::Debug for EnclaveKeys {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EnclaveKeys")
            .field("sealing", &self.sealing.public())
            .field("attestation", &self.attestation.public())
            .finish_non_exhaustive()
    }
}

/// What the enclave publishes in the genesis configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnclavePublicInfo {
    pub code_version: String,
    pub measurement: Digest,
    pub sealing_key: PublicKey,
    pub attestation_key: PublicKey,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnclaveError {
    #[error("no round is open")]
    NoOpenRound,
    #[error("round header does not carry the enclave's policy")]
    PolicyMismatch,
    #[error("round failed: {accepted} accepted submissions, quorum is {quorum}")]
    BelowQuorum { accepted: usize, quorum: u32 },
    #[error("aggregate leaves the representable range")]
    Overflow,
}

pub struct RoundOutput {
    /// `Δ = Δ_q / (S·Σnᵢ)`.
    pub delta: Vec<f64>,
    pub statement: AggregationStatement,
    pub proof: AggregationProof,
    pub attestation: Attestation,
    /// One receipt per ingested submission, in ingestion order.
    pub receipts: Vec<EnclaveReceipt>,
    /// Measured for the transparent backend, replayed for the mock backend.
    pub prove_time: Duration,
}

struct Contribution {
    commitment: Commitment,
    weight: u64,
    values: Vec<i64>,
    blinding: Scalar,
}

struct OpenRound {
    header: RoundHeader,
    registry: Registry,
    contributions: BTreeMap<Digest, Contribution>,
    receipts: Vec<EnclaveReceipt>,
    closed: bool,
}

pub struct Enclave {
    keys: EnclaveKeys,
    policy: AggregationPolicy,
    policy_id: Digest,
    params: Arc<PedersenParams>,
    measurement: Digest,
    mock_timings: MockTimings,
    /// Every commitment accepted in any round.
    seen_commitments: HashSet<[u8; 32]>,
    round: Option<OpenRound>,
}

impl fmt::Debug for Enclave {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Enclave")
            .field("policy_id", &self.policy_id)
            .field("measurement", &self.measurement)
            .field("round", &self.round.as_ref().map(|r| r.header.round_t))
            .finish_non_exhaustive()
    }
}

impl Enclave {
    pub fn new(keys: EnclaveKeys, policy: AggregationPolicy, params: Arc<PedersenParams>) -> Self {
        let policy_id = policy.id();
        Self {
            measurement: enclave_measurement(policy.hash, ENCLAVE_CODE_VERSION, &policy_id),
            keys,
            policy,
            policy_id,
            params,
            mock_timings: MockTimings::default(),
            seen_commitments: HashSet::new(),
            round: None,
        }
    }

    pub fn with_mock_timings(mut self, timings: MockTimings) -> Self {
        self.mock_timings = timings;
        self
    }

    pub fn public_info(&self) -> EnclavePublicInfo {
        EnclavePublicInfo {
            code_version: ENCLAVE_CODE_VERSION.to_string(),
            measurement: self.measurement,
            sealing_key: self.keys.sealing_public(),
            attestation_key: self.keys.attestation_public(),
        }
    }

    /// Starts a round against a registry snapshot. Any unfinished round is discarded.
    pub fn open_round(&mut self, header: RoundHeader, registry: Registry) -> Result<(), EnclaveError> {
        if header.policy_id != self.policy_id {
            return Err(EnclaveError::PolicyMismatch);
        }
        self.round = Some(OpenRound {
            header,
            registry,
            contributions: BTreeMap::new(),
            receipts: Vec::new(),
            closed: false,
        });
        Ok(())
    }

    /// Stops accepting submissions for the current round.
    pub fn close_round(&mut self) {
        if let Some(r) = self.round.as_mut() {
            r.closed = true;
        }
    }

    pub fn accepted_count(&self) -> usize {
        self.round.as_ref().map_or(0, |r| r.contributions.len())
    }

    pub fn ingest(&mut self, sub: &ClientSubmission) -> IngestOutcome {
        let verdict = self.validate(sub);
        let outcome = match &verdict {
            Ok(_) => ReceiptOutcome::Accepted,
            Err(reason) => ReceiptOutcome::Rejected(*reason),
        };
        let alg = self.policy.hash;
        let msg = EnclaveReceipt::signed_bytes(sub.round_t, &sub.client_id, &sub.anchor, outcome);
        let receipt = EnclaveReceipt {
            round_t: sub.round_t,
            client_id: sub.client_id,
            anchor: sub.anchor,
            outcome,
            signature: self.keys.attestation.sign(alg, &msg),
        };
        if let Some(round) = self.round.as_mut() {
            round.receipts.push(receipt.clone());
            if let Ok(contribution) = verdict {
                self.seen_commitments.insert(contribution.commitment.to_bytes());
                round.contributions.insert(sub.client_id, contribution);
            }
        }
        match outcome {
            ReceiptOutcome::Accepted => IngestOutcome::Accepted(receipt),
            ReceiptOutcome::Rejected(r) => IngestOutcome::Rejected(r, receipt),
        }
    }

    fn validate(&self, sub: &ClientSubmission) -> Result<Contribution, RejectReason> {
        let alg = self.policy.hash;
        let round = match &self.round {
            Some(r) if !r.closed => r,
            _ => return Err(RejectReason::RoundClosed),
        };
        if sub.round_t != round.header.round_t {
            return Err(RejectReason::StaleRound);
        }
        let key = round.registry.get(&sub.client_id).ok_or(RejectReason::UnknownClient)?;
        if !key.verify(alg, &submission_message(&round.header, &sub.anchor), &sub.signature) {
            return Err(RejectReason::BadSignature);
        }
        if compute_anchor(alg, &sub.commitment, sub.weight, &round.header) != sub.anchor {
            return Err(RejectReason::CommitmentMismatch);
        }
        if round.contributions.contains_key(&sub.client_id) {
            return Err(RejectReason::DuplicateClient);
        }
        if sub.weight == 0 || sub.weight > self.policy.max_weight() {
            return Err(RejectReason::WeightOutOfRange);
        }
        let aad = seal_aad(&sub.client_id, sub.round_t, &sub.anchor);
        let plain =
            unseal(alg, &self.keys.sealing, &aad, &sub.sealed_payload).map_err(|_| RejectReason::CommitmentMismatch)?;
        let (update, blinding) = decode_payload(&plain).ok_or(RejectReason::CommitmentMismatch)?;
        let cfg = &self.policy.fixed_point;
        if update.config_id != cfg.id() || update.round != sub.round_t || update.values.len() != cfg.dimension {
            return Err(RejectReason::CommitmentMismatch);
        }
        let recomputed = self
            .params
            .commit(&encode_to_scalars(&update.values), &blinding)
            .map_err(|_| RejectReason::CommitmentMismatch)?;
        if recomputed != sub.commitment {
            return Err(RejectReason::CommitmentMismatch);
        }
        if self.seen_commitments.contains(&sub.commitment.to_bytes()) {
            return Err(RejectReason::StaleRound);
        }
        let clamp = cfg.clamp_units().unsigned_abs();
        if update.values.iter().any(|v| v.unsigned_abs() > clamp)
            || l2_norm_squared(&update) > self.policy.norm_bound_squared()
        {
            return Err(RejectReason::NormExceeded);
        }
        Ok(Contribution {
            commitment: sub.commitment,
            weight: sub.weight,
            values: update.values,
            blinding,
        })
    }

    /// Aggregates the accepted contributions, proves and attests. The round
    /// is consumed whether or not this succeeds.
    pub fn aggregate_and_prove(&mut self) -> Result<RoundOutput, EnclaveError> {
        let round = self.round.take().ok_or(EnclaveError::NoOpenRound)?;
        let accepted = round.contributions.len();
        if accepted < self.policy.quorum as usize {
            return Err(EnclaveError::BelowQuorum {
                accepted,
                quorum: self.policy.quorum,
            });
        }
        let started = Instant::now();
        let alg = self.policy.hash;
        let cfg = &self.policy.fixed_point;
        let d = cfg.dimension;
        let mut acc = vec![0i128; d];
        let mut r_agg = Scalar::ZERO;
        let mut total_weight: u64 = 0;
        let mut participants = Vec::with_capacity(accepted);
        for (client_id, c) in &round.contributions {
            for (a, &v) in acc.iter_mut().zip(&c.values) {
                *a += c.weight as i128 * v as i128;
            }
            r_agg += Scalar::from_u64(c.weight) * c.blinding;
            total_weight = total_weight.checked_add(c.weight).ok_or(EnclaveError::Overflow)?;
            participants.push(Participant {
                client_id: *client_id,
                commitment: c.commitment,
                weight: c.weight,
            });
        }
        let bound = cfg.aggregate_bound() as i128;
        let aggregate: Vec<i64> = acc
            .iter()
            .map(|&a| if a.abs() <= bound { Ok(a as i64) } else { Err(EnclaveError::Overflow) })
            .collect::<Result<_, _>>()?;
        let weights: Vec<Scalar> = participants.iter().map(|p| Scalar::from_u64(p.weight)).collect();
        let commitments: Vec<Commitment> = participants.iter().map(|p| p.commitment).collect();
        let statement = AggregationStatement {
            header: round.header.clone(),
            participants,
            total_weight,
            aggregate,
            aggregate_commitment: Commitment::weighted_sum(&weights, &commitments),
            policy_id: self.policy_id,
            registry_digest: round.registry.digest(alg),
        };
        let statement_hash = statement.hash(alg);
        let (proof, prove_time) = match self.policy.backend {
            BackendKind::Transparent => (AggregationProof::transparent(r_agg), started.elapsed()),
            BackendKind::Mock => {
                let proof = AggregationProof::mock(alg, &self.keys.attestation, &statement_hash, &self.mock_timings);
                let ms = self.mock_timings.prove_ms * self.mock_timings.scale;
                (proof, Duration::from_secs_f64(ms.max(0.0) / 1e3))
            }
        };
        let msg = Attestation::signed_bytes(&self.measurement, &statement_hash, true);
        let attestation = Attestation {
            enclave_measurement: self.measurement,
            statement_hash,
            norm_checks_passed: true,
            signature: self.keys.attestation.sign(alg, &msg),
        };
        let denom = cfg.scale() * total_weight as f64;
        let delta = statement.aggregate.iter().map(|&v| v as f64 / denom).collect();
        Ok(RoundOutput {
            delta,
            statement,
            proof,
            attestation,
            receipts: round.receipts,
            prove_time,
        })
    }
}

pub(crate) fn encode_payload(update: &QuantizedUpdate, blinding: &Scalar) -> Vec<u8> {
    let mut w = Writer::new();
    w.put(update);
    w.put(blinding);
    w.into_bytes()
}

fn decode_payload(bytes: &[u8]) -> Option<(QuantizedUpdate, Scalar)> {
    let mut r = Reader::new(bytes);
    let update = r.get().ok()?;
    let blinding = r.get().ok()?;
    r.finish().ok()?;
    Some((update, blinding))
}
