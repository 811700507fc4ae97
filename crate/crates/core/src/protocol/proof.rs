//! Proof backends for the aggregation statement and the public verifier.
//!
//! The transparent backend opens the aggregate blinding `r_agg`. Anyone can
//! then check `commit(encode(Δ_q), r_agg) = Σ nᵢ·Cᵢ`, which by binding of
//! the commitments forces `Δ_q = Σ nᵢ·qᵢ` over exactly the listed inputs.
//! `r_agg` is a linear combination of the clients' blindings, so this proof
//! is not zero knowledge in `r_agg`; each individual `rᵢ` stays sealed.
//!
//! The mock backend stands in for a succinct proof: 128 opaque bytes carrying
//! an enclave signature over the statement hash. It proves integrity of the
//! enclave's output only, and is not sound against a dishonest enclave.

use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{tags, Commitment, Digest, HashAlg, KeyPair, PedersenParams, PublicKey, Scalar, Signature};
use crate::encoding::encode_to_scalars;
use crate::wire::{Decode, Encode, Message, MessageType, Reader, WireError, Writer};

use super::identity::Registry;
use super::messages::RoundHeader;
use super::policy::AggregationPolicy;
use super::statement::AggregationStatement;

pub const TRANSPARENT_PROOF_LEN: usize = 32;
pub const MOCK_PROOF_LEN: usize = 128;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Transparent,
    Mock,
}

impl BackendKind {
    pub fn name(self) -> &'static str {
        match self {
            BackendKind::Transparent => "transparent",
            BackendKind::Mock => "mock",
        }
    }
}

impl FromStr for BackendKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "transparent" => Ok(BackendKind::Transparent),
            "mock" => Ok(BackendKind::Mock),
            other => Err(format!("unknown backend {other:?}")),
        }
    }
}

impl Encode for BackendKind {
    fn encode(&self, w: &mut Writer) {
        w.put_u8(*self as u8);
    }
}

impl Decode for BackendKind {
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        match r.u8()? {
            0 => Ok(BackendKind::Transparent),
            1 => Ok(BackendKind::Mock),
            tag => Err(WireError::InvalidTag { what: "backend", tag }),
        }
    }
}

/// Timings the mock backend reports instead of measuring. The defaults are
/// the published GPU figures for a succinct proof of one round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockTimings {
    pub prove_ms: f64,
    pub verify_ms: f64,
    /// Multiplier applied to `prove_ms`.
    pub scale: f64,
}

impl Default for MockTimings {
    fn default() -> Self {
        Self {
            prove_ms: 45_200.0,
            verify_ms: 10.0,
            scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "lowercase")]
pub enum AggregationProof {
    Transparent {
        r_agg: Scalar,
    },
    Mock {
        #[serde(with = "crate::hexser")]
        bytes: [u8; MOCK_PROOF_LEN],
        simulated_prove_ms: f64,
        simulated_verify_ms: f64,
    },
}

impl AggregationProof {
    pub fn kind(&self) -> BackendKind {
        match self {
            AggregationProof::Transparent { .. } => BackendKind::Transparent,
            AggregationProof::Mock { .. } => BackendKind::Mock,
        }
    }

    /// Size of the proof payload, excluding the backend tag and labeled timings.
    pub fn payload_len(&self) -> usize {
        match self {
            AggregationProof::Transparent { .. } => TRANSPARENT_PROOF_LEN,
            AggregationProof::Mock { .. } => MOCK_PROOF_LEN,
        }
    }

    pub(crate) fn transparent(r_agg: Scalar) -> Self {
        AggregationProof::Transparent { r_agg }
    }

    pub(crate) fn mock(alg: HashAlg, key: &KeyPair, statement_hash: &Digest, timings: &MockTimings) -> Self {
        let sig = key.sign(alg, &mock_message(statement_hash)).to_array();
        let mut bytes = [0u8; MOCK_PROOF_LEN];
        bytes[..64].copy_from_slice(&sig);
        bytes[64..96].copy_from_slice(statement_hash.as_bytes());
        let tag = Digest::of(alg, tags::MOCK_PROOF, &[&bytes[..96]]);
        bytes[96..].copy_from_slice(tag.as_bytes());
        AggregationProof::Mock {
            bytes,
            simulated_prove_ms: timings.prove_ms * timings.scale,
            simulated_verify_ms: timings.verify_ms,
        }
    }
}

fn mock_message(statement_hash: &Digest) -> Vec<u8> {
    [tags::MOCK_PROOF, statement_hash.as_bytes()].concat()
}

impl Encode for AggregationProof {
    fn encode(&self, w: &mut Writer) {
        w.put(&self.kind());
        match self {
            AggregationProof::Transparent { r_agg } => w.put(r_agg),
            AggregationProof::Mock {
                bytes,
                simulated_prove_ms,
                simulated_verify_ms,
            } => {
                w.put_raw(bytes);
                w.put_f64(*simulated_prove_ms);
                w.put_f64(*simulated_verify_ms);
            }
        }
    }
}

impl Decode for AggregationProof {
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        Ok(match r.get::<BackendKind>()? {
            BackendKind::Transparent => AggregationProof::Transparent { r_agg: r.get()? },
            BackendKind::Mock => AggregationProof::Mock {
                bytes: r.array()?,
                simulated_prove_ms: r.f64()?,
                simulated_verify_ms: r.f64()?,
            },
        })
    }
}

impl Message for AggregationProof {
    const TYPE: MessageType = MessageType::AggregationProof;
}

/// Public inputs a verifier needs besides the statement and proof.
#[derive(Debug, Clone, Copy)]
pub struct VerifyContext<'a> {
    pub policy: &'a AggregationPolicy,
    pub params: &'a PedersenParams,
    /// Registry snapshot the round was opened against.
    pub registry: &'a Registry,
    /// The round the statement must be about.
    pub header: &'a RoundHeader,
    /// Enclave attestation key; authenticates mock proofs.
    pub enclave_key: &'a PublicKey,
}

/// Why a statement/proof pair was rejected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyFailure {
    #[error("statement policy does not match the verifier's policy")]
    PolicyMismatch,
    #[error("statement is for a different round")]
    RoundMismatch,
    #[error("statement registry digest does not match the round snapshot")]
    RegistryMismatch,
    #[error("participants not in strict canonical order")]
    NotCanonical,
    #[error("participant {0} is not registered")]
    Unregistered(Digest),
    #[error("participant {0} has a weight outside the policy range")]
    BadWeight(Digest),
    #[error("{got} participants, quorum is {quorum}")]
    BelowQuorum { got: usize, quorum: u32 },
    #[error("total weight does not equal the sum of participant weights")]
    TotalWeight,
    #[error("aggregate has the wrong dimension or exceeds the aggregate bound")]
    AggregateShape,
    #[error("aggregate commitment is not the weighted sum of participant commitments")]
    AggregateCommitment,
    #[error("proof backend does not match the policy")]
    BackendMismatch,
    #[error("aggregate opening does not match the aggregate commitment")]
    Opening,
    #[error("mock proof tag is invalid")]
    MockTag,
}

/// Total: every malformed or inconsistent input returns `false`.
pub fn verify_aggregation(statement: &AggregationStatement, proof: &AggregationProof, ctx: &VerifyContext<'_>) -> bool {
    check_aggregation(statement, proof, ctx).is_ok()
}

/// [`verify_aggregation`] with the first failing predicate.
pub fn check_aggregation(
    statement: &AggregationStatement,
    proof: &AggregationProof,
    ctx: &VerifyContext<'_>,
) -> Result<(), VerifyFailure> {
    let policy = ctx.policy;
    let alg = policy.hash;
    if statement.policy_id != policy.id() || statement.header.policy_id != statement.policy_id {
        return Err(VerifyFailure::PolicyMismatch);
    }
    if statement.header != *ctx.header {
        return Err(VerifyFailure::RoundMismatch);
    }
    if statement.registry_digest != ctx.registry.digest(alg) {
        return Err(VerifyFailure::RegistryMismatch);
    }
    if !statement.is_canonical() {
        return Err(VerifyFailure::NotCanonical);
    }
    let mut total: u64 = 0;
    for p in &statement.participants {
        if !ctx.registry.contains(&p.client_id) {
            return Err(VerifyFailure::Unregistered(p.client_id));
        }
        if p.weight == 0 || p.weight > policy.max_weight() {
            return Err(VerifyFailure::BadWeight(p.client_id));
        }
        total += p.weight;
    }
    if statement.participants.len() < policy.quorum as usize
        || statement.participants.len() as u64 > policy.fixed_point.max_clients
    {
        return Err(VerifyFailure::BelowQuorum {
            got: statement.participants.len(),
            quorum: policy.quorum,
        });
    }
    if statement.total_weight != total {
        return Err(VerifyFailure::TotalWeight);
    }
    let bound = policy.fixed_point.aggregate_bound();
    if statement.aggregate.len() != policy.dimension() || statement.aggregate.iter().any(|v| v.unsigned_abs() > bound as u64) {
        return Err(VerifyFailure::AggregateShape);
    }
    let weights: Vec<Scalar> = statement.participants.iter().map(|p| Scalar::from_u64(p.weight)).collect();
    let commitments: Vec<Commitment> = statement.participants.iter().map(|p| p.commitment).collect();
    if Commitment::weighted_sum(&weights, &commitments) != statement.aggregate_commitment {
        return Err(VerifyFailure::AggregateCommitment);
    }
    if proof.kind() != policy.backend {
        return Err(VerifyFailure::BackendMismatch);
    }
    match proof {
        AggregationProof::Transparent { r_agg } => {
            let values = encode_to_scalars(&statement.aggregate);
            if !ctx.params.verify_opening(&statement.aggregate_commitment, &values, r_agg) {
                return Err(VerifyFailure::Opening);
            }
        }
        AggregationProof::Mock { bytes, .. } => {
            let statement_hash = statement.hash(alg);
            let tag = Digest::of(alg, tags::MOCK_PROOF, &[&bytes[..96]]);
            let sig_ok = Signature::from_slice(&bytes[..64])
                .is_some_and(|sig| ctx.enclave_key.verify(alg, &mock_message(&statement_hash), &sig));
            if !sig_ok || bytes[64..96] != statement_hash.0 || bytes[96..] != tag.0 {
                return Err(VerifyFailure::MockTag);
            }
        }
    }
    Ok(())
}
