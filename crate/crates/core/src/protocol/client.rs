use rand::{CryptoRng, RngCore};

use crate::crypto::{seal, Digest, PedersenParams, PublicKey, Scalar};
use crate::encoding::{encode_to_scalars, quantize, QuantizedUpdate};
use crate::fl::ModelParams;

use super::enclave::encode_payload;
use super::identity::ClientIdentity;
use super::messages::{compute_anchor, seal_aad, submission_message, ClientSubmission, RoundHeader};
use super::policy::AggregationPolicy;
use super::ProtocolError;

/// What a client needs to know about the round it is submitting to.
#[derive(Debug, Clone, Copy)]
pub struct SubmissionContext<'a> {
    pub policy: &'a AggregationPolicy,
    pub params: &'a PedersenParams,
    pub enclave_sealing_key: &'a PublicKey,
    /// The round the ledger currently has open.
    pub current_round: u64,
}

/// The client's own opening of its commitment. It leaves the client only
/// sealed to the enclave.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Opening {
    pub update: QuantizedUpdate,
    pub blinding: Scalar,
}

/// Quantizes, commits, seals and signs one update.
pub fn client_prepare_submission<R: RngCore + CryptoRng>(
    identity: &ClientIdentity,
    update: &[f64],
    weight: u64,
    header: &RoundHeader,
    ctx: &SubmissionContext<'_>,
    rng: &mut R,
) -> Result<ClientSubmission, ProtocolError> {
    client_prepare_with_opening(identity, update, weight, header, ctx, rng).map(|(s, _)| s)
}

/// [`client_prepare_submission`], also returning the opening the client keeps.
pub fn client_prepare_with_opening<R: RngCore + CryptoRng>(
    identity: &ClientIdentity,
    update: &[f64],
    weight: u64,
    header: &RoundHeader,
    ctx: &SubmissionContext<'_>,
    rng: &mut R,
) -> Result<(ClientSubmission, Opening), ProtocolError> {
    if !identity.registered {
        return Err(ProtocolError::NotRegistered);
    }
    if header.round_t != ctx.current_round {
        return Err(ProtocolError::StaleRound {
            header: header.round_t,
            current: ctx.current_round,
        });
    }
    if header.policy_id != ctx.policy.id() {
        return Err(ProtocolError::PolicyMismatch);
    }
    if weight == 0 || weight > ctx.policy.max_weight() {
        return Err(ProtocolError::WeightOutOfRange(weight));
    }
    let quantized = quantize(update, &ctx.policy.fixed_point, header.round_t)?;
    let blinding = Scalar::random(rng);
    let submission = submit_quantized(identity, &quantized, &blinding, weight, header, ctx, rng);
    Ok((
        submission,
        Opening {
            update: quantized,
            blinding,
        },
    ))
}

/// Builds a submission from an already-quantized update without policy
/// checks. Adversarial tests use this to craft out-of-policy inputs.
pub fn submit_quantized<R: RngCore + CryptoRng>(
    identity: &ClientIdentity,
    quantized: &QuantizedUpdate,
    blinding: &Scalar,
    weight: u64,
    header: &RoundHeader,
    ctx: &SubmissionContext<'_>,
    rng: &mut R,
) -> ClientSubmission {
    let alg = ctx.policy.hash;
    let commitment = ctx
        .params
        .commit(&encode_to_scalars(&quantized.values), blinding)
        .expect("quantized length equals the parameter dimension");
    let anchor = compute_anchor(alg, &commitment, weight, header);
    let aad = seal_aad(&identity.client_id, header.round_t, &anchor);
    let sealed_payload = seal(
        alg,
        rng,
        ctx.enclave_sealing_key,
        &aad,
        &encode_payload(quantized, blinding),
    );
    let signature = identity
        .keypair()
        .sign(alg, &submission_message(header, &anchor));
    ClientSubmission {
        client_id: identity.client_id,
        round_t: header.round_t,
        weight,
        commitment,
        anchor,
        sealed_payload,
        signature,
    }
}

/// Where clients look up finalized model hashes.
pub trait ModelHashSource {
    /// `Err(RoundNotFinalized)` unless round `round_t` is finalized.
    fn finalized_model_hash(&self, round_t: u64) -> Result<Digest, ProtocolError>;
}

/// True iff `model` hashes to the value recorded when `header`'s round was
/// finalized.
pub fn client_verify_distribution(
    header: &RoundHeader,
    model: &ModelParams,
    ledger: &dyn ModelHashSource,
    policy: &AggregationPolicy,
) -> Result<bool, ProtocolError> {
    let recorded = ledger.finalized_model_hash(header.round_t)?;
    Ok(model.hash(policy.hash) == recorded)
}
