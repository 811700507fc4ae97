//! The protocol roles: clients commit, sign and seal updates; the enclave
//! validates, aggregates, proves and attests; anyone verifies.

mod client;
mod enclave;
mod identity;
mod messages;
mod policy;
mod proof;
mod statement;

use thiserror::Error;

use crate::crypto::CryptoError;
use crate::encoding::EncodingError;

pub use client::{
    client_prepare_submission, client_prepare_with_opening, client_verify_distribution, submit_quantized, ModelHashSource,
    Opening, SubmissionContext,
};
pub use enclave::{
    enclave_measurement, Attestation, Enclave, EnclaveError, EnclaveKeys, EnclavePublicInfo, EnclaveReceipt, IngestOutcome,
    ReceiptOutcome, RejectReason, RoundOutput, ENCLAVE_CODE_VERSION,
};
pub use identity::{ClientIdentity, Registry};
pub use messages::{compute_anchor, submission_message, ClientSubmission, RoundHeader};
pub use policy::AggregationPolicy;
pub use proof::{
    check_aggregation, verify_aggregation, AggregationProof, BackendKind, MockTimings, VerifyContext, VerifyFailure,
    MOCK_PROOF_LEN, TRANSPARENT_PROOF_LEN,
};
pub use statement::{AggregationStatement, Participant};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("identity is not registered")]
    NotRegistered,
    #[error("header is for round {header}, current round is {current}")]
    StaleRound { header: u64, current: u64 },
    #[error("header does not carry the active policy")]
    PolicyMismatch,
    #[error("weight {0} outside the policy range")]
    WeightOutOfRange(u64),
    #[error("round {0} is not finalized")]
    RoundNotFinalized(u64),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}
