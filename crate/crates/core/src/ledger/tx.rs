use std::fmt;

use serde::{Deserialize, Serialize};

use crate::crypto::{tags, Digest, HashAlg, KeyPair, PublicKey, Signature};
use crate::protocol::{AggregationProof, AggregationStatement, Attestation, EnclaveReceipt};
use crate::wire::{Decode, Encode, Message, MessageType, Reader, WireError, Writer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LedgerReject {
    AlreadyRegistered,
    UnknownIdentity,
    DuplicateCommitment,
    StaleRound,
    BadSignature,
    ProofInvalid,
    AnchorMismatch,
    AttestationInvalid,
    BelowQuorum,
}

impl LedgerReject {
    pub const ALL: [LedgerReject; 9] = [
        LedgerReject::AlreadyRegistered,
        LedgerReject::UnknownIdentity,
        LedgerReject::DuplicateCommitment,
        LedgerReject::StaleRound,
        LedgerReject::BadSignature,
        LedgerReject::ProofInvalid,
        LedgerReject::AnchorMismatch,
        LedgerReject::AttestationInvalid,
        LedgerReject::BelowQuorum,
    ];

    pub fn code(self) -> &'static str {
        match self {
            LedgerReject::AlreadyRegistered => "already-registered",
            LedgerReject::UnknownIdentity => "unknown-identity",
            LedgerReject::DuplicateCommitment => "duplicate-commitment",
            LedgerReject::StaleRound => "stale-round",
            LedgerReject::BadSignature => "bad-signature",
            LedgerReject::ProofInvalid => "proof-invalid",
            LedgerReject::AnchorMismatch => "anchor-mismatch",
            LedgerReject::AttestationInvalid => "attestation-invalid",
            LedgerReject::BelowQuorum => "below-quorum",
        }
    }
}

impl fmt::Display for LedgerReject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "status", content = "reason")]
pub enum TxOutcome {
    Accepted,
    Rejected(LedgerReject),
}

impl Encode for TxOutcome {
    fn encode(&self, w: &mut Writer) {
        match self {
            TxOutcome::Accepted => w.put_u8(0),
            TxOutcome::Rejected(r) => w.put_u8(1 + *r as u8),
        }
    }
}

impl Decode for TxOutcome {
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        match r.u8()? {
            0 => Ok(TxOutcome::Accepted),
            tag => LedgerReject::ALL
                .get(tag as usize - 1)
                .map(|&reason| TxOutcome::Rejected(reason))
                .ok_or(WireError::InvalidTag { what: "tx outcome", tag }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TxBody {
    RegisterIdentity {
        public_key: PublicKey,
        metadata: String,
    },
    PostCommitment {
        client_id: Digest,
        round_t: u64,
        anchor: Digest,
        /// The client's signature over `header ‖ anchor`.
        submission_signature: Signature,
    },
    FinalizeRound {
        statement: AggregationStatement,
        proof: AggregationProof,
        attestation: Attestation,
        model_hash: Digest,
        /// Enclave rejection receipts justifying anchored clients that are
        /// not participants.
        receipts: Vec<EnclaveReceipt>,
    },
}

impl TxBody {
    pub fn kind(&self) -> &'static str {
        match self {
            TxBody::RegisterIdentity { .. } => "register-identity",
            TxBody::PostCommitment { .. } => "post-commitment",
            TxBody::FinalizeRound { .. } => "finalize-round",
        }
    }

    fn tag(&self) -> u8 {
        match self {
            TxBody::RegisterIdentity { .. } => 0,
            TxBody::PostCommitment { .. } => 1,
            TxBody::FinalizeRound { .. } => 2,
        }
    }
}

impl Encode for TxBody {
    fn encode(&self, w: &mut Writer) {
        w.put_u8(self.tag());
        match self {
            TxBody::RegisterIdentity { public_key, metadata } => {
                w.put(public_key);
                w.put_str(metadata);
            }
            TxBody::PostCommitment {
                client_id,
                round_t,
                anchor,
                submission_signature,
            } => {
                w.put(client_id);
                w.put_u64(*round_t);
                w.put(anchor);
                w.put(submission_signature);
            }
            TxBody::FinalizeRound {
                statement,
                proof,
                attestation,
                model_hash,
                receipts,
            } => {
                w.put(statement);
                w.put(proof);
                w.put(attestation);
                w.put(model_hash);
                w.put_seq(receipts);
            }
        }
    }
}

impl Decode for TxBody {
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        Ok(match r.u8()? {
            0 => TxBody::RegisterIdentity {
                public_key: r.get()?,
                metadata: r.string()?,
            },
            1 => TxBody::PostCommitment {
                client_id: r.get()?,
                round_t: r.u64()?,
                anchor: r.get()?,
                submission_signature: r.get()?,
            },
            2 => TxBody::FinalizeRound {
                statement: r.get()?,
                proof: r.get()?,
                attestation: r.get()?,
                model_hash: r.get()?,
                receipts: r.seq()?,
            },
            tag => return Err(WireError::InvalidTag { what: "tx body", tag }),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tx {
    pub body: TxBody,
    /// Submitter signature: the authority for registrations, the client for
    /// commitments, the operator for finalizations.
    pub signature: Signature,
}

impl Tx {
    pub fn signed_bytes(body: &TxBody) -> Vec<u8> {
        let mut w = Writer::new();
        w.put_raw(tags::TX);
        w.put(body);
        w.into_bytes()
    }

    pub fn sign(alg: HashAlg, signer: &KeyPair, body: TxBody) -> Self {
        let signature = signer.sign(alg, &Self::signed_bytes(&body));
        Tx { body, signature }
    }

    pub fn verify(&self, alg: HashAlg, key: &PublicKey) -> bool {
        key.verify(alg, &Self::signed_bytes(&self.body), &self.signature)
    }

    pub fn hash(&self, alg: HashAlg) -> Digest {
        Digest::of(alg, tags::TX, &[&self.to_bytes()])
    }
}

impl Encode for Tx {
    fn encode(&self, w: &mut Writer) {
        w.put(&self.body);
        w.put(&self.signature);
    }
}

impl Decode for Tx {
    const MIN_ENCODED_LEN: usize = 65;
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        Ok(Tx {
            body: r.get()?,
            signature: r.get()?,
        })
    }
}

impl Message for Tx {
    const TYPE: MessageType = MessageType::Tx;
}
