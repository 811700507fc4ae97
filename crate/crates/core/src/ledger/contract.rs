use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::crypto::{tags, Digest, HashAlg, PedersenParams, PublicKey};
use crate::protocol::{
    check_aggregation, compute_anchor, submission_message, AggregationPolicy, AggregationProof, AggregationStatement,
    Attestation, EnclavePublicInfo, EnclaveReceipt, Registry, RoundHeader, VerifyContext,
};
use crate::wire::Writer;

use super::genesis::GenesisConfig;
use super::tx::{LedgerReject, Tx, TxBody};
use super::LedgerError;

/// Immutable record of a finalized round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalizedRound {
    pub round_t: u64,
    pub height: u64,
    pub statement_hash: Digest,
    pub model_hash: Digest,
    pub commitment_set_hash: Digest,
    pub participants: usize,
    pub proof_ok: bool,
}

/// Outcome of each FinalizeRound predicate, evaluated independently so an
/// auditor can report all of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalizeChecks {
    pub signature: bool,
    pub round: bool,
    pub quorum: bool,
    pub registry_gating: bool,
    pub proof: bool,
    /// Participants' anchors recompute to the on-chain anchors and every
    /// other on-chain anchor is covered by an enclave rejection receipt.
    pub commitment_set: bool,
    pub attestation: bool,
}

impl FinalizeChecks {
    pub fn first_failure(&self) -> Option<LedgerReject> {
        if !self.signature {
            Some(LedgerReject::BadSignature)
        } else if !self.round {
            Some(LedgerReject::StaleRound)
        } else if !self.quorum {
            Some(LedgerReject::BelowQuorum)
        } else if !self.registry_gating || !self.proof {
            Some(LedgerReject::ProofInvalid)
        } else if !self.commitment_set {
            Some(LedgerReject::AnchorMismatch)
        } else if !self.attestation {
            Some(LedgerReject::AttestationInvalid)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone)]
struct OpenRound {
    header: RoundHeader,
    snapshot: Registry,
}

/// What a successfully applied transaction did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Applied {
    Registered,
    Posted,
    /// The round was finalized; the block must be sealed next.
    Finalized(u64),
}

/// The verification contract: registry, per-round anchors, finalization.
#[derive(Debug, Clone)]
pub struct ContractState {
    alg: HashAlg,
    policy: AggregationPolicy,
    policy_id: Digest,
    params: Arc<PedersenParams>,
    enclave: EnclavePublicInfo,
    authority: PublicKey,
    operator: PublicKey,
    round_timeout: u64,
    registry: Registry,
    open: Option<OpenRound>,
    /// round → (client → anchor), canonical order.
    commitments: BTreeMap<u64, BTreeMap<Digest, Digest>>,
    seen_anchors: HashSet<Digest>,
    finalized: BTreeMap<u64, FinalizedRound>,
    model_hash: Digest,
    next_round: u64,
}

impl ContractState {
    pub fn new(genesis: &GenesisConfig) -> Result<Self, LedgerError> {
        genesis.validate()?;
        let params = genesis
            .policy
            .pedersen_params()
            .map_err(|e| LedgerError::InvalidGenesis(e.to_string()))?;
        let alg = genesis.policy.hash;
        let mut registry = Registry::new();
        for e in &genesis.initial_registry {
            registry.insert(e.public_key.id(alg), e.public_key);
        }
        Ok(Self {
            alg,
            policy_id: genesis.policy.id(),
            policy: genesis.policy.clone(),
            params: Arc::new(params),
            enclave: genesis.enclave.clone(),
            authority: genesis.authority_key,
            operator: genesis.operator_key,
            round_timeout: genesis.policy.round_timeout,
            registry,
            open: None,
            commitments: BTreeMap::new(),
            seen_anchors: HashSet::new(),
            finalized: BTreeMap::new(),
            model_hash: genesis.initial_model_hash,
            next_round: 1,
        })
    }

    pub fn params(&self) -> &Arc<PedersenParams> {
        &self.params
    }

    pub fn policy(&self) -> &AggregationPolicy {
        &self.policy
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn open_round(&self) -> Option<&RoundHeader> {
        self.open.as_ref().map(|o| &o.header)
    }

    /// Registry snapshot gating the open round.
    pub fn round_registry(&self) -> Option<&Registry> {
        self.open.as_ref().map(|o| &o.snapshot)
    }

    pub fn latest_model_hash(&self) -> Digest {
        self.model_hash
    }

    pub fn awaiting_next_round(&self) -> bool {
        self.open.is_none()
    }

    /// Opens round `next_round` with a nonce derived from `seed` (the hash
    /// of the block that closed the previous round, or of genesis).
    pub(crate) fn open_next_round(&mut self, seed: &[u8], now: u64) {
        let t = self.next_round;
        let nonce_digest = Digest::of(self.alg, tags::ROUND_NONCE, &[seed, &t.to_le_bytes()]);
        let mut round_nonce = [0u8; 16];
        round_nonce.copy_from_slice(&nonce_digest.0[..16]);
        self.open = Some(OpenRound {
            header: RoundHeader {
                round_t: t,
                round_nonce,
                policy_id: self.policy_id,
                prev_model_hash: self.model_hash,
                deadline: now + self.round_timeout,
            },
            snapshot: self.registry.clone(),
        });
        self.commitments.entry(t).or_default();
    }

    /// Anchors posted for round `t`, in canonical client order.
    pub fn commitments(&self, round_t: u64) -> Result<Vec<(Digest, Digest)>, LedgerError> {
        self.commitments
            .get(&round_t)
            .map(|m| m.iter().map(|(c, a)| (*c, *a)).collect())
            .ok_or(LedgerError::UnknownRound(round_t))
    }

    pub fn finalized(&self, round_t: u64) -> Result<&FinalizedRound, LedgerError> {
        self.finalized.get(&round_t).ok_or(LedgerError::UnknownRound(round_t))
    }

    pub fn finalized_rounds(&self) -> impl Iterator<Item = &FinalizedRound> {
        self.finalized.values()
    }

    pub fn apply(&mut self, tx: &Tx, now: u64, height: u64) -> Result<Applied, LedgerReject> {
        match &tx.body {
            TxBody::RegisterIdentity { public_key, .. } => {
                if !tx.verify(self.alg, &self.authority) {
                    return Err(LedgerReject::BadSignature);
                }
                if !self.registry.insert(public_key.id(self.alg), *public_key) {
                    return Err(LedgerReject::AlreadyRegistered);
                }
                Ok(Applied::Registered)
            }
            TxBody::PostCommitment {
                client_id,
                round_t,
                anchor,
                submission_signature,
            } => {
                let open = self.open.as_ref().ok_or(LedgerReject::StaleRound)?;
                let key = open.snapshot.get(client_id).ok_or(LedgerReject::UnknownIdentity)?;
                if !tx.verify(self.alg, key) {
                    return Err(LedgerReject::BadSignature);
                }
                if *round_t != open.header.round_t || now > open.header.deadline || self.seen_anchors.contains(anchor) {
                    return Err(LedgerReject::StaleRound);
                }
                if !key.verify(self.alg, &submission_message(&open.header, anchor), submission_signature) {
                    return Err(LedgerReject::BadSignature);
                }
                let anchors = self.commitments.entry(*round_t).or_default();
                if anchors.contains_key(client_id) {
                    return Err(LedgerReject::DuplicateCommitment);
                }
                anchors.insert(*client_id, *anchor);
                self.seen_anchors.insert(*anchor);
                Ok(Applied::Posted)
            }
            TxBody::FinalizeRound {
                statement,
                model_hash,
                ..
            } => {
                let checks = self.finalize_checks(tx);
                if let Some(reason) = checks.first_failure() {
                    return Err(reason);
                }
                let t = statement.header.round_t;
                self.finalized.insert(
                    t,
                    FinalizedRound {
                        round_t: t,
                        height,
                        statement_hash: statement.hash(self.alg),
                        model_hash: *model_hash,
                        commitment_set_hash: self.anchor_set_hash(statement),
                        participants: statement.participants.len(),
                        proof_ok: true,
                    },
                );
                self.model_hash = *model_hash;
                self.open = None;
                self.next_round = t + 1;
                Ok(Applied::Finalized(t))
            }
        }
    }

    /// Evaluates every FinalizeRound predicate against the current state.
    /// Non-finalize transactions fail every check.
    pub fn finalize_checks(&self, tx: &Tx) -> FinalizeChecks {
        let mut c = FinalizeChecks {
            signature: false,
            round: false,
            quorum: false,
            registry_gating: false,
            proof: false,
            commitment_set: false,
            attestation: false,
        };
        let TxBody::FinalizeRound {
            statement,
            proof,
            attestation,
            receipts,
            ..
        } = &tx.body
        else {
            return c;
        };
        c.signature = tx.verify(self.alg, &self.operator);
        let Some(open) = &self.open else {
            return c;
        };
        c.round = statement.header == open.header;
        c.quorum = statement.participants.len() >= self.policy.quorum as usize;
        c.registry_gating = statement
            .participants
            .iter()
            .all(|p| open.snapshot.contains(&p.client_id));
        c.proof = self.verify_proof(statement, proof, &open.header, &open.snapshot);
        c.commitment_set = self.commitment_set_consistent(statement, receipts, &open.header);
        c.attestation = self.verify_attestation(attestation, statement);
        c
    }

    fn verify_proof(
        &self,
        statement: &AggregationStatement,
        proof: &AggregationProof,
        header: &RoundHeader,
        snapshot: &Registry,
    ) -> bool {
        let ctx = VerifyContext {
            policy: &self.policy,
            params: &self.params,
            registry: snapshot,
            header,
            enclave_key: &self.enclave.attestation_key,
        };
        check_aggregation(statement, proof, &ctx).is_ok()
    }

    fn verify_attestation(&self, attestation: &Attestation, statement: &AggregationStatement) -> bool {
        attestation.verify(self.alg, &self.enclave.attestation_key, &self.enclave.measurement, statement)
    }

    fn commitment_set_consistent(
        &self,
        statement: &AggregationStatement,
        receipts: &[EnclaveReceipt],
        header: &RoundHeader,
    ) -> bool {
        let empty = BTreeMap::new();
        let on_chain = self.commitments.get(&header.round_t).unwrap_or(&empty);
        let mut covered: HashSet<Digest> = HashSet::new();
        for p in &statement.participants {
            let anchor = compute_anchor(self.alg, &p.commitment, p.weight, header);
            if on_chain.get(&p.client_id) != Some(&anchor) {
                return false;
            }
            covered.insert(p.client_id);
        }
        for r in receipts {
            if r.round_t == header.round_t
                && r.rejection().is_some()
                && on_chain.get(&r.client_id) == Some(&r.anchor)
                && !covered.contains(&r.client_id)
                && r.verify(self.alg, &self.enclave.attestation_key)
            {
                covered.insert(r.client_id);
            }
        }
        on_chain.keys().all(|c| covered.contains(c))
    }

    /// Digest of the participants' recomputed anchors in canonical order.
    pub fn anchor_set_hash(&self, statement: &AggregationStatement) -> Digest {
        let mut w = Writer::new();
        w.put_len(statement.participants.len());
        for p in &statement.participants {
            w.put(&p.client_id);
            w.put(&compute_anchor(self.alg, &p.commitment, p.weight, &statement.header));
        }
        Digest::of(self.alg, tags::COMMITMENT_SET, &[&w.into_bytes()])
    }
}
