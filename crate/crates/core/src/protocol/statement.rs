use serde::{Deserialize, Serialize};

use crate::crypto::{tags, Commitment, Digest, HashAlg};
use crate::wire::{Decode, Encode, Message, MessageType, Reader, WireError, Writer};

use super::messages::RoundHeader;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Participant {
    pub client_id: Digest,
    pub commitment: Commitment,
    pub weight: u64,
}

impl Encode for Participant {
    fn encode(&self, w: &mut Writer) {
        w.put(&self.client_id);
        w.put(&self.commitment);
        w.put_u64(self.weight);
    }
}

impl Decode for Participant {
    const MIN_ENCODED_LEN: usize = 72;
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        Ok(Participant {
            client_id: r.get()?,
            commitment: r.get()?,
            weight: r.u64()?,
        })
    }
}

/// Public claim: `aggregate` is the weighted sum of the updates behind
/// exactly these commitments, under `policy_id`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregationStatement {
    pub header: RoundHeader,
    /// Sorted by `client_id`.
    pub participants: Vec<Participant>,
    pub total_weight: u64,
    /// `Δ_q = Σ nᵢ·qᵢ` over the integers.
    pub aggregate: Vec<i64>,
    pub aggregate_commitment: Commitment,
    pub policy_id: Digest,
    /// Registry snapshot the participants were checked against.
    pub registry_digest: Digest,
}

impl AggregationStatement {
    /// Sorts participants into canonical order.
    pub fn canonicalize(&mut self) {
        self.participants.sort_by_key(|p| p.client_id);
    }

    pub fn is_canonical(&self) -> bool {
        self.participants
            .windows(2)
            .all(|w| w[0].client_id < w[1].client_id)
    }

    pub fn hash(&self, alg: HashAlg) -> Digest {
        Digest::of(alg, tags::STATEMENT, &[&self.to_bytes()])
    }

    /// Digest of the participant list alone; what an auditor compares
    /// against the on-chain anchors.
    pub fn commitment_set_hash(&self, alg: HashAlg) -> Digest {
        let mut w = Writer::new();
        w.put_seq(&self.participants);
        Digest::of(alg, tags::COMMITMENT_SET, &[&w.into_bytes()])
    }
}

impl Encode for AggregationStatement {
    fn encode(&self, w: &mut Writer) {
        w.put(&self.header);
        w.put_seq(&self.participants);
        w.put_u64(self.total_weight);
        w.put_seq(&self.aggregate);
        w.put(&self.aggregate_commitment);
        w.put(&self.policy_id);
        w.put(&self.registry_digest);
    }
}

impl Decode for AggregationStatement {
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        Ok(AggregationStatement {
            header: r.get()?,
            participants: r.seq()?,
            total_weight: r.u64()?,
            aggregate: r.seq()?,
            aggregate_commitment: r.get()?,
            policy_id: r.get()?,
            registry_digest: r.get()?,
        })
    }
}

impl Message for AggregationStatement {
    const TYPE: MessageType = MessageType::AggregationStatement;
}
