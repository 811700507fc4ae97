use serde::{Deserialize, Serialize};

use crate::crypto::{hash_commit, tags, Commitment, Digest, HashAlg, Signature};
use crate::wire::{Decode, Encode, Message, MessageType, Reader, WireError, Writer};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundHeader {
    pub round_t: u64,
    #[serde(with = "crate::hexser")]
    pub round_nonce: [u8; 16],
    pub policy_id: Digest,
    pub prev_model_hash: Digest,
    /// Logical tick after which submissions for this round are stale.
    pub deadline: u64,
}

impl Encode for RoundHeader {
    fn encode(&self, w: &mut Writer) {
        w.put_u64(self.round_t);
        w.put_raw(&self.round_nonce);
        w.put(&self.policy_id);
        w.put(&self.prev_model_hash);
        w.put_u64(self.deadline);
    }
}

impl Decode for RoundHeader {
    const MIN_ENCODED_LEN: usize = 8 + 16 + 32 + 32 + 8;
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        Ok(RoundHeader {
            round_t: r.u64()?,
            round_nonce: r.array()?,
            policy_id: r.get()?,
            prev_model_hash: r.get()?,
            deadline: r.u64()?,
        })
    }
}

impl Message for RoundHeader {
    const TYPE: MessageType = MessageType::RoundHeader;
}

/// The on-chain anchor: a hash commitment over the Pedersen commitment and
/// declared weight, keyed by the round identifier and nonce.
pub fn compute_anchor(alg: HashAlg, commitment: &Commitment, weight: u64, header: &RoundHeader) -> Digest {
    let mut payload = commitment.to_bytes().to_vec();
    payload.extend_from_slice(&weight.to_le_bytes());
    let mut nonce = header.round_t.to_le_bytes().to_vec();
    nonce.extend_from_slice(&header.round_nonce);
    hash_commit(alg, &payload, &nonce, tags::COMMIT_ANCHOR).expect("anchor tag is non-empty")
}

/// Bytes a client signs: `header ‖ anchor`.
pub fn submission_message(header: &RoundHeader, anchor: &Digest) -> Vec<u8> {
    let mut w = Writer::new();
    w.put(header);
    w.put(anchor);
    w.into_bytes()
}

/// Additional data binding a sealed payload to its sender, round and anchor.
pub(crate) fn seal_aad(client_id: &Digest, round_t: u64, anchor: &Digest) -> Vec<u8> {
    let mut aad = client_id.as_bytes().to_vec();
    aad.extend_from_slice(&round_t.to_le_bytes());
    aad.extend_from_slice(anchor.as_bytes());
    aad
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientSubmission {
    pub client_id: Digest,
    pub round_t: u64,
    /// Declared dataset size, used as the aggregation weight.
    pub weight: u64,
    pub commitment: Commitment,
    pub anchor: Digest,
    /// Quantized update and blinding, encrypted to the enclave.
    #[serde(with = "crate::hexser")]
    pub sealed_payload: Vec<u8>,
    pub signature: Signature,
}

impl Encode for ClientSubmission {
    fn encode(&self, w: &mut Writer) {
        w.put(&self.client_id);
        w.put_u64(self.round_t);
        w.put_u64(self.weight);
        w.put(&self.commitment);
        w.put(&self.anchor);
        w.put_bytes(&self.sealed_payload);
        w.put(&self.signature);
    }
}

impl Decode for ClientSubmission {
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        Ok(ClientSubmission {
            client_id: r.get()?,
            round_t: r.u64()?,
            weight: r.u64()?,
            commitment: r.get()?,
            anchor: r.get()?,
            sealed_payload: r.bytes()?.to_vec(),
            signature: r.get()?,
        })
    }
}

impl Message for ClientSubmission {
    const TYPE: MessageType = MessageType::ClientSubmission;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{GroupElement, Scalar};

    fn header(t: u64, nonce: u8) -> RoundHeader {
        RoundHeader {
            round_t: t,
            round_nonce: [nonce; 16],
            policy_id: Digest([1; 32]),
            prev_model_hash: Digest([2; 32]),
            deadline: 99,
        }
    }

    #[test]
    fn anchor_binds_round_nonce_weight_and_commitment() {
        let c = Commitment(GroupElement::mul_base(&Scalar::from_u64(5)));
        let a = compute_anchor(HashAlg::Sha256, &c, 10, &header(1, 0));
        assert_ne!(a, compute_anchor(HashAlg::Sha256, &c, 10, &header(2, 0)));
        assert_ne!(a, compute_anchor(HashAlg::Sha256, &c, 10, &header(1, 1)));
        assert_ne!(a, compute_anchor(HashAlg::Sha256, &c, 11, &header(1, 0)));
        let c2 = Commitment(GroupElement::mul_base(&Scalar::from_u64(6)));
        assert_ne!(a, compute_anchor(HashAlg::Sha256, &c2, 10, &header(1, 0)));
    }

    #[test]
    fn header_frame_round_trip() {
        let h = header(7, 3);
        let frame = h.to_frame();
        assert_eq!(frame[0], crate::wire::PROTOCOL_VERSION);
        assert_eq!(frame[1], MessageType::RoundHeader as u8);
        assert_eq!(RoundHeader::from_frame(&frame).unwrap(), h);
        assert!(ClientSubmission::from_frame(&frame).is_err());
        let json = serde_json::to_string(&h).unwrap();
        assert_eq!(serde_json::from_str::<RoundHeader>(&json).unwrap(), h);
    }
}
