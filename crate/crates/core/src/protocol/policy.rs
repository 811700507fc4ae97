use serde::{Deserialize, Serialize};

use crate::crypto::{tags, Digest, HashAlg, PedersenParams};
use crate::encoding::FixedPointConfig;
use crate::wire::{Decode, Encode, Reader, WireError, Writer};

use super::proof::BackendKind;
use super::ProtocolError;

/// Everything verifiers must agree on for a round to be checkable.
///
/// Aggregation weights are the clients' declared dataset sizes, bounded by
/// `fixed_point.max_weight`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationPolicy {
    #[serde(default)]
    pub hash: HashAlg,
    pub fixed_point: FixedPointConfig,
    /// Seed for the commitment generators.
    pub param_seed: String,
    /// Largest admissible L2 norm of a quantized update (quantized units).
    pub norm_bound: u64,
    /// Minimum accepted participants for a round to finalize.
    pub quorum: u32,
    /// Ticks between a round opening and its submission deadline.
    pub round_timeout: u64,
    pub backend: BackendKind,
}

impl AggregationPolicy {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        let bad = |m: &str| Err(ProtocolError::InvalidPolicy(m.to_string()));
        if self.fixed_point.hash != self.hash {
            return bad("fixed-point config must use the policy hash");
        }
        self.fixed_point
            .clone()
            .validated()
            .map_err(|e| ProtocolError::InvalidPolicy(e.to_string()))?;
        if self.quorum == 0 {
            return bad("quorum must be at least 1");
        }
        if self.quorum as u64 > self.fixed_point.max_clients {
            return bad("quorum exceeds max_clients");
        }
        if self.norm_bound == 0 {
            return bad("norm_bound must be positive");
        }
        if self.round_timeout == 0 {
            return bad("round_timeout must be positive");
        }
        Ok(())
    }

    pub fn id(&self) -> Digest {
        Digest::of(self.hash, tags::POLICY, &[&self.to_bytes()])
    }

    pub fn dimension(&self) -> usize {
        self.fixed_point.dimension
    }

    pub fn max_weight(&self) -> u64 {
        self.fixed_point.max_weight
    }

    pub fn norm_bound_squared(&self) -> u128 {
        let b = self.norm_bound as u128;
        b * b
    }

    pub fn pedersen_params(&self) -> Result<PedersenParams, ProtocolError> {
        Ok(PedersenParams::setup_with(
            self.hash,
            self.dimension(),
            self.param_seed.as_bytes(),
        )?)
    }
}

impl Encode for AggregationPolicy {
    fn encode(&self, w: &mut Writer) {
        w.put(&self.hash);
        w.put(&self.fixed_point);
        w.put_str(&self.param_seed);
        w.put_u64(self.norm_bound);
        w.put_u32(self.quorum);
        w.put_u64(self.round_timeout);
        w.put(&self.backend);
    }
}

impl Decode for AggregationPolicy {
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        Ok(AggregationPolicy {
            hash: r.get()?,
            fixed_point: r.get()?,
            param_seed: r.string()?,
            norm_bound: r.u64()?,
            quorum: r.u32()?,
            round_timeout: r.u64()?,
            backend: r.get()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn policy() -> AggregationPolicy {
        AggregationPolicy {
            hash: HashAlg::Sha256,
            fixed_point: FixedPointConfig::new(8, 16, 10_000).unwrap(),
            param_seed: "zkfl-v1".into(),
            norm_bound: 1 << 18,
            quorum: 2,
            round_timeout: 10,
            backend: BackendKind::Transparent,
        }
    }

    #[test]
    fn id_is_canonical_and_sensitive() {
        let p = policy();
        assert_eq!(p.id(), policy().id());
        let mut q = policy();
        q.quorum = 3;
        assert_ne!(p.id(), q.id());
        assert_eq!(AggregationPolicy::from_bytes(&p.to_bytes()).unwrap(), p);
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<AggregationPolicy>(&json).unwrap().id(), p.id());
    }

    #[test]
    fn validation() {
        assert!(policy().validate().is_ok());
        let mut p = policy();
        p.quorum = 0;
        assert!(p.validate().is_err());
        let mut p = policy();
        p.quorum = 17;
        assert!(p.validate().is_err());
        let mut p = policy();
        p.hash = HashAlg::Sha512_256;
        assert!(p.validate().is_err());
    }
}
