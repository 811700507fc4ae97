use serde::{Deserialize, Serialize};

use crate::crypto::{tags, Digest, PublicKey};
use crate::protocol::{enclave_measurement, AggregationPolicy, EnclavePublicInfo};
use crate::wire::{Encode, Writer};

use super::LedgerError;

pub const GENESIS_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub public_key: PublicKey,
    #[serde(default)]
    pub metadata: String,
}

/// Everything a replaying auditor needs to reconstruct the chain's initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenesisConfig {
    pub schema_version: u32,
    pub chain_id: String,
    pub policy: AggregationPolicy,
    pub enclave: EnclavePublicInfo,
    /// Signs identity registrations.
    pub authority_key: PublicKey,
    /// Signs round finalizations on behalf of the aggregator.
    pub operator_key: PublicKey,
    pub initial_registry: Vec<RegistryEntry>,
    pub initial_model_hash: Digest,
    /// Logical ticks between consecutive blocks.
    pub block_interval: u64,
}

impl GenesisConfig {
    pub fn validate(&self) -> Result<(), LedgerError> {
        let bad = |m: String| Err(LedgerError::InvalidGenesis(m));
        if self.schema_version != GENESIS_SCHEMA_VERSION {
            return bad(format!("unsupported schema_version {}", self.schema_version));
        }
        self.policy
            .validate()
            .map_err(|e| LedgerError::InvalidGenesis(e.to_string()))?;
        let expected = enclave_measurement(self.policy.hash, &self.enclave.code_version, &self.policy.id());
        if self.enclave.measurement != expected {
            return bad("enclave measurement does not match code version and policy".into());
        }
        if self.block_interval == 0 {
            return bad("block_interval must be positive".into());
        }
        let mut ids: Vec<Digest> = self
            .initial_registry
            .iter()
            .map(|e| e.public_key.id(self.policy.hash))
            .collect();
        ids.sort();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return bad("initial registry lists a key twice".into());
        }
        Ok(())
    }

    pub fn hash(&self) -> Digest {
        Digest::of(self.policy.hash, tags::GENESIS, &[&self.to_bytes()])
    }

    pub fn from_json(text: &str) -> Result<Self, LedgerError> {
        let g: GenesisConfig = serde_json::from_str(text).map_err(|e| LedgerError::InvalidGenesis(e.to_string()))?;
        g.validate()?;
        Ok(g)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("genesis serializes")
    }
}

impl Encode for GenesisConfig {
    fn encode(&self, w: &mut Writer) {
        w.put_u32(self.schema_version);
        w.put_str(&self.chain_id);
        w.put(&self.policy);
        w.put_str(&self.enclave.code_version);
        w.put(&self.enclave.measurement);
        w.put(&self.enclave.sealing_key);
        w.put(&self.enclave.attestation_key);
        w.put(&self.authority_key);
        w.put(&self.operator_key);
        w.put_len(self.initial_registry.len());
        for e in &self.initial_registry {
            w.put(&e.public_key);
            w.put_str(&e.metadata);
        }
        w.put(&self.initial_model_hash);
        w.put_u64(self.block_interval);
    }
}
