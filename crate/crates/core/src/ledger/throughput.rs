use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::crypto::{Commitment, Digest, GroupElement, HashAlg, KeyPair, Scalar};
use crate::encoding::FixedPointConfig;
use crate::protocol::{
    compute_anchor, enclave_measurement, submission_message, AggregationPolicy, BackendKind, EnclaveKeys,
    EnclavePublicInfo, ENCLAVE_CODE_VERSION,
};

use super::genesis::{GenesisConfig, RegistryEntry, GENESIS_SCHEMA_VERSION};
use super::tx::{Tx, TxBody};
use super::Ledger;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThroughputWorkload {
    /// PostCommitment transactions, one per registered client.
    pub posts: usize,
    pub block_interval: u64,
    pub seed: u64,
}

/// Machine-dependent measurement, not a pass/fail quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThroughputReport {
    pub txs: usize,
    pub tps: f64,
    /// Logical ticks from the last sealed block to the one including the workload.
    pub finality_ticks: u64,
    /// Wall-clock time to seal the block holding the workload.
    pub seal_ms: f64,
}

pub fn measure_throughput(w: &ThroughputWorkload) -> ThroughputReport {
    let alg = HashAlg::Sha256;
    let clients: Vec<KeyPair> = (0..w.posts)
        .map(|i| KeyPair::from_seed(&[&w.seed.to_le_bytes()[..], &(i as u64).to_le_bytes()].concat()))
        .collect();
    let policy = AggregationPolicy {
        hash: alg,
        fixed_point: FixedPointConfig::new(1, (w.posts as u64).max(1), 1).expect("tiny config fits"),
        param_seed: "throughput".into(),
        norm_bound: 1,
        quorum: 1,
        round_timeout: w.block_interval.max(1) * 4,
        backend: BackendKind::Transparent,
    };
    let enclave = EnclaveKeys::from_seed(b"throughput");
    let authority = KeyPair::from_seed(b"throughput/authority");
    let genesis = GenesisConfig {
        schema_version: GENESIS_SCHEMA_VERSION,
        chain_id: "throughput".into(),
        enclave: EnclavePublicInfo {
            code_version: ENCLAVE_CODE_VERSION.into(),
            measurement: enclave_measurement(alg, ENCLAVE_CODE_VERSION, &policy.id()),
            sealing_key: enclave.sealing_public(),
            attestation_key: enclave.attestation_public(),
        },
        policy,
        authority_key: authority.public(),
        operator_key: authority.public(),
        initial_registry: clients
            .iter()
            .map(|k| RegistryEntry {
                public_key: k.public(),
                metadata: String::new(),
            })
            .collect(),
        initial_model_hash: Digest::ZERO,
        block_interval: w.block_interval.max(1),
    };
    let mut ledger = Ledger::new(genesis).expect("generated genesis is valid");
    let header = ledger.open_round().expect("round 1 is open").clone();
    let txs: Vec<Tx> = clients
        .iter()
        .enumerate()
        .map(|(i, k)| {
            let commitment = Commitment(GroupElement::mul_base(&Scalar::from_u64(i as u64 + 1)));
            let anchor = compute_anchor(alg, &commitment, 1, &header);
            let body = TxBody::PostCommitment {
                client_id: k.public().id(alg),
                round_t: header.round_t,
                anchor,
                submission_signature: k.sign(alg, &submission_message(&header, &anchor)),
            };
            Tx::sign(alg, k, body)
        })
        .collect();
    let last_sealed = ledger.tip().timestamp;
    let start = Instant::now();
    let accepted = txs.into_iter().filter_map(|tx| ledger.submit_tx(tx).ok()).count();
    let submit_secs = start.elapsed().as_secs_f64();
    let seal_start = Instant::now();
    let sealed_at = ledger.seal_block().timestamp;
    let seal_ms = seal_start.elapsed().as_secs_f64() * 1e3;
    ThroughputReport {
        txs: accepted,
        tps: if accepted == 0 { 0.0 } else { accepted as f64 / submit_secs },
        finality_ticks: sealed_at - last_sealed,
        seal_ms,
    }
}
