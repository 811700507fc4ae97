//! Simulated permissioned ledger: hash-linked blocks, the verification
//! contract, and a full-replay auditor.
//!
//! Consensus is out of scope. [`Ledger`] is a deterministic single writer
//! behind the [`BlockProducer`] interface, with logical time in ticks.

mod audit;
mod block;
mod chain;
mod contract;
mod genesis;
mod scan;
mod throughput;
mod tx;

use thiserror::Error;

pub use audit::{audit_chain, read_chain, AuditFinding, AuditReport, FindingKind, RoundAudit};
pub use block::{write_frame, Block, TxRecord};
pub use chain::{BlockProducer, Ledger, TxReceipt};
pub use contract::{Applied, ContractState, FinalizeChecks, FinalizedRound};
pub use genesis::{GenesisConfig, RegistryEntry, GENESIS_SCHEMA_VERSION};
pub use scan::{scan_for_secrets, Leak, Secret, SecretKind, SCAN_WINDOW};
pub use throughput::{measure_throughput, ThroughputReport, ThroughputWorkload};
pub use tx::{LedgerReject, Tx, TxBody, TxOutcome};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("invalid genesis configuration: {0}")]
    InvalidGenesis(String),
    #[error("unknown round {0}")]
    UnknownRound(u64),
}
