//! Front end for experiments: verified training runs with a plain FedAvg
//! shadow, the attack suite, chain audits and cost benchmarks.
//!
//! Every command writes into an output directory with a manifest that
//! records the configuration, the seed, a code-version digest and the
//! SHA-256 of every file written.

pub mod artifacts;
pub mod attack;
pub mod audit;
pub mod bench;
pub mod config;
pub mod run;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{ExperimentConfig, Overrides, EXPERIMENT_SCHEMA_VERSION};

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const CONFIG_INVALID: u8 = 2;
    pub const ROUND_FAILED: u8 = 3;
    pub const ATTACK_FAILED: u8 = 4;
    pub const AUDIT_FAILED: u8 = 5;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config invalid: {0}")]
    Config(String),
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            // Unreadable inputs are configuration errors; unwritable outputs too,
            // since the output directory is part of the configuration.
            CliError::Config(_) | CliError::Read { .. } | CliError::Write { .. } => exit::CONFIG_INVALID,
        }
    }
}
