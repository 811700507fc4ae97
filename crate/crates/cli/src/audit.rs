//! `audit`: full replay of a persisted chain against its genesis.

use std::path::Path;

use zkfl_core::ledger::{audit_chain, AuditReport, GenesisConfig};

use crate::{exit, CliError};

pub fn audit_exit_code(report: &AuditReport) -> u8 {
    if report.chain_valid {
        exit::OK
    } else {
        exit::AUDIT_FAILED
    }
}

pub fn cmd_audit(chain: &Path, genesis: &Path) -> Result<AuditReport, CliError> {
    let read = |p: &Path| {
        std::fs::read(p).map_err(|source| CliError::Read {
            path: p.to_path_buf(),
            source,
        })
    };
    let chain_bytes = read(chain)?;
    let genesis_text = String::from_utf8(read(genesis)?)
        .map_err(|_| CliError::Config(format!("{} is not UTF-8", genesis.display())))?;
    let genesis = GenesisConfig::from_json(&genesis_text).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(audit_chain(&chain_bytes, &genesis))
}
