//! Output directory handling and the run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Digest identifying the code that produced an artifact set.
pub fn code_version_digest() -> String {
    let id = format!(
        "zkfl-cli/{}+{}",
        env!("CARGO_PKG_VERSION"),
        zkfl_core::protocol::ENCLAVE_CODE_VERSION
    );
    hex::encode(Sha256::digest(id.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    pub code_version: String,
    pub code_version_digest: String,
    pub config: serde_json::Value,
    /// File name → SHA-256 (hex) of its contents.
    pub files: BTreeMap<String, String>,
    /// Free-form notes, e.g. which timings are replayed rather than measured.
    pub notes: Vec<String>,
}

/// An output directory that remembers the hash of everything written to it.
pub struct ArtifactDir {
    dir: PathBuf,
    files: BTreeMap<String, String>,
}

impl ArtifactDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Write {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: BTreeMap::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.path(name);
        std::fs::write(&path, bytes).map_err(|source| CliError::Write { path, source })?;
        self.files.insert(name.to_string(), hex::encode(Sha256::digest(bytes)));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("artifact serializes");
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Writes the manifest last, covering every file written before it.
    pub fn finish(
        self,
        command: &str,
        seed: u64,
        config: &impl Serialize,
        notes: Vec<String>,
    ) -> Result<Manifest, CliError> {
        let manifest = Manifest {
            command: command.to_string(),
            seed,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            code_version_digest: code_version_digest(),
            config: serde_json::to_value(config).expect("config serializes"),
            files: self.files,
            notes,
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        let path = self.dir.join(MANIFEST_FILE);
        std::fs::write(&path, text).map_err(|source| CliError::Write { path, source })?;
        Ok(manifest)
    }
}
