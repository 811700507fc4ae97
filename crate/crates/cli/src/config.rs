use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use zkfl_core::adversary::SuiteConfig;
use zkfl_core::protocol::BackendKind;
use zkfl_core::session::FederationConfig;

use crate::bench::BenchConfig;
use crate::CliError;

pub const EXPERIMENT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub federation: FederationConfig,
    pub rounds: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attack: Option<SuiteConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bench: Option<BenchConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    /// Eight sites, a 128-parameter logistic model, twenty rounds.
    fn default() -> Self {
        Self {
            schema_version: EXPERIMENT_SCHEMA_VERSION,
            federation: FederationConfig::default(),
            rounds: 20,
            attack: None,
            bench: None,
            output_dir: None,
        }
    }
}

/// Command-line flags that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub backend: Option<BackendKind>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks the whole configuration before anything runs.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != EXPERIMENT_SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "schema_version {} is not supported (expected {EXPERIMENT_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.rounds == 0 {
            return Err(CliError::Config("rounds must be at least 1".into()));
        }
        self.federation
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(a) = &self.attack {
            if a.repetitions == 0 {
                return Err(CliError::Config("attack.repetitions must be at least 1".into()));
            }
        }
        if let Some(b) = &self.bench {
            b.validate()?;
        }
        Ok(())
    }

    pub fn apply(mut self, o: &Overrides) -> Result<Self, CliError> {
        if let Some(seed) = o.seed {
            self.federation.seed = seed;
        }
        if let Some(w) = o.workers {
            self.federation.workers = w;
        }
        if let Some(b) = o.backend {
            self.federation.backend = b;
        }
        if let Some(out) = &o.out {
            self.output_dir = Some(out.clone());
        }
        self.validate()?;
        Ok(self)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("zkfl-out"))
    }
}
