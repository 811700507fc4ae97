//! `attack`: the threat-matrix suite.

use zkfl_core::adversary::{run_all, DetectionReport, SuiteReport};
use zkfl_core::session::DetectionLayer;

use crate::artifacts::{ArtifactDir, Manifest};
use crate::{exit, CliError, ExperimentConfig};

#[derive(Debug, Clone)]
pub struct AttackOutcome {
    pub report: SuiteReport,
    /// One line per run that did not behave as designated.
    pub diff: Vec<String>,
    pub manifest: Manifest,
}

impl AttackOutcome {
    pub fn exit_code(&self) -> u8 {
        if self.report.complete {
            exit::OK
        } else {
            exit::ATTACK_FAILED
        }
    }
}

fn describe(r: &DetectionReport) -> String {
    let expected = r.expected_layer.map_or("no detection", |l| l.name());
    let got = match (r.detected, r.detecting_layer) {
        (true, Some(l)) => format!(
            "{} ({})",
            l.name(),
            r.evidence.as_ref().map_or("", |e| e.reason.as_str())
        ),
        _ => "no detection".to_string(),
    };
    let mut line = format!("{} seed {}: expected {expected}, got {got}", r.scenario, r.rng_seed);
    if !r.honest_rounds_clean {
        line.push_str("; honest rounds were not clean");
    }
    if r.detected && r.expected_layer.is_some() && !r.reconfirmed {
        line.push_str("; evidence did not re-confirm from the chain");
    }
    line
}

/// Runs the configured suite. `self_test` ignores contract verification,
/// which must make the suite fail.
pub fn cmd_attack(cfg: &ExperimentConfig, self_test: bool) -> Result<AttackOutcome, CliError> {
    cfg.validate()?;
    let mut suite = cfg.attack.clone().unwrap_or_default();
    if self_test && !suite.options.disabled_layers.contains(&DetectionLayer::ContractVerify) {
        suite.options.disabled_layers.push(DetectionLayer::ContractVerify);
    }
    let report = run_all(&cfg.federation, &suite).map_err(|e| CliError::Config(e.to_string()))?;
    let diff: Vec<String> = report
        .reports
        .iter()
        .filter(|r| !r.as_expected())
        .map(describe)
        .collect();
    let mut dir = ArtifactDir::create(&cfg.out_dir())?;
    dir.write("config.json", (cfg.to_json() + "\n").as_bytes())?;
    dir.write_json("detection_reports.json", &report)?;
    let mut summary = report.table();
    for line in &diff {
        summary.push_str(line);
        summary.push('\n');
    }
    dir.write("summary.txt", summary.as_bytes())?;
    let mut notes = vec!["semantic-poison is a control: it must not be detected".to_string()];
    if self_test {
        notes.push("self-test: contract-verify findings ignored".to_string());
    }
    let manifest = dir.finish("attack", suite.base_seed, cfg, notes)?;
    Ok(AttackOutcome {
        report,
        diff,
        manifest,
    })
}
