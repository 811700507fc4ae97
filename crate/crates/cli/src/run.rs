//! `run`: verified rounds plus a seed-matched plain FedAvg shadow.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use zkfl_core::session::{Federation, RoundRecord, ShadowRun};

use crate::artifacts::{ArtifactDir, Manifest};
use crate::{exit, CliError, ExperimentConfig};

/// Column order of `metrics.csv`. Every column is deterministic given the
/// configuration; wall-clock timings go to `timings.csv`.
pub const METRICS_COLUMNS: [&str; 13] = [
    "round_t",
    "accuracy",
    "auc",
    "loss",
    "shadow_accuracy",
    "shadow_auc",
    "parity_gap_l1",
    "parity_bound_l1",
    "proof_bytes",
    "ledger_txs",
    "finality_ticks",
    "participants",
    "model_hash",
];

pub const TIMINGS_COLUMNS: [&str; 4] = ["round_t", "prove_ms", "verify_ms", "timing_source"];

pub const MEASURED: &str = "measured";
pub const REPLAYED: &str = "replayed";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub round_t: u64,
    pub accuracy: f64,
    pub auc: Option<f64>,
    pub loss: f64,
    pub shadow_accuracy: f64,
    pub shadow_auc: Option<f64>,
    pub parity_gap_l1: f64,
    /// `d / (2S)`: the worst-case L1 rounding gap.
    pub parity_bound_l1: f64,
    pub proof_bytes: usize,
    pub ledger_txs: usize,
    pub finality_ticks: u64,
    pub participants: usize,
    pub model_hash: String,
    pub prove_ms: f64,
    pub verify_ms: f64,
    pub timing_source: String,
}

impl RoundMetrics {
    fn csv_row(&self) -> String {
        let opt = |x: Option<f64>| x.map(|v| format!("{v:.6}")).unwrap_or_default();
        format!(
            "{},{:.6},{},{:.6},{:.6},{},{:.9},{:.9},{},{},{},{},{}",
            self.round_t,
            self.accuracy,
            opt(self.auc),
            self.loss,
            self.shadow_accuracy,
            opt(self.shadow_auc),
            self.parity_gap_l1,
            self.parity_bound_l1,
            self.proof_bytes,
            self.ledger_txs,
            self.finality_ticks,
            self.participants,
            self.model_hash
        )
    }

    fn timings_row(&self) -> String {
        format!("{},{:.3},{:.3},{}", self.round_t, self.prove_ms, self.verify_ms, self.timing_source)
    }
}

pub fn metrics_csv(rows: &[RoundMetrics]) -> String {
    let mut out = METRICS_COLUMNS.join(",") + "\n";
    for r in rows {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

pub fn timings_csv(rows: &[RoundMetrics]) -> String {
    let mut out = TIMINGS_COLUMNS.join(",") + "\n";
    for r in rows {
        out.push_str(&r.timings_row());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub rounds: Vec<RoundMetrics>,
    /// Why the run stopped early, if it did.
    pub failure: Option<String>,
    pub manifest: Manifest,
}

impl RunOutcome {
    pub fn exit_code(&self) -> u8 {
        if self.failure.is_some() {
            exit::ROUND_FAILED
        } else {
            exit::OK
        }
    }
}

const REPORT_HEADER: &str = "\
Verified federated training with a plain FedAvg shadow run.

The shadow trains the same sites from the same initial model with the same
per-round shuffling seeds, but aggregates floats directly: no quantization,
commitments, enclave or ledger. The accuracy difference and the per-round L1
gap between the verified aggregate and the float FedAvg of the same client
updates measure what verification costs in utility at desk scale.

Timings labeled 'replayed' are configured constants for the mock
backend, not measurements.
";

fn round_metrics(rec: &RoundRecord, shadow: &zkfl_core::fl::Metrics, bound: f64) -> RoundMetrics {
    RoundMetrics {
        round_t: rec.round_t,
        accuracy: rec.metrics.accuracy,
        auc: rec.metrics.auc,
        loss: rec.metrics.loss,
        shadow_accuracy: shadow.accuracy,
        shadow_auc: shadow.auc,
        parity_gap_l1: rec.parity_gap_l1,
        parity_bound_l1: bound,
        proof_bytes: rec.proof_bytes,
        ledger_txs: rec.ledger_txs,
        finality_ticks: rec.finality_ticks,
        participants: rec.participants,
        model_hash: rec.model_hash.to_hex(),
        prove_ms: rec.prove_time.as_secs_f64() * 1e3,
        verify_ms: rec.verify_time.as_secs_f64() * 1e3,
        timing_source: if rec.timings_replayed { REPLAYED } else { MEASURED }.to_string(),
    }
}

/// Runs `cfg.rounds` verified rounds. A failed round stops the run; the
/// chain up to and including the rejected finalization is still written.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<RunOutcome, CliError> {
    cfg.validate()?;
    let fcfg = &cfg.federation;
    let mut fed = Federation::new(fcfg.clone()).map_err(|e| CliError::Config(e.to_string()))?;
    let mut shadow = ShadowRun::new(fcfg).map_err(|e| CliError::Config(e.to_string()))?;
    let policy = fed.policy().clone();
    let bound = policy.dimension() as f64 / (2.0 * policy.fixed_point.scale());

    let mut rounds = Vec::new();
    let mut failure = None;
    for _ in 0..cfg.rounds {
        match fed.run_honest_round() {
            Ok(rec) => {
                let s = shadow.step();
                rounds.push(round_metrics(&rec, &s, bound));
            }
            Err(f) => {
                failure = Some(f.failure.to_string());
                break;
            }
        }
    }

    let mut dir = ArtifactDir::create(&cfg.out_dir())?;
    dir.write("config.json", (cfg.to_json() + "\n").as_bytes())?;
    dir.write(
        "genesis.json",
        (fed.genesis().to_json() + "\n").as_bytes(),
    )?;
    dir.write("chain.bin", &fed.ledger().chain_bytes())?;
    dir.write("metrics.csv", metrics_csv(&rounds).as_bytes())?;
    dir.write("timings.csv", timings_csv(&rounds).as_bytes())?;
    dir.write_json("model_final.json", fed.global())?;
    dir.write_json("model_shadow.json", shadow.global())?;
    let mut report = String::from(REPORT_HEADER);
    let _ = writeln!(report);
    match (&failure, rounds.last()) {
        (Some(why), _) => {
            let _ = writeln!(report, "run stopped after {} finalized rounds: {why}", rounds.len());
        }
        (None, Some(last)) => {
            let _ = writeln!(
                report,
                "{} rounds finalized; final accuracy {:.4} (shadow {:.4}, gap {:.2} pp); max parity gap {:.3e} (bound {:.3e})",
                rounds.len(),
                last.accuracy,
                last.shadow_accuracy,
                (last.accuracy - last.shadow_accuracy).abs() * 100.0,
                rounds.iter().map(|r| r.parity_gap_l1).fold(0.0, f64::max),
                bound
            );
        }
        (None, None) => {}
    }
    dir.write("report.txt", report.as_bytes())?;
    let mut notes = vec![
        "metrics.csv is deterministic given config and seed".to_string(),
        "timings.csv holds wall-clock measurements and is not".to_string(),
    ];
    if fcfg.backend == zkfl_core::protocol::BackendKind::Mock {
        notes.push(format!("mock backend timings are {REPLAYED}"));
    }
    let manifest = dir.finish("run", fcfg.seed, cfg, notes)?;
    Ok(RunOutcome {
        rounds,
        failure,
        manifest,
    })
}
