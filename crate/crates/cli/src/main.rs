use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use zkfl_cli::attack::cmd_attack;
use zkfl_cli::audit::{audit_exit_code, cmd_audit};
use zkfl_cli::bench::cmd_bench;
use zkfl_cli::run::cmd_run;
use zkfl_cli::{exit, CliError, ExperimentConfig, Overrides};
use zkfl_core::protocol::BackendKind;

#[derive(Parser)]
#[command(name = "zkfl", version, about = "Verified federated learning at desk scale")]
struct Cli {
    /// Experiment configuration (JSON). Built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for training and scenario fan-out.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Proof backend: transparent or mock.
    #[arg(long, global = true, value_parser = parse_backend)]
    backend: Option<BackendKind>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run verified training rounds and the FedAvg shadow.
    Run,
    /// Run the attack suite.
    Attack {
        /// Ignore contract verification; the suite must then fail.
        #[arg(long)]
        self_test: bool,
    },
    /// Replay a chain file against its genesis configuration.
    Audit {
        /// Defaults to OUT/chain.bin.
        #[arg(long)]
        chain: Option<PathBuf>,
        /// Defaults to OUT/genesis.json.
        #[arg(long)]
        genesis: Option<PathBuf>,
    },
    /// Sweep proof and verification costs.
    Bench,
}

fn parse_backend(s: &str) -> Result<BackendKind, String> {
    s.parse()
}

fn load(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let base = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    base.apply(&Overrides {
        seed: cli.seed,
        workers: cli.workers,
        backend: cli.backend,
        out: cli.out.clone(),
    })
}

fn main_inner(cli: Cli) -> Result<u8, CliError> {
    match &cli.command {
        Command::Audit { chain, genesis } => {
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("zkfl-out"));
            let chain = chain.clone().unwrap_or_else(|| out.join("chain.bin"));
            let genesis = genesis.clone().unwrap_or_else(|| out.join("genesis.json"));
            let report = cmd_audit(&chain, &genesis)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            match report.first_bad_height {
                Some(h) => eprintln!("chain invalid: first_bad_height = {h}"),
                None => eprintln!("chain valid: {} rounds finalized", report.rounds_finalized),
            }
            Ok(audit_exit_code(&report))
        }
        Command::Run => {
            let cfg = load(&cli)?;
            let outcome = cmd_run(&cfg)?;
            for r in &outcome.rounds {
                println!(
                    "round {:>3}  acc {:.4}  shadow {:.4}  gap_l1 {:.2e}  proof {} B  txs {}",
                    r.round_t, r.accuracy, r.shadow_accuracy, r.parity_gap_l1, r.proof_bytes, r.ledger_txs
                );
            }
            if let Some(why) = &outcome.failure {
                eprintln!("round failed: {why}");
            }
            eprintln!("artifacts in {}", cfg.out_dir().display());
            Ok(outcome.exit_code())
        }
        Command::Attack { self_test } => {
            let cfg = load(&cli)?;
            let outcome = cmd_attack(&cfg, *self_test)?;
            print!("{}", outcome.report.table());
            for line in &outcome.diff {
                eprintln!("{line}");
            }
            Ok(outcome.exit_code())
        }
        Command::Bench => {
            let cfg = load(&cli)?;
            let outcome = cmd_bench(&cfg)?;
            print!(
                "{}",
                zkfl_cli::bench::bench_csv(&outcome.rows, outcome.throughput.tps)
            );
            if let Some(f) = &outcome.fits {
                eprintln!(
                    "transparent verify ~ group ops: R² = {:.4}",
                    f.verify_vs_group_ops.r_squared
                );
            }
            Ok(exit::OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
