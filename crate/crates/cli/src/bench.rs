//! `bench`: proof and verification cost across dimension, client count and
//! backend, plus ledger throughput.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use zkfl_core::crypto::{HashAlg, KeyPair, PedersenParams, Scalar};
use zkfl_core::encoding::{FixedPointConfig, QuantizedUpdate};
use zkfl_core::ledger::{measure_throughput, ThroughputReport, ThroughputWorkload};
use zkfl_core::protocol::{
    check_aggregation, submit_quantized, AggregationPolicy, BackendKind, ClientIdentity, Enclave, EnclaveKeys,
    MockTimings, Registry, RoundHeader, SubmissionContext, VerifyContext,
};

use crate::artifacts::{ArtifactDir, Manifest};
use crate::run::{MEASURED, REPLAYED};
use crate::{CliError, ExperimentConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub dims: Vec<usize>,
    pub clients: Vec<usize>,
    pub backends: Vec<BackendKind>,
    /// Verification repetitions per point; the median is reported.
    pub repetitions: usize,
    pub throughput_posts: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            dims: (6..=14).map(|k| 1usize << k).collect(),
            clients: vec![2, 4, 8, 16, 32],
            backends: vec![BackendKind::Transparent, BackendKind::Mock],
            repetitions: 3,
            throughput_posts: 10_000,
            seed: 1,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(format!("bench: {m}")));
        if self.dims.is_empty() || self.clients.is_empty() || self.backends.is_empty() {
            return bad("dims, clients and backends must be non-empty");
        }
        if self.dims.contains(&0) || self.clients.contains(&0) {
            return bad("dims and clients must be positive");
        }
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub backend: BackendKind,
    pub d: usize,
    pub n: usize,
    pub prove_ms: f64,
    pub verify_ms: f64,
    pub proof_bytes: usize,
    /// Group operations the transparent check performs: `d + 1` for the
    /// opening plus `n` for the weighted commitment sum.
    pub group_ops: usize,
    pub verified: bool,
    pub timing_source: String,
}

pub const BENCH_COLUMNS: [&str; 10] = [
    "backend",
    "d",
    "n",
    "prove_ms",
    "verify_ms",
    "proof_bytes",
    "group_ops",
    "verified",
    "timing_source",
    "ledger_tps",
];

const WEIGHT: u64 = 10;

/// Builds one honest round of `n` clients at dimension `d` and times its
/// proof and verification.
pub fn bench_point(
    params: &Arc<PedersenParams>,
    n: usize,
    backend: BackendKind,
    repetitions: usize,
    mock: MockTimings,
    seed: u64,
) -> BenchRow {
    use rand::{Rng, SeedableRng};
    let d = params.dimension();
    let alg = params.hash();
    let policy = AggregationPolicy {
        hash: alg,
        fixed_point: FixedPointConfig::new(d, n as u64, WEIGHT).expect("bench envelope fits"),
        param_seed: String::from_utf8(params.seed().to_vec()).expect("bench seeds are UTF-8"),
        norm_bound: u64::MAX >> 1,
        quorum: 1,
        round_timeout: 1,
        backend,
    };
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed ^ (d as u64) << 20 ^ n as u64);
    let clients: Vec<ClientIdentity> = (0..n)
        .map(|i| {
            let mut c = ClientIdentity::new(alg, KeyPair::from_seed(format!("bench/{seed}/{i}").as_bytes()));
            c.registered = true;
            c
        })
        .collect();
    let mut registry = Registry::new();
    for c in &clients {
        registry.insert(c.client_id, c.public());
    }
    let header = RoundHeader {
        round_t: 1,
        round_nonce: rng.gen(),
        policy_id: policy.id(),
        prev_model_hash: zkfl_core::crypto::Digest::ZERO,
        deadline: 1,
    };
    let keys = EnclaveKeys::from_seed(format!("bench/{seed}/enclave").as_bytes());
    let enclave_key = keys.attestation_public();
    let sealing_key = keys.sealing_public();
    let mut enclave = Enclave::new(keys, policy.clone(), params.clone()).with_mock_timings(mock);
    enclave.open_round(header.clone(), registry.clone()).expect("policy matches");
    let ctx = SubmissionContext {
        policy: &policy,
        params,
        enclave_sealing_key: &sealing_key,
        current_round: 1,
    };
    for c in &clients {
        let q = QuantizedUpdate {
            values: (0..d).map(|_| rng.gen_range(-4096..=4096)).collect(),
            config_id: policy.fixed_point.id(),
            round: 1,
        };
        let sub = submit_quantized(c, &q, &Scalar::random(&mut rng), WEIGHT, &header, &ctx, &mut rng);
        assert!(enclave.ingest(&sub).is_accepted(), "bench submissions are in policy");
    }
    let out = enclave.aggregate_and_prove().expect("quorum of one is met");
    let vctx = VerifyContext {
        policy: &policy,
        params,
        registry: &registry,
        header: &header,
        enclave_key: &enclave_key,
    };
    let mut times: Vec<Duration> = Vec::with_capacity(repetitions);
    let mut verified = true;
    for _ in 0..repetitions {
        let t = Instant::now();
        verified &= check_aggregation(&out.statement, &out.proof, &vctx).is_ok();
        times.push(t.elapsed());
    }
    times.sort();
    let measured_verify = times[times.len() / 2].as_secs_f64() * 1e3;
    let (verify_ms, source) = match backend {
        BackendKind::Transparent => (measured_verify, MEASURED),
        BackendKind::Mock => (mock.verify_ms * mock.scale, REPLAYED),
    };
    BenchRow {
        backend,
        d,
        n,
        prove_ms: out.prove_time.as_secs_f64() * 1e3,
        verify_ms,
        proof_bytes: out.proof.payload_len(),
        group_ops: d + 1 + n,
        verified,
        timing_source: source.to_string(),
    }
}

/// Ordinary least squares `y = a + b·x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub r_squared: f64,
    pub points: usize,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    let n = xs.len().min(ys.len());
    let nf = n as f64;
    let mx = xs[..n].iter().sum::<f64>() / nf;
    let my = ys[..n].iter().sum::<f64>() / nf;
    let sxx: f64 = xs[..n].iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs[..n].iter().zip(&ys[..n]).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys[..n].iter().map(|y| (y - my) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_res: f64 = xs[..n]
        .iter()
        .zip(&ys[..n])
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    LinearFit {
        intercept,
        slope,
        r_squared: if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 },
        points: n,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchFits {
    /// Transparent verify time against its group-operation count.
    pub verify_vs_group_ops: LinearFit,
    /// Transparent verify time against `d·n`, for comparison.
    pub verify_vs_d_times_n: LinearFit,
}

#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub rows: Vec<BenchRow>,
    pub fits: Option<BenchFits>,
    pub throughput: ThroughputReport,
    pub manifest: Manifest,
}

pub fn run_sweep(b: &BenchConfig, mock: MockTimings) -> Vec<BenchRow> {
    let mut rows = Vec::new();
    for &d in &b.dims {
        let params = Arc::new(
            PedersenParams::setup_with(HashAlg::Sha256, d, format!("bench-{}", b.seed).as_bytes())
                .expect("positive dimension"),
        );
        for &n in &b.clients {
            for &backend in &b.backends {
                rows.push(bench_point(&params, n, backend, b.repetitions, mock, b.seed));
            }
        }
    }
    rows
}

pub fn fit_transparent(rows: &[BenchRow]) -> Option<BenchFits> {
    let t: Vec<&BenchRow> = rows.iter().filter(|r| r.backend == BackendKind::Transparent).collect();
    if t.len() < 3 {
        return None;
    }
    let ys: Vec<f64> = t.iter().map(|r| r.verify_ms).collect();
    let ops: Vec<f64> = t.iter().map(|r| r.group_ops as f64).collect();
    let dn: Vec<f64> = t.iter().map(|r| (r.d * r.n) as f64).collect();
    Some(BenchFits {
        verify_vs_group_ops: linear_fit(&ops, &ys),
        verify_vs_d_times_n: linear_fit(&dn, &ys),
    })
}

pub fn bench_csv(rows: &[BenchRow], tps: f64) -> String {
    let mut out = BENCH_COLUMNS.join(",") + "\n";
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{:.3},{:.3},{},{},{},{},{:.1}",
            r.backend.name(),
            r.d,
            r.n,
            r.prove_ms,
            r.verify_ms,
            r.proof_bytes,
            r.group_ops,
            r.verified,
            r.timing_source,
            tps
        );
    }
    out
}

pub fn cmd_bench(cfg: &ExperimentConfig) -> Result<BenchOutcome, CliError> {
    cfg.validate()?;
    let b = cfg.bench.clone().unwrap_or_default();
    let rows = run_sweep(&b, cfg.federation.mock_timings);
    let fits = fit_transparent(&rows);
    let throughput = measure_throughput(&ThroughputWorkload {
        posts: b.throughput_posts,
        block_interval: cfg.federation.policy.block_interval,
        seed: b.seed,
    });
    let mut dir = ArtifactDir::create(&cfg.out_dir())?;
    dir.write("config.json", (cfg.to_json() + "\n").as_bytes())?;
    dir.write("bench.csv", bench_csv(&rows, throughput.tps).as_bytes())?;
    dir.write_json("bench_fit.json", &fits)?;
    dir.write_json("throughput.json", &throughput)?;
    let mut machine = BTreeMap::new();
    machine.insert("os", std::env::consts::OS.to_string());
    machine.insert("arch", std::env::consts::ARCH.to_string());
    machine.insert(
        "threads",
        std::thread::available_parallelism().map_or(1, |n| n.get()).to_string(),
    );
    dir.write_json("machine.json", &machine)?;
    let notes = vec![
        format!("mock backend timings are {REPLAYED}"),
        "all timings and throughput are machine-dependent measurements".to_string(),
    ];
    let manifest = dir.finish("bench", b.seed, cfg, notes)?;
    Ok(BenchOutcome {
        rows,
        fits,
        throughput,
        manifest,
    })
}
