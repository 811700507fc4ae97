//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Run with `cargo test -p zkfl-cli --test acceptance`.

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use zkfl_cli::bench::{bench_point, fit_transparent, run_sweep, BenchConfig};
use zkfl_cli::run::cmd_run;
use zkfl_cli::ExperimentConfig;
use zkfl_core::adversary::{run_all, ScenarioName, SuiteConfig};
use zkfl_core::crypto::{Digest, HashAlg, KeyPair, PedersenParams, Scalar};
use zkfl_core::encoding::{decode_from_scalars, encode_to_scalars, FixedPointConfig, QuantizedUpdate};
use zkfl_core::fl::{Model, ModelParams};
use zkfl_core::ledger::{audit_chain, scan_for_secrets, Secret};
use zkfl_core::protocol::{
    submit_quantized, verify_aggregation, AggregationPolicy, AggregationProof,
    AggregationStatement, BackendKind, ClientIdentity, Enclave, EnclaveKeys, MockTimings, Participant, Registry,
    RejectReason, RoundHeader, SubmissionContext, VerifyContext, MOCK_PROOF_LEN, TRANSPARENT_PROOF_LEN,
};
use zkfl_core::session::{Federation, FederationConfig};

/// What a criterion measured, for its PASS/FAIL line.
type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn out_dir() -> tempfile::TempDir {
    tempfile::tempdir().expect("temp dir")
}

// 1. Utility parity on the default federation over 30 rounds.
fn utility_parity() -> Outcome {
    let dir = out_dir();
    let cfg = ExperimentConfig {
        rounds: 30,
        output_dir: Some(dir.path().to_path_buf()),
        ..ExperimentConfig::default()
    };
    let fed = &cfg.federation;
    assert_eq!((fed.sites.num_clients, fed.sites.feature_dim + 1, fed.sites.skew), (8, 128, 0.3));
    assert_eq!(fed.encoding.fractional_bits, 16);
    let start = Instant::now();
    let out = cmd_run(&cfg).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    if let Some(f) = out.failure {
        return Err(f);
    }
    let last = out.rounds.last().expect("30 rounds");
    let diff_pp = (last.accuracy - last.shadow_accuracy).abs() * 100.0;
    let worst_gap = out.rounds.iter().map(|r| r.parity_gap_l1 / r.parity_bound_l1).fold(0.0, f64::max);
    check(
        out.rounds.len() == 30 && diff_pp < 0.5 && worst_gap <= 1.0 && elapsed < Duration::from_secs(120),
        format!(
            "accuracy {:.4} vs shadow {:.4} ({diff_pp:.3} pp); max gap/bound {worst_gap:.3}; {elapsed:.1?}",
            last.accuracy, last.shadow_accuracy
        ),
    )
}

/// One enclave round built directly, for the soundness and freshness trials.
struct Round {
    policy: AggregationPolicy,
    params: Arc<PedersenParams>,
    clients: Vec<ClientIdentity>,
    registry: Registry,
    keys: EnclaveKeys,
    enclave: Enclave,
    header: RoundHeader,
}

impl Round {
    fn new(params: &Arc<PedersenParams>, clients: usize, seed: u64) -> Self {
        let d = params.dimension();
        let policy = AggregationPolicy {
            hash: HashAlg::Sha256,
            fixed_point: FixedPointConfig::new(d, 32, 1000).unwrap(),
            param_seed: "acceptance".into(),
            norm_bound: u64::MAX >> 1,
            quorum: 1,
            round_timeout: 10,
            backend: BackendKind::Transparent,
        };
        let mut registry = Registry::new();
        let clients: Vec<ClientIdentity> = (0..clients)
            .map(|i| {
                let mut c = ClientIdentity::new(policy.hash, KeyPair::from_seed(format!("acc/{seed}/{i}").as_bytes()));
                registry.insert(c.client_id, c.public());
                c.registered = true;
                c
            })
            .collect();
        let keys = EnclaveKeys::from_seed(format!("acc/{seed}/enclave").as_bytes());
        let enclave = Enclave::new(keys.clone(), policy.clone(), params.clone());
        let mut r = Self {
            policy,
            params: params.clone(),
            clients,
            registry,
            keys,
            enclave,
            header: header_for(Digest::ZERO, 0, seed),
        };
        r.open(1, seed);
        r
    }

    fn open(&mut self, t: u64, seed: u64) {
        self.header = header_for(self.policy.id(), t, seed);
        self.enclave.open_round(self.header.clone(), self.registry.clone()).unwrap();
    }
}

fn header_for(policy_id: Digest, t: u64, seed: u64) -> RoundHeader {
    let mut nonce = [0u8; 16];
    nonce[..8].copy_from_slice(&t.to_le_bytes());
    nonce[8..].copy_from_slice(&seed.to_le_bytes());
    RoundHeader {
        round_t: t,
        round_nonce: nonce,
        policy_id,
        prev_model_hash: Digest::ZERO,
        deadline: 10 * t,
    }
}

fn random_values(rng: &mut impl Rng, d: usize) -> Vec<i64> {
    (0..d).map(|_| rng.gen_range(-(1i64 << 18)..=(1 << 18))).collect()
}

fn quantized(values: Vec<i64>, policy: &AggregationPolicy, round: u64) -> QuantizedUpdate {
    QuantizedUpdate {
        values,
        config_id: policy.fixed_point.id(),
        round,
    }
}

// 2. Soundness and completeness over randomized honest and tampered rounds.
fn aggregation_soundness() -> Outcome {
    const TRIALS: usize = 500;
    let start = Instant::now();
    let mut params: HashMap<usize, Arc<PedersenParams>> = HashMap::new();
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let mut honest_ok = 0;
    let mut rejected = 0;
    let mut kinds = [0usize; 5];
    let mut previous: Option<(AggregationStatement, AggregationProof)> = None;
    for trial in 0..TRIALS {
        let d = [16, 64, 128, 256][trial % 4];
        let n = rng.gen_range(2..=16);
        let p = params
            .entry(d)
            .or_insert_with(|| Arc::new(PedersenParams::setup_with(HashAlg::Sha256, d, b"acceptance").unwrap()))
            .clone();
        // One registered client stays silent so injection has an identity to use.
        let mut r = Round::new(&p, n + 1, trial as u64);
        let sealing = r.keys.sealing_public();
        let sctx = SubmissionContext {
            policy: &r.policy,
            params: &r.params,
            enclave_sealing_key: &sealing,
            current_round: 1,
        };
        for i in 0..n {
            let q = quantized(random_values(&mut rng, d), &r.policy, 1);
            let w = rng.gen_range(1..=1000);
            let sub = submit_quantized(&r.clients[i], &q, &Scalar::random(&mut rng), w, &r.header, &sctx, &mut rng);
            assert!(r.enclave.ingest(&sub).is_accepted());
        }
        let out = r.enclave.aggregate_and_prove().unwrap();
        let attest = r.keys.attestation_public();
        let vctx = VerifyContext {
            policy: &r.policy,
            params: &r.params,
            registry: &r.registry,
            header: &r.header,
            enclave_key: &attest,
        };
        honest_ok += usize::from(verify_aggregation(&out.statement, &out.proof, &vctx));

        let kind = trial % 5;
        kinds[kind] += 1;
        let mut st = out.statement.clone();
        let mut proof = out.proof.clone();
        let k = rng.gen_range(0..st.participants.len());
        match kind {
            // drop
            0 => {
                let gone = st.participants.remove(k);
                st.total_weight -= gone.weight;
            }
            // alter
            1 => {
                if rng.gen() {
                    st.aggregate[rng.gen_range(0..d)] += rng.gen_range(1..=5) * if rng.gen() { 1 } else { -1 };
                } else {
                    st.participants[k].weight += 1;
                    st.total_weight += 1;
                }
            }
            // inject a fabricated contribution under the silent identity
            2 => {
                let values = random_values(&mut rng, d);
                let w = rng.gen_range(1..=1000u64);
                let c = r.params.commit(&encode_to_scalars(&values), &Scalar::random(&mut rng)).unwrap();
                for (a, v) in st.aggregate.iter_mut().zip(&values) {
                    *a += w as i64 * v;
                }
                st.participants.push(Participant {
                    client_id: r.clients[n].client_id,
                    commitment: c,
                    weight: w,
                });
                st.total_weight += w;
                st.canonicalize();
            }
            // swap one commitment for an unrelated one
            3 => {
                let c = r
                    .params
                    .commit(&encode_to_scalars(&random_values(&mut rng, d)), &Scalar::random(&mut rng))
                    .unwrap();
                st.participants[k].commitment = c;
            }
            // replay an earlier round's valid statement and proof
            _ => {
                let (s, pr) = previous.clone().expect("kind 4 is never the first trial");
                st = s;
                proof = pr;
            }
        }
        if !verify_aggregation(&st, &proof, &vctx) {
            rejected += 1;
        }
        previous = Some((out.statement, out.proof));
    }
    let elapsed = start.elapsed();
    check(
        honest_ok == TRIALS && rejected == TRIALS && elapsed < Duration::from_secs(300),
        format!(
            "honest accepted {honest_ok}/{TRIALS}; tampered rejected {rejected}/{TRIALS} \
             (drop/alter/inject/swap/replay = {kinds:?}); {elapsed:.1?}"
        ),
    )
}

fn attack_config() -> FederationConfig {
    let mut cfg = FederationConfig::default();
    cfg.sites.per_site = 60;
    cfg.sites.holdout = 200;
    cfg.sites.idle_clients = 1;
    cfg
}

// 3. Threat matrix: nine scenarios by 50 seeds, plus both controls.
fn threat_matrix() -> Outcome {
    let suite = SuiteConfig {
        repetitions: 50,
        ..SuiteConfig::default()
    };
    assert_eq!(suite.scenarios.len(), ScenarioName::REQUIRED.len());
    let start = Instant::now();
    let report = run_all(&attack_config(), &suite).map_err(|e| e.to_string())?;
    let lines: Vec<String> = report
        .summary
        .iter()
        .map(|s| format!("{} {}/{}", s.scenario.name(), s.as_expected, s.runs))
        .collect();
    let honest_clean = report
        .reports
        .iter()
        .filter(|r| r.scenario == ScenarioName::HonestBaseline)
        .all(|r| !r.detected && r.events.is_empty());
    let all_fifty = report.summary.iter().all(|s| s.runs == 50);
    check(
        report.complete && honest_clean && all_fifty,
        format!("{}; {:.1?}", lines.join(", "), start.elapsed()),
    )
}

fn tiny_federation(seed: u64) -> FederationConfig {
    let mut cfg = FederationConfig {
        seed,
        ..FederationConfig::default()
    };
    cfg.sites.num_clients = 2;
    cfg.sites.per_site = 16;
    cfg.sites.feature_dim = 1;
    cfg.sites.holdout = 16;
    cfg.policy.quorum = 2;
    cfg
}

fn frame_heights(chain: &[u8]) -> Vec<u64> {
    let mut heights = vec![0; chain.len()];
    let (mut pos, mut h) = (0, 0);
    while pos < chain.len() {
        let len = u32::from_le_bytes(chain[pos..pos + 4].try_into().unwrap()) as usize;
        heights[pos..pos + 4 + len].iter_mut().for_each(|x| *x = h);
        pos += 4 + len;
        h += 1;
    }
    heights
}

// 4. Every byte of a 10-round chain flipped once.
fn audit_tamper_evidence() -> Outcome {
    let mut fed = Federation::new(tiny_federation(4)).unwrap();
    for _ in 0..10 {
        fed.run_honest_round().unwrap();
    }
    let chain = fed.ledger().chain_bytes();
    let clean = audit_chain(&chain, fed.genesis());
    if !clean.chain_valid || clean.rounds_finalized != 10 {
        return Err(format!("honest chain did not audit clean: {:?}", clean.findings));
    }
    let heights = frame_heights(&chain);
    let start = Instant::now();
    let mut flagged = 0;
    let mut located = 0;
    let mut first_miss = None;
    for i in 0..chain.len() {
        let mut bad = chain.clone();
        bad[i] ^= 0xff;
        let report = audit_chain(&bad, fed.genesis());
        flagged += usize::from(!report.chain_valid);
        if report.first_bad_height == Some(heights[i]) {
            located += 1;
        } else if first_miss.is_none() {
            first_miss = Some((i, report.first_bad_height));
        }
    }
    let elapsed = start.elapsed();
    check(
        flagged == chain.len() && located == chain.len() && elapsed < Duration::from_secs(300),
        format!(
            "{} bytes: flagged {flagged}, located {located}; first miss {first_miss:?}; {elapsed:.1?}",
            chain.len()
        ),
    )
}

// 5. Proof size is independent of the dimension.
fn constant_proof_size() -> Outcome {
    let mut sizes = Vec::new();
    let mut ok = true;
    let mock = MockTimings {
        scale: 0.0,
        ..MockTimings::default()
    };
    for k in 6..=14 {
        let d = 1usize << k;
        let params = Arc::new(PedersenParams::setup_with(HashAlg::Sha256, d, b"acceptance").unwrap());
        let t = bench_point(&params, 2, BackendKind::Transparent, 1, mock, 5);
        let m = bench_point(&params, 2, BackendKind::Mock, 1, mock, 5);
        ok &= t.verified && m.verified;
        ok &= t.proof_bytes == 32 && t.proof_bytes == TRANSPARENT_PROOF_LEN;
        ok &= m.proof_bytes == 128 && m.proof_bytes == MOCK_PROOF_LEN;
        sizes.push(format!("{d}:{}/{}", t.proof_bytes, m.proof_bytes));
    }
    check(ok, format!("transparent/mock bytes by d: {}", sizes.join(" ")))
}

// 6. Verification time at d=4096, N=16 and its scaling across a sweep.
fn verification_cost() -> Outcome {
    let cfg = BenchConfig {
        dims: vec![64, 256, 1024, 4096],
        clients: vec![2, 4, 8, 16],
        backends: vec![BackendKind::Transparent],
        repetitions: 3,
        throughput_posts: 0,
        seed: 6,
    };
    let rows = run_sweep(&cfg, MockTimings::default());
    let target = rows.iter().find(|r| r.d == 4096 && r.n == 16).expect("sweep covers the target");
    let fits = fit_transparent(&rows).expect("sixteen points");
    check(
        rows.iter().all(|r| r.verified) && target.verify_ms < 1000.0 && fits.verify_vs_group_ops.r_squared >= 0.9,
        format!(
            "verify at d=4096,N=16: {:.2} ms; R² vs group ops (d+N+1) {:.4}; R² vs d·N {:.4}",
            target.verify_ms, fits.verify_vs_group_ops.r_squared, fits.verify_vs_d_times_n.r_squared
        ),
    )
}

// 7. Cross-round reuse and same-round duplicates, first submission wins.
fn freshness() -> Outcome {
    const TRIALS: u64 = 100;
    let params = Arc::new(PedersenParams::setup_with(HashAlg::Sha256, 8, b"acceptance").unwrap());
    let (mut reuse, mut dup, mut first_wins) = (0, 0, 0);
    for seed in 0..TRIALS {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut r = Round::new(&params, 2, 7_000 + seed);
        let sealing = r.keys.sealing_public();
        let first = quantized(random_values(&mut rng, 8), &r.policy, 1);
        let second = quantized(random_values(&mut rng, 8), &r.policy, 1);
        let blind = Scalar::random(&mut rng);
        let w = rng.gen_range(1..=1000);
        let (a, b) = {
            let sctx = SubmissionContext {
                policy: &r.policy,
                params: &r.params,
                enclave_sealing_key: &sealing,
                current_round: 1,
            };
            (
                submit_quantized(&r.clients[0], &first, &blind, w, &r.header, &sctx, &mut rng),
                submit_quantized(&r.clients[0], &second, &Scalar::random(&mut rng), w, &r.header, &sctx, &mut rng),
            )
        };
        let ok_first = r.enclave.ingest(&a).is_accepted();
        dup += usize::from(r.enclave.ingest(&b).reason() == Some(RejectReason::DuplicateClient));
        // Verbatim resubmission of the accepted update is a duplicate too.
        let again = r.enclave.ingest(&a).reason();
        let out = r.enclave.aggregate_and_prove().unwrap();
        let expected: Vec<i64> = first.values.iter().map(|v| v * w as i64).collect();
        first_wins += usize::from(ok_first && out.statement.aggregate == expected && again.is_some());

        r.open(2, 7_000 + seed);
        let reused = QuantizedUpdate { round: 2, ..first };
        let sctx = SubmissionContext {
            policy: &r.policy,
            params: &r.params,
            enclave_sealing_key: &sealing,
            current_round: 2,
        };
        let c = submit_quantized(&r.clients[0], &reused, &blind, w, &r.header, &sctx, &mut rng);
        let verbatim_old = r.enclave.ingest(&a).reason();
        let relabelled = r.enclave.ingest(&c).reason();
        reuse += usize::from(
            c.commitment == a.commitment
                && verbatim_old == Some(RejectReason::StaleRound)
                && relabelled == Some(RejectReason::StaleRound),
        );
    }
    let n = TRIALS as usize;
    check(
        reuse == n && dup == n && first_wins == n,
        format!("cross-round reuse rejected {reuse}/{n}; duplicates rejected {dup}/{n}; first wins {first_wins}/{n}"),
    )
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|y| y * y).sum::<f64>().sqrt());
    if den < 1e-12 {
        num
    } else {
        num / den
    }
}

// 8. Analytic gradients against central differences; field aggregation
// against a big-integer oracle.
fn numerical_correctness() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let model = if case % 2 == 0 { Model::logistic(7) } else { Model::mlp(5, 3) };
        let params = ModelParams {
            weights: (0..model.dimension()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        };
        let features = if case % 2 == 0 { 7 } else { 5 };
        let xs: Vec<Vec<f64>> = (0..10).map(|_| (0..features).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let ys: Vec<u8> = (0..10).map(|_| rng.gen_range(0..=1)).collect();
        let rows: Vec<usize> = (0..10).collect();
        let (_, analytic) = model.loss_and_grad(&params, &xs, &ys, &rows);
        let h = 1e-5;
        let numeric: Vec<f64> = (0..params.weights.len())
            .map(|j| {
                let mut up = params.clone();
                let mut down = params.clone();
                up.weights[j] += h;
                down.weights[j] -= h;
                (model.loss(&up, &xs, &ys, &rows) - model.loss(&down, &xs, &ys, &rows)) / (2.0 * h)
            })
            .collect();
        worst = worst.max(rel_err(&analytic, &numeric));
    }

    let mut field_ok = 0;
    for _ in 0..1000 {
        let d = rng.gen_range(1..=64);
        let n = rng.gen_range(1..=32);
        let updates: Vec<Vec<i64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(-(1i64 << 19)..=(1 << 19))).collect())
            .collect();
        let weights: Vec<u64> = (0..n).map(|_| rng.gen_range(1..=10_000)).collect();
        let mut acc = vec![Scalar::from_u64(0); d];
        for (u, &w) in updates.iter().zip(&weights) {
            for (a, s) in acc.iter_mut().zip(encode_to_scalars(u)) {
                *a += Scalar::from_u64(w) * s;
            }
        }
        let field = decode_from_scalars(&acc).map(|v| v.into_iter().map(BigInt::from).collect::<Vec<_>>());
        let oracle: Vec<BigInt> = (0..d)
            .map(|j| updates.iter().zip(&weights).map(|(u, &w)| BigInt::from(u[j]) * BigInt::from(w)).sum())
            .collect();
        field_ok += usize::from(field.as_ref() == Ok(&oracle));
    }
    check(
        worst < 1e-4 && field_ok == 1000,
        format!("worst gradient relative error {worst:.2e} over 100 cases; field = bigint on {field_ok}/1000"),
    )
}

// 9. Persisted chain bytes carry no update, model or blinding.
fn data_minimization() -> Outcome {
    let mut cfg = FederationConfig::default();
    cfg.sites.per_site = 60;
    cfg.sites.holdout = 100;
    let mut fed = Federation::new(cfg).unwrap();
    fed.retain_openings(true);
    let mut secrets = Vec::new();
    for t in 1..=3 {
        fed.run_honest_round().unwrap();
        secrets.push(Secret::model(format!("model {t}"), fed.global()));
    }
    for (t, c, o) in fed.openings() {
        secrets.push(Secret::update(format!("update {t}/{c}"), &o.update));
        secrets.push(Secret::blinding(format!("blinding {t}/{c}"), &o.blinding));
    }
    let chain = fed.ledger().chain_bytes();
    let leaks = scan_for_secrets(&chain, &secrets);
    check(
        leaks.is_empty() && fed.openings().len() == 24,
        format!("{} secrets scanned over {} chain bytes; {} found", secrets.len(), chain.len(), leaks.len()),
    )
}

// 10. Two runs with the same config and seed persist identical bytes.
fn determinism() -> Outcome {
    let (a, b) = (out_dir(), out_dir());
    let run = |dir: &tempfile::TempDir| {
        let cfg = ExperimentConfig {
            rounds: 5,
            output_dir: Some(dir.path().to_path_buf()),
            ..ExperimentConfig::default()
        };
        cmd_run(&cfg).map_err(|e| e.to_string())
    };
    run(&a)?;
    run(&b)?;
    let same = |name: &str| std::fs::read(a.path().join(name)).unwrap() == std::fs::read(b.path().join(name)).unwrap();
    check(
        same("chain.bin") && same("metrics.csv"),
        format!("chain.bin identical: {}; metrics.csv identical: {}", same("chain.bin"), same("metrics.csv")),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("utility parity", utility_parity),
        ("aggregation soundness", aggregation_soundness),
        ("threat matrix", threat_matrix),
        ("audit tamper-evidence", audit_tamper_evidence),
        ("constant proof size", constant_proof_size),
        ("verification cost", verification_cost),
        ("freshness and replay", freshness),
        ("numerical correctness", numerical_correctness),
        ("data minimization", data_minimization),
        ("determinism", determinism),
    ];
    let only: Option<usize> = std::env::var("ZKFL_CRITERION").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("criterion {n:>2} PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
