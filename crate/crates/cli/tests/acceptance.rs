//! Acceptance suite. Runs every criterion at its pinned tolerance, prints one
//! PASS/FAIL line per criterion and exits non-zero if any fails.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use trajmeasure::diagnostics::{
    conditional_char_values, rotation_invariance_demo, stationarity_suite, tsirelson_statistic,
    uniform_marginal_statistic, unit_cylinder_family, DiagnosticsConfig,
};
use trajmeasure::measure_solution::{
    ensemble_spread, hopf_report, random_specs, shift_equivariance_gap, shuffle_coordinate, spec_grid,
};
use trajmeasure::seed::{derive_seed, stream_rng, Stream};
use trajmeasure::*;

const SEED: u64 = 42;

type Outcome = Result<String, String>;

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(f)
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn hopf_identity() -> Outcome {
    let window = (0, 15);
    let map = fractional_map();
    let builder = MeasureBuilder::new(map.clone(), 10_000, window, derive_seed(SEED, Stream::Init, 0)).unwrap();
    let (lo, hi) = builder.noise_range();
    let noise = NoiseModel::uniform(derive_seed(SEED, Stream::Noise, 0)).generate_range(lo, hi).unwrap();
    let mut specs = spec_grid(window);
    specs.extend(random_specs(window, 32, SEED));
    let max_residual = |mu: &ParticleMeasure| {
        specs
            .iter()
            .map(|s| hopf_report(mu, &noise, s, &map).unwrap().residual)
            .fold(0.0, f64::max)
    };
    let (max_res, elapsed) = single_threaded(|| {
        timed(|| {
            let mu = conditional_measure(&builder, &noise).unwrap();
            max_residual(&mu)
        })
    });
    let mu = conditional_measure(&builder, &noise).unwrap();
    let broken = max_residual(&shuffle_coordinate(&mu, window.1, SEED).unwrap());
    check(
        max_res <= 1e-9 && elapsed < Duration::from_secs(2) && broken > 0.01,
        format!(
            "{} specs, max residual {max_res:e} (<= 1e-9), {:.3}s single-threaded (< 2s), shuffled residual {broken:.4} (> 0.01)",
            specs.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn noise_pair(pair: u64, lo: i64, hi: i64) -> (NoiseWindow, NoiseWindow, i64) {
    let mut rng = stream_rng(SEED, Stream::Pair, pair);
    let n = rng.random_range(lo - 1..hi);
    let a = NoiseModel::uniform(derive_seed(SEED, Stream::Noise, 2 * pair)).generate_range(lo, hi).unwrap();
    let fresh = NoiseModel::uniform(derive_seed(SEED, Stream::Noise, 2 * pair + 1)).generate_range(lo, hi).unwrap();
    let values = a
        .values()
        .iter()
        .zip(fresh.values())
        .enumerate()
        .map(|(k, (&x, &y))| if lo + k as i64 <= n { x } else { y })
        .collect();
    (a.clone(), NoiseWindow::new(lo, values).unwrap(), n)
}

fn consistency() -> Outcome {
    let builder = MeasureBuilder::new(fractional_map(), 1000, (0, 15), derive_seed(SEED, Stream::Init, 0)).unwrap();
    let (lo, hi) = builder.noise_range();
    let pairs: Vec<_> = (0..100).map(|p| noise_pair(p, lo, hi)).collect();
    let (agree, elapsed) = timed(|| {
        pairs
            .iter()
            .filter(|(a, b, n)| consistency_check(&builder, a, b, *n).unwrap())
            .count()
    });
    check(
        agree == 100 && elapsed < Duration::from_secs(1),
        format!("{agree}/100 pairs agree bit-exactly on the past, {:.3}s (< 1s)", elapsed.as_secs_f64()),
    )
}

fn equivariance() -> Outcome {
    let builder = MeasureBuilder::new(fractional_map(), 1000, (0, 15), derive_seed(SEED, Stream::Init, 0))
        .unwrap()
        .with_initializer(Initializer { index: 2, ..Initializer::default() });
    let (lo, hi) = builder.noise_range();
    let noise = NoiseModel::uniform(derive_seed(SEED, Stream::Noise, 0)).generate_range(lo, hi).unwrap();
    let gaps: Vec<f64> = [1, 2, 5].iter().map(|&t| shift_equivariance_gap(&builder, &noise, t).unwrap()).collect();
    check(gaps.iter().all(|&g| g <= 1e-12), format!("gaps for t = 1, 2, 5: {gaps:?} (<= 1e-12)"))
}

fn tsirelson() -> Outcome {
    let map = fractional_map();
    let config = DiagnosticsConfig::new(100_000, 10_000, 0.01, SEED, (0, 10)).unwrap();
    let ((uncond, cond), elapsed) = timed(|| {
        (
            tsirelson_statistic(&config, &map, 5).unwrap(),
            conditional_char_values(&config, &map, 5, 10).unwrap(),
        )
    });
    let cond_max = cond.iter().cloned().fold(0.0, f64::max);
    let cond_bound = 5.0 / (10_000f64).sqrt();
    let uncond_bound = 5.0 / (100_000f64).sqrt();
    check(
        uncond.statistic <= uncond_bound && cond_max <= cond_bound && elapsed < Duration::from_secs(5),
        format!(
            "|mean e^(2 pi i x_5)| = {:.5} (<= {uncond_bound:.5}); conditional max over 10 paths {cond_max:.5} (<= {cond_bound}); {:.2}s (< 5s)",
            uncond.statistic,
            elapsed.as_secs_f64()
        ),
    )
}

fn strong_solution_contrast() -> Outcome {
    let contraction = MeasureBuilder::new(contraction_map(0.5).unwrap(), 1000, (0, 40), SEED).unwrap();
    let noise = NoiseModel::uniform(derive_seed(SEED, Stream::Noise, 0)).generate_range(1, 40).unwrap();
    let mu = conditional_measure(&contraction, &noise).unwrap();
    let collapsed = ensemble_spread(&mu, 40).unwrap().range;

    let circle = MeasureBuilder::new(fractional_map(), 1000, (0, 40), SEED).unwrap();
    let nu = conditional_measure(&circle, &noise).unwrap();
    let min_std = (1..=40).map(|d| ensemble_spread(&nu, d).unwrap().std_dev).fold(f64::INFINITY, f64::min);
    check(
        collapsed <= 1e-9 && min_std >= 0.2,
        format!("contraction spread at step 40 = {collapsed:e} (<= 1e-9); fractional min std over d = 1..40 = {min_std:.4} (>= 0.2)"),
    )
}

fn uniform_marginal() -> Outcome {
    let config = DiagnosticsConfig::new(100, 100, 0.01, SEED, (0, 10)).unwrap();
    let r = uniform_marginal_statistic(&config, &fractional_map(), 5, 100, 100).unwrap();
    check(
        r.sample_size == 10_000 && r.passed,
        format!("KS = {:.5} over {} pooled samples (< {:.5})", r.statistic, r.sample_size, r.threshold),
    )
}

fn stationarity() -> Outcome {
    let config = DiagnosticsConfig::new(1000, 256, 0.01, SEED, (0, 10)).unwrap();
    let builder = MeasureBuilder::new(fractional_map(), 256, (0, 10), 0).unwrap();
    let reports = stationarity_suite(&builder, &[1, 2, 5], &unit_cylinder_family(0), &config).unwrap();

    let transient = MeasureBuilder::new(contraction_map(0.5).unwrap(), 256, (0, 5), 0)
        .unwrap()
        .with_initializer(Initializer { index: 0, law: InitLaw::uniform(0.0, 0.5).unwrap() });
    let cfg = DiagnosticsConfig { window: (0, 5), ..config };
    let negative = stationarity_suite(&transient, &[1], &unit_cylinder_family(0), &cfg).unwrap();
    let stats: Vec<String> = reports.iter().map(|r| format!("{:.3}", r.statistic)).collect();
    check(
        reports.iter().all(|r| r.passed) && negative.iter().any(|r| !r.passed),
        format!(
            "KS max for t = 1, 2, 5: [{}] (<= {:.4}); transient control statistic {:.3} fails",
            stats.join(", "),
            reports[0].threshold,
            negative[0].statistic
        ),
    )
}

fn rotation() -> Outcome {
    let config = DiagnosticsConfig::new(100_000, 1, 0.01, SEED, (0, 10)).unwrap();
    let r = rotation_invariance_demo(&config, PI / 3.0).unwrap();
    let mut rng = stream_rng(SEED, Stream::Gaussian, u64::MAX);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let s = RotationState::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)).unwrap();
        let (a, b) = (rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
        let composed = rotation_flow(rotation_flow(s, a), b);
        let direct = rotation_flow(s, a + b);
        worst = worst
            .max((composed.x1 - direct.x1).abs())
            .max((composed.x2 - direct.x2).abs())
            .max((rotation_flow(s, a).norm() - s.norm()).abs());
    }
    check(
        r.passed && worst <= 1e-12,
        format!("moment deviation {:.5} (<= {:.5}); flow/norm error {worst:e} (<= 1e-12)", r.statistic, r.threshold),
    )
}

fn conditional_law() -> Outcome {
    let config = DiagnosticsConfig::new(100, 10_000, 0.01, SEED, (0, 10)).unwrap();
    let r = conditional_law_demo(0.8, 0.5, &config).unwrap();
    check(r.passed, format!("max KS = {:.5} (< {:.5}) at 10^4 conditional samples", r.statistic, r.threshold))
}

fn metric() -> Outcome {
    let grid: Vec<f64> = (-20..=20).map(f64::from).collect();
    let zero = SampledFunction::from_fn(grid.clone(), |_| 0.0).unwrap();
    let one = SampledFunction::from_fn(grid.clone(), |_| 1.0).unwrap();
    let value = traj_metric(&zero, &one, 20).unwrap().value;
    let expected = 0.5 * (1.0 - 2f64.powi(-20));

    let mut rng = stream_rng(SEED, Stream::Spec, u64::MAX);
    let mut random = || {
        let values = grid.iter().map(|_| rng.random_range(-3.0..3.0)).collect();
        SampledFunction::new(grid.clone(), values).unwrap()
    };
    let mut violations = 0;
    for _ in 0..1000 {
        let (f, g, h) = (random(), random(), random());
        let d = |a: &SampledFunction, b: &SampledFunction| traj_metric(a, b, 20).unwrap().value;
        if d(&f, &g) != d(&g, &f) || d(&f, &g) > d(&f, &h) + d(&h, &g) + 1e-12 {
            violations += 1;
        }
    }
    check(
        (value - expected).abs() <= 1e-12 && violations == 0,
        format!("rho(0, 1) = {value:.15} vs {expected:.15}; {violations} axiom violations on 1000 triples"),
    )
}

fn payload(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.contains("\"started_at\"") && !l.contains("\"finished_at\"") && !l.contains("\"threads\""))
        .collect::<Vec<_>>()
        .join("\n")
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_trajmeasure");
    let dir = tempfile::tempdir().unwrap();
    let runs: Vec<Vec<&str>> = vec![
        vec!["simulate", "fractional", "50"],
        vec!["simulate", "contraction:a=0.5", "50"],
        vec!["hopf-check", "fractional", "--particles", "10000", "--window", "16", "--specs", "32"],
        vec!["hopf-check", "fractional", "--perturb"],
        vec!["diagnose", "tsirelson"],
        vec!["diagnose", "stationarity"],
        vec!["diagnose", "rotation"],
        vec!["diagnose", "conditional-law"],
        vec!["diagnose", "consistency"],
        vec!["diagnose", "equivariance"],
    ];
    let mut mismatches = Vec::new();
    for (i, args) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for (rep, threads) in ["1", "4", "4"].iter().enumerate() {
            let out = dir.path().join(format!("run{i}_{rep}.out"));
            let status = Command::new(bin)
                .args(args)
                .args(["--seed", "7", "--threads", threads, "--out"])
                .arg(&out)
                .stderr(std::process::Stdio::null())
                .status()
                .unwrap();
            let manifest = trajmeasure_sidecar(&out);
            if manifest.exists() {
                assert!(payload(&manifest).contains("\"master_seed\": 7"));
            }
            outputs.push((status.code(), payload(&out)));
        }
        if outputs.windows(2).any(|w| w[0] != w[1]) {
            mismatches.push(args.join(" "));
        }
    }
    check(
        mismatches.is_empty(),
        format!("{} commands x 3 runs (--threads 1, 4, 4); mismatches: {mismatches:?}", runs.len()),
    )
}

fn trajmeasure_sidecar(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".manifest.json");
    s.into()
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("1 hopf identity", hopf_identity),
        ("2 consistency", consistency),
        ("3 shift equivariance", equivariance),
        ("4 tsirelson statistic", tsirelson),
        ("5 strong-solution contrast", strong_solution_contrast),
        ("6 uniform marginal", uniform_marginal),
        ("7 stationarity", stationarity),
        ("8 rotation demo", rotation),
        ("9 conditional-law demo", conditional_law),
        ("10 trajectory metric", metric),
        ("11 cli determinism", determinism),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
