use std::path::Path;

use serde_json::json;
use trajmeasure::diagnostics::{
    conditional_char_statistic, conditional_law_details, conditional_law_stationarity, real_cylinder_family,
    rotation_invariance_demo, stationarity_suite, tsirelson_statistic, unconditional_samples, unit_cylinder_family,
    DiagnosticsConfig,
};
use trajmeasure::measure_solution::{
    consistency_check, hopf_report, random_specs, shift_equivariance_gap, shuffle_coordinate, spec_grid,
    EQUIVARIANCE_TOLERANCE,
};
use trajmeasure::random_measure::StatReport;
use trajmeasure::seed::{derive_seed, stream_rng, Stream};
use trajmeasure::{
    conditional_measure, iterate_forward, InitLaw, Initializer, MeasureBuilder, NoiseModel, NoiseWindow, UpdateMap,
};

use crate::manifest::{sidecar, write_manifest, write_report, RunManifest};
use crate::{Cli, Command, DiagnoseOpts, Failure};

pub const HOPF_TOLERANCE: f64 = 1e-9;

pub fn run(cli: &Cli) -> Result<bool, Failure> {
    match &cli.command {
        Command::Simulate { map, steps } => simulate(cli, map, *steps),
        Command::HopfCheck { map, particles, window, specs, perturb } => {
            hopf_check(cli, map, *particles, *window, *specs, *perturb)
        }
        Command::Diagnose { suite, opts } => diagnose(cli, suite, opts),
    }
}

fn parse_map(name: &str) -> Result<UpdateMap, Failure> {
    name.parse::<UpdateMap>().map_err(|e| Failure::Usage(e.to_string()))
}

fn manifest_for(cli: &Cli, command: &str) -> RunManifest {
    let mut m = RunManifest::start(command, cli.seed);
    if let Some(t) = cli.threads {
        m.param("threads", t);
    }
    m
}

fn simulate(cli: &Cli, map_name: &str, steps: u64) -> Result<bool, Failure> {
    let map = parse_map(map_name)?;
    if steps == 0 {
        return Err(Failure::Usage("steps must be at least 1".into()));
    }
    let mut manifest = manifest_for(cli, "simulate");
    manifest.param("map", map_name).param("steps", steps);

    let noise = NoiseModel::uniform(derive_seed(cli.seed, Stream::Noise, 0)).generate(1, steps as usize)?;
    let x0 = InitLaw::default().draw(derive_seed(cli.seed, Stream::Init, 0));
    let path = iterate_forward(x0, &noise, &map);

    let sink: Box<dyn std::io::Write> = match &cli.out {
        Some(p) => Box::new(std::fs::File::create(p)?),
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(sink);
    w.write_record(["index", "x", "xi"])?;
    for (k, x) in path.values().iter().enumerate() {
        let index = path.offset() + k as i64;
        let xi = noise.get(index).map(|v| v.to_string()).unwrap_or_default();
        w.write_record([index.to_string(), x.to_string(), xi])?;
    }
    w.flush()?;
    manifest.finish();
    if let Some(p) = &cli.out {
        write_manifest(&sidecar(p), &manifest)?;
    }
    Ok(true)
}

fn hopf_check(cli: &Cli, map_name: &str, particles: usize, window: i64, specs: usize, perturb: bool) -> Result<bool, Failure> {
    let map = parse_map(map_name)?;
    if particles == 0 {
        return Err(Failure::Usage("--particles must be at least 1".into()));
    }
    if window < 3 {
        return Err(Failure::Usage("--window must be at least 3".into()));
    }
    let mut manifest = manifest_for(cli, "hopf-check");
    manifest
        .param("map", map_name)
        .param("particles", particles)
        .param("window", window)
        .param("specs", specs)
        .param("perturb", perturb);

    let bounds = (0, window - 1);
    let builder = MeasureBuilder::new(map.clone(), particles, bounds, derive_seed(cli.seed, Stream::Init, 0))?;
    let (lo, hi) = builder.noise_range();
    let noise = NoiseModel::uniform(derive_seed(cli.seed, Stream::Noise, 0)).generate_range(lo, hi)?;
    let mut mu = conditional_measure(&builder, &noise)?;
    if perturb {
        mu = shuffle_coordinate(&mu, bounds.1, cli.seed)?;
    }
    let mut all_specs = spec_grid(bounds);
    all_specs.extend(random_specs(bounds, specs, derive_seed(cli.seed, Stream::Spec, 0)));
    let reports = all_specs
        .iter()
        .map(|s| hopf_report(&mu, &noise, s, &map))
        .collect::<Result<Vec<_>, _>>()?;
    let max_residual = reports.iter().map(|r| r.residual).fold(0.0, f64::max);
    eprintln!("hopf-check: {} specs, max residual {max_residual:e}", reports.len());

    manifest.finish();
    write_report(
        cli.out.as_deref(),
        &manifest,
        serde_json::to_value(&reports).expect("serializable"),
        &[("max_residual", json!(max_residual)), ("tolerance", json!(HOPF_TOLERANCE))],
    )?;
    Ok(max_residual <= HOPF_TOLERANCE)
}

const SUITES: [&str; 6] = ["tsirelson", "stationarity", "rotation", "conditional-law", "consistency", "equivariance"];

fn diagnose(cli: &Cli, suite: &str, opts: &DiagnoseOpts) -> Result<bool, Failure> {
    if !SUITES.contains(&suite) {
        return Err(Failure::Usage(format!("unknown suite {suite:?}; expected one of {}", SUITES.join(", "))));
    }
    if opts.window < 5 {
        return Err(Failure::Usage("--window must be at least 5".into()));
    }
    let mut manifest = manifest_for(cli, &format!("diagnose {suite}"));
    let window = (0, opts.window - 1);
    let reports = match suite {
        "tsirelson" => tsirelson(cli, opts, window, &mut manifest)?,
        "stationarity" => stationarity(cli, opts, window, &mut manifest)?,
        "rotation" => {
            let n = opts.n.unwrap_or(100_000);
            manifest.param("n", n).param("t", opts.t);
            let config = DiagnosticsConfig::new(n, 1, opts.alpha, cli.seed, window)?;
            vec![rotation_invariance_demo(&config, opts.t)?]
        }
        "conditional-law" => conditional_law(cli, opts, window, &mut manifest)?,
        "consistency" => consistency(cli, opts, window, &mut manifest)?,
        "equivariance" => equivariance(cli, opts, window, &mut manifest)?,
        _ => unreachable!("suite validated above"),
    };
    for r in &reports {
        eprintln!(
            "{} {}: statistic {:.6e} threshold {:.6e}",
            if r.passed { "PASS" } else { "FAIL" },
            r.test_name,
            r.statistic,
            r.threshold
        );
    }
    manifest.finish();
    let all_passed = reports.iter().all(|r| r.passed);
    write_report(
        cli.out.as_deref(),
        &manifest,
        serde_json::to_value(&reports).expect("serializable"),
        &[("all_passed", json!(all_passed))],
    )?;
    Ok(all_passed)
}

fn tsirelson(cli: &Cli, opts: &DiagnoseOpts, window: (i64, i64), manifest: &mut RunManifest) -> Result<Vec<StatReport>, Failure> {
    let map = parse_map(&opts.map)?;
    let n = opts.n.unwrap_or(100_000);
    let particles = opts.particles.unwrap_or(10_000);
    manifest
        .param("map", &opts.map)
        .param("n", n)
        .param("particles", particles)
        .param("paths", opts.paths)
        .param("index", opts.index)
        .param("window", opts.window);
    let config = DiagnosticsConfig::new(n, particles, opts.alpha, cli.seed, window)?;
    let reports = vec![
        tsirelson_statistic(&config, &map, opts.index)?,
        conditional_char_statistic(&config, &map, opts.index, opts.paths)?,
    ];
    if let Some(path) = &opts.csv {
        let xs = unconditional_samples(&config, &map, opts.index)?;
        write_csv(path, &["replica", "x"], xs.iter().enumerate().map(|(r, x)| vec![r.to_string(), x.to_string()]))?;
    }
    Ok(reports)
}

fn stationarity(cli: &Cli, opts: &DiagnoseOpts, window: (i64, i64), manifest: &mut RunManifest) -> Result<Vec<StatReport>, Failure> {
    let map = parse_map(&opts.map)?;
    let n = opts.n.unwrap_or(1000);
    let particles = opts.particles.unwrap_or(256);
    manifest
        .param("map", &opts.map)
        .param("n", n)
        .param("particles", particles)
        .param("shifts", format!("{:?}", opts.shifts))
        .param("window", opts.window);
    let config = DiagnosticsConfig::new(n, particles, opts.alpha, cli.seed, window)?;
    let builder = MeasureBuilder::new(map, particles, window, 0)?;
    Ok(stationarity_suite(&builder, &opts.shifts, &unit_cylinder_family(window.0), &config)?)
}

fn conditional_law(cli: &Cli, opts: &DiagnoseOpts, window: (i64, i64), manifest: &mut RunManifest) -> Result<Vec<StatReport>, Failure> {
    let n = opts.n.unwrap_or(1000);
    let particles = opts.particles.unwrap_or(10_000);
    manifest
        .param("rho", opts.rho)
        .param("a", opts.a)
        .param("n", n)
        .param("particles", particles)
        .param("shifts", format!("{:?}", opts.shifts))
        .param("window", opts.window);
    let config = DiagnosticsConfig::new(n, particles, opts.alpha, cli.seed, window)?;
    let details = conditional_law_details(opts.rho, opts.a, &config)?;
    let ks = details.iter().map(|d| d.ks_distance).fold(0.0, f64::max);
    let mean_dev = details.iter().map(|d| d.mean_deviation).fold(0.0, f64::max);
    let mut reports = vec![
        StatReport::new(
            format!("conditional_law@rho={},a={}", opts.rho, opts.a),
            ks,
            trajmeasure::ks::one_sample_critical(opts.alpha, particles),
            particles as u64,
            cli.seed,
        ),
        StatReport::new(
            "conditional_law_mean",
            mean_dev,
            5.0 * (1.0 - opts.rho * opts.rho).sqrt() / (particles as f64).sqrt(),
            particles as u64,
            cli.seed,
        ),
    ];
    // the stationarity replicas use a lighter ensemble
    let light = DiagnosticsConfig { particle_count: particles.min(200), ..config };
    reports.extend(conditional_law_stationarity(opts.rho, opts.a, &opts.shifts, &real_cylinder_family(window.0), &light)?);
    Ok(reports)
}

fn consistency(cli: &Cli, opts: &DiagnoseOpts, window: (i64, i64), manifest: &mut RunManifest) -> Result<Vec<StatReport>, Failure> {
    let map = parse_map(&opts.map)?;
    let pairs = opts.n.unwrap_or(100);
    let particles = opts.particles.unwrap_or(1000);
    manifest
        .param("map", &opts.map)
        .param("n", pairs)
        .param("particles", particles)
        .param("window", opts.window);
    let builder = MeasureBuilder::new(map, particles, window, derive_seed(cli.seed, Stream::Init, 0))?;
    let (lo, hi) = builder.noise_range();
    let mut failures = 0u64;
    let mut rows = Vec::with_capacity(pairs);
    for p in 0..pairs as u64 {
        let (a, b, n) = noise_pair(cli.seed, p, lo, hi)?;
        let ok = consistency_check(&builder, &a, &b, n)?;
        failures += u64::from(!ok);
        rows.push(vec![p.to_string(), n.to_string(), ok.to_string()]);
    }
    if let Some(path) = &opts.csv {
        write_csv(path, &["pair", "n", "agree"], rows)?;
    }
    Ok(vec![StatReport::new("consistency", failures as f64, 0.0, pairs as u64, cli.seed)])
}

/// Two noise paths on `[lo, hi]` that agree up to a random `n` and differ at
/// every index after it.
pub fn noise_pair(seed: u64, pair: u64, lo: i64, hi: i64) -> Result<(NoiseWindow, NoiseWindow, i64), Failure> {
    use rand::Rng;
    let mut rng = stream_rng(seed, Stream::Pair, pair);
    let n = rng.random_range(lo - 1..hi);
    let a = NoiseModel::uniform(derive_seed(seed, Stream::Noise, 2 * pair)).generate_range(lo, hi)?;
    let fresh = NoiseModel::uniform(derive_seed(seed, Stream::Noise, 2 * pair + 1)).generate_range(lo, hi)?;
    let values = a
        .values()
        .iter()
        .zip(fresh.values())
        .enumerate()
        .map(|(k, (&x, &y))| if lo + (k as i64) <= n || x == y { x } else { y })
        .collect();
    let b = NoiseWindow::new(lo, values)?;
    Ok((a, b, n))
}

fn equivariance(cli: &Cli, opts: &DiagnoseOpts, window: (i64, i64), manifest: &mut RunManifest) -> Result<Vec<StatReport>, Failure> {
    let map = parse_map(&opts.map)?;
    let particles = opts.particles.unwrap_or(1000);
    manifest
        .param("map", &opts.map)
        .param("particles", particles)
        .param("shifts", format!("{:?}", opts.shifts))
        .param("window", opts.window);
    let init_index = if map.has_inverse() { window.0 + 2 } else { window.0 };
    let builder = MeasureBuilder::new(map, particles, window, derive_seed(cli.seed, Stream::Init, 0))?
        .with_initializer(Initializer { index: init_index, ..Initializer::default() });
    let (lo, hi) = builder.noise_range();
    let noise = NoiseModel::uniform(derive_seed(cli.seed, Stream::Noise, 0)).generate_range(lo, hi)?;
    opts.shifts
        .iter()
        .map(|&t| {
            let gap = shift_equivariance_gap(&builder, &noise, t)?;
            Ok(StatReport::new(format!("equivariance@t={t}"), gap, EQUIVARIANCE_TOLERANCE, particles as u64, cli.seed))
        })
        .collect()
}

fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<(), Failure>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}
