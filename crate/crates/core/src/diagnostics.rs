//! Worked examples as executable checks.
//!
//! * circle rotation `x_{n+1} = {x_n + xi_{n+1}}`: the unconditional and
//!   noise-conditional means of `exp(2 pi i x_n)` vanish, the marginal is
//!   uniform, and the conditional particle measure is stationary;
//! * rotation flow in the plane preserving the standard Gaussian;
//! * conditional law of one coordinate of a stationary Gaussian pair given
//!   the other.
//!
//! Thresholds of the form `5 / sqrt(N)` are used wherever the population
//! value is known in closed form; seeds are fixed, so reports are
//! deterministic.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::ks;
use crate::measure_solution::{conditional_measure, MeasureBuilder};
use crate::path_space::{NoiseWindow, PathWindow};
use crate::random_measure::{
    distributions_equal, integrate, shift_measure, CylinderSet, ParticleMeasure, SeededSampler, StatReport,
};
use crate::recurrence_engine::{stationary_sampler, Initializer, NoiseModel, UpdateMap};
use crate::seed::{derive_seed, stream_rng, Stream};
use crate::sum::{mean, pairwise_sum, pairwise_sum_complex};

pub const MIN_SAMPLE_SIZE: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsConfig {
    pub sample_size: usize,
    pub particle_count: usize,
    pub alpha: f64,
    pub seed: u64,
    pub window: (i64, i64),
}

impl DiagnosticsConfig {
    pub fn new(sample_size: usize, particle_count: usize, alpha: f64, seed: u64, window: (i64, i64)) -> Result<Self> {
        let c = Self { sample_size, particle_count, alpha, seed, window };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_size < MIN_SAMPLE_SIZE {
            return domain(format!("sample_size {} below {MIN_SAMPLE_SIZE}", self.sample_size));
        }
        if self.particle_count == 0 {
            return domain("particle_count must be positive");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return domain(format!("alpha {} outside (0, 1)", self.alpha));
        }
        if self.window.0 >= self.window.1 {
            return domain(format!("window {:?} needs lo < hi", self.window));
        }
        Ok(())
    }

    fn require_index(&self, n: i64) -> Result<()> {
        if n < self.window.0 || n > self.window.1 {
            return domain(format!("index {n} outside window {:?}", self.window));
        }
        Ok(())
    }

    fn noise_model(&self, stream: u64) -> NoiseModel {
        NoiseModel::uniform(derive_seed(self.seed, Stream::Noise, stream))
    }
}

/// `5 / sqrt(n)`.
pub fn five_sigma(n: usize) -> f64 {
    5.0 / (n as f64).sqrt()
}

/// Empirical mean of `exp(2 pi i x)`.
pub fn circle_moment(values: &[f64]) -> Complex64 {
    let terms: Vec<Complex64> = values.iter().map(|&x| Complex64::from_polar(1.0, TAU * x)).collect();
    pairwise_sum_complex(&terms) / values.len() as f64
}

/// Coordinate `n` of `sample_size` independent solutions, each with fresh
/// noise and a fresh uniform initializer at `config.window.0`.
pub fn unconditional_samples(config: &DiagnosticsConfig, map: &UpdateMap, n: i64) -> Result<Vec<f64>> {
    config.validate()?;
    config.require_index(n)?;
    let init = Initializer { index: config.window.0, ..Initializer::default() };
    (0..config.sample_size as u64)
        .into_par_iter()
        .map(|r| {
            let noise = config.noise_model(r).generate_range(config.window.0 + 1, config.window.1)?;
            let path = stationary_sampler(map, &noise, &init, derive_seed(config.seed, Stream::Init, r))?;
            path.at(n)
        })
        .collect()
}

/// `|mean exp(2 pi i x_n)|` over independent runs against `5 / sqrt(N)`.
/// The population value is zero for the circle rotation; for other maps the
/// report is informational.
pub fn tsirelson_statistic(config: &DiagnosticsConfig, map: &UpdateMap, n: i64) -> Result<StatReport> {
    let xs = unconditional_samples(config, map, n)?;
    Ok(StatReport::new(
        format!("tsirelson[{}]@{n}", map.name()),
        circle_moment(&xs).norm(),
        five_sigma(xs.len()),
        xs.len() as u64,
        config.seed,
    ))
}

fn conditional_builder(config: &DiagnosticsConfig, map: &UpdateMap, path: u64) -> Result<MeasureBuilder> {
    MeasureBuilder::new(
        map.clone(),
        config.particle_count,
        config.window,
        derive_seed(config.seed, Stream::Init, path),
    )
}

fn conditional_noise(config: &DiagnosticsConfig, builder: &MeasureBuilder, path: u64) -> Result<NoiseWindow> {
    let (lo, hi) = builder.noise_range();
    config.noise_model(path).generate_range(lo, hi)
}

/// Per noise path, `|int exp(2 pi i u_n) mu(du)|` for the conditional measure.
pub fn conditional_char_values(config: &DiagnosticsConfig, map: &UpdateMap, n: i64, noise_paths: usize) -> Result<Vec<f64>> {
    config.validate()?;
    config.require_index(n)?;
    (0..noise_paths as u64)
        .map(|p| {
            let builder = conditional_builder(config, map, p)?;
            let mu = conditional_measure(&builder, &conditional_noise(config, &builder, p)?)?;
            Ok(integrate(&mu, |u| Complex64::from_polar(1.0, TAU * u.get(n).expect("in window"))).norm())
        })
        .collect()
}

/// Largest conditional characteristic modulus over `noise_paths` frozen
/// noise paths, against `5 / sqrt(particle_count)`.
pub fn conditional_char_statistic(
    config: &DiagnosticsConfig,
    map: &UpdateMap,
    n: i64,
    noise_paths: usize,
) -> Result<StatReport> {
    if noise_paths == 0 {
        return domain("need at least one noise path");
    }
    let values = conditional_char_values(config, map, n, noise_paths)?;
    Ok(StatReport::new(
        format!("conditional_char[{}]@{n}", map.name()),
        values.iter().cloned().fold(0.0, f64::max),
        five_sigma(config.particle_count),
        config.particle_count as u64,
        config.seed,
    ))
}

/// KS distance of pooled `x_n` samples to uniform `[0, 1)`: `draws_per_path`
/// initializers for each of `noise_paths` noise paths.
pub fn uniform_marginal_statistic(
    config: &DiagnosticsConfig,
    map: &UpdateMap,
    n: i64,
    noise_paths: usize,
    draws_per_path: usize,
) -> Result<StatReport> {
    config.validate()?;
    config.require_index(n)?;
    if noise_paths == 0 || draws_per_path == 0 {
        return domain("need at least one noise path and one draw per path");
    }
    let cfg = DiagnosticsConfig { particle_count: draws_per_path, ..*config };
    let mut pooled = Vec::with_capacity(noise_paths * draws_per_path);
    for p in 0..noise_paths as u64 {
        let builder = conditional_builder(&cfg, map, p)?;
        let mu = conditional_measure(&builder, &conditional_noise(&cfg, &builder, p)?)?;
        pooled.extend(mu.coordinate(n)?);
    }
    Ok(StatReport::new(
        format!("uniform_marginal[{}]@{n}", map.name()),
        ks::one_sample_statistic(&pooled, ks::uniform_cdf),
        ks::one_sample_critical(config.alpha, pooled.len()),
        pooled.len() as u64,
        config.seed,
    ))
}

/// One [`distributions_equal`] report per shift `t`, comparing the
/// conditional-measure sampler with its image under translation by `t`.
/// Each replica draws fresh uniform noise and a fresh particle seed stream.
pub fn stationarity_suite(
    builder: &MeasureBuilder,
    shifts: &[i64],
    deltas: &[CylinderSet],
    config: &DiagnosticsConfig,
) -> Result<Vec<StatReport>> {
    config.validate()?;
    if shifts.iter().any(|&t| t == 0) {
        return domain("shift 0 is a vacuous stationarity test");
    }
    let (lo, hi) = builder.window;
    if let Some(d) = deltas.iter().find(|d| d.start() < lo || d.end() > hi) {
        return domain(format!("cylinder set on [{}, {}] outside window [{lo}, {hi}]", d.start(), d.end()));
    }
    let draw_with = |b: &MeasureBuilder, t: i64, seed: u64| -> Result<ParticleMeasure> {
        let b = b.clone().with_seed_stream(derive_seed(seed, Stream::Init, 0));
        let (nlo, nhi) = b.noise_range();
        let noise = NoiseModel::uniform(derive_seed(seed, Stream::Noise, 0)).generate_range(nlo, nhi)?;
        Ok(shift_measure(&conditional_measure(&b, &noise)?, t))
    };
    shifts
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let shifted = MeasureBuilder { window: (lo + t, hi + t), ..builder.clone() };
            let draw_a = |seed: u64| draw_with(builder, 0, seed);
            let draw_b = |seed: u64| draw_with(&shifted, t, seed);
            let a = SeededSampler::new(derive_seed(config.seed, Stream::SamplerA, i as u64), &draw_a);
            let b = SeededSampler::new(derive_seed(config.seed, Stream::SamplerB, i as u64), &draw_b);
            let mut report = distributions_equal(&a, &b, deltas, config.sample_size, config.alpha)?;
            report.test_name = format!("stationarity[{}]@t={t}", builder.map.name());
            report.seed = config.seed;
            Ok(report)
        })
        .collect()
}

/// Cylinder family used by the stationarity checks on `[0, 1)`-valued
/// paths: one-, two- and three-coordinate rectangles starting at `lo`,
/// `lo + 1` and `lo + 2`. Needs a window of at least five indices.
pub fn unit_cylinder_family(lo: i64) -> Vec<CylinderSet> {
    vec![
        CylinderSet::from_bounds(lo, &[(0.0, 0.5)]).expect("valid bounds"),
        CylinderSet::from_bounds(lo + 1, &[(0.0, 0.5), (0.25, 0.75)]).expect("valid bounds"),
        CylinderSet::from_bounds(lo + 2, &[(0.1, 0.4), (0.5, 0.9), (0.0, 0.5)]).expect("valid bounds"),
    ]
}

/// Same shape as [`unit_cylinder_family`] for real-valued (Gaussian) paths.
pub fn real_cylinder_family(lo: i64) -> Vec<CylinderSet> {
    vec![
        CylinderSet::from_bounds(lo, &[(-10.0, 0.0)]).expect("valid bounds"),
        CylinderSet::from_bounds(lo + 1, &[(-0.5, 0.5), (0.0, 10.0)]).expect("valid bounds"),
        CylinderSet::from_bounds(lo + 2, &[(-1.0, 1.0), (-10.0, 0.3), (-0.7, 10.0)]).expect("valid bounds"),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationState {
    pub x1: f64,
    pub x2: f64,
}

impl RotationState {
    pub fn new(x1: f64, x2: f64) -> Result<Self> {
        if !x1.is_finite() || !x2.is_finite() {
            return domain("rotation state must be finite");
        }
        Ok(Self { x1, x2 })
    }

    pub fn norm(&self) -> f64 {
        self.x1.hypot(self.x2)
    }
}

/// Exact flow `exp(tT)` of `dx = T x dt` with `T = [[0, -1], [1, 0]]`.
pub fn rotation_flow(state: RotationState, t: f64) -> RotationState {
    let (s, c) = t.sin_cos();
    RotationState { x1: state.x1 * c - state.x2 * s, x2: state.x1 * s + state.x2 * c }
}

/// Standard Gaussian mass pushed through the rotation by `t`.
pub fn rotation_invariance_demo(config: &DiagnosticsConfig, t: f64) -> Result<StatReport> {
    rotation_invariance_from(config, t, (0.0, 0.0))
}

/// As [`rotation_invariance_demo`] with the initial mass centred at `centre`.
/// The statistic is the largest of `|mean_i|` and `|cov_ij - delta_ij|`.
pub fn rotation_invariance_from(config: &DiagnosticsConfig, t: f64, centre: (f64, f64)) -> Result<StatReport> {
    config.validate()?;
    let pts: Vec<RotationState> = (0..config.sample_size as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(config.seed, Stream::Gaussian, i);
            let x1: f64 = rng.sample(StandardNormal);
            let x2: f64 = rng.sample(StandardNormal);
            rotation_flow(RotationState { x1: x1 + centre.0, x2: x2 + centre.1 }, t)
        })
        .collect();
    let xs: Vec<f64> = pts.iter().map(|p| p.x1).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.x2).collect();
    let (mx, my) = (mean(&xs), mean(&ys));
    let dof = (pts.len() - 1) as f64;
    let cov = |a: &[f64], ma: f64, b: &[f64], mb: f64| {
        let prods: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).collect();
        pairwise_sum(&prods) / dof
    };
    let statistic = [
        mx.abs(),
        my.abs(),
        (cov(&xs, mx, &xs, mx) - 1.0).abs(),
        (cov(&ys, my, &ys, my) - 1.0).abs(),
        cov(&xs, mx, &ys, my).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    Ok(StatReport::new(
        format!("rotation_invariance@t={t}"),
        statistic,
        five_sigma(pts.len()),
        pts.len() as u64,
        config.seed,
    ))
}

/// Per-index outcome of the Gaussian conditional-law check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalLawIndex {
    pub index: i64,
    pub y: f64,
    pub ks_distance: f64,
    /// `|mean(x) - rho y|`.
    pub mean_deviation: f64,
}

fn check_correlations(rho: f64, a: f64) -> Result<()> {
    if !(rho.abs() < 1.0) {
        return domain(format!("rho {rho} must satisfy |rho| < 1"));
    }
    if !(a.abs() < 1.0) {
        return domain(format!("a {a} must satisfy |a| < 1"));
    }
    Ok(())
}

/// Stationary Gaussian AR(1) path `y_{k+1} = a y_k + sqrt(1 - a^2) zeta_{k+1}`
/// started from `N(0, 1)` at `window.0`.
pub fn stationary_gaussian_path(a: f64, window: (i64, i64), seed: u64) -> Result<PathWindow> {
    if window.0 > window.1 {
        return domain(format!("window {window:?} is empty"));
    }
    let mut rng = stream_rng(seed, Stream::Pair, 0);
    let scale = (1.0 - a * a).sqrt();
    let mut y: f64 = rng.sample(StandardNormal);
    let mut values = vec![y];
    for _ in window.0..window.1 {
        let z: f64 = rng.sample(StandardNormal);
        y = a * y + scale * z;
        values.push(y);
    }
    PathWindow::new(window.0, values)
}

/// Particle measure of `x_k = rho y_k + sqrt(1 - rho^2) eps_k` given the
/// frozen `y`, one independent `eps` sequence per particle.
pub fn gaussian_conditional_measure(rho: f64, y: &PathWindow, particles: usize, seed: u64) -> Result<ParticleMeasure> {
    let scale = (1.0 - rho * rho).sqrt();
    let paths = (0..particles as u64)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream_rng(seed, Stream::Particle, j);
            let values = y
                .values()
                .iter()
                .map(|&yk| rho * yk + scale * rng.sample::<f64, _>(StandardNormal))
                .collect();
            PathWindow::new(y.offset(), values)
        })
        .collect::<Result<Vec<_>>>()?;
    ParticleMeasure::uniform(paths)
}

const CONDITIONAL_LAW_INDICES: i64 = 5;

/// Empirical conditional law of `x_k` given the simulated `y`, at up to five
/// evenly spaced indices of the window, compared with `N(rho y_k, 1 - rho^2)`.
pub fn conditional_law_details(rho: f64, a: f64, config: &DiagnosticsConfig) -> Result<Vec<ConditionalLawIndex>> {
    check_correlations(rho, a)?;
    config.validate()?;
    let y = stationary_gaussian_path(a, config.window, config.seed)?;
    let mu = gaussian_conditional_measure(rho, &y, config.particle_count, config.seed)?;
    let width = config.window.1 - config.window.0;
    let count = CONDITIONAL_LAW_INDICES.min(width + 1);
    let sd = (1.0 - rho * rho).sqrt();
    (0..count)
        .map(|i| {
            let index = config.window.0 + i * width / (count - 1);
            let yk = y.at(index)?;
            let xs = mu.coordinate(index)?;
            let centre = rho * yk;
            Ok(ConditionalLawIndex {
                index,
                y: yk,
                ks_distance: ks::one_sample_statistic(&xs, |x| ks::normal_cdf((x - centre) / sd)),
                mean_deviation: (mean(&xs) - rho * yk).abs(),
            })
        })
        .collect()
}

/// Largest KS distance over the tested indices against the one-sample
/// critical value at `config.alpha`.
pub fn conditional_law_demo(rho: f64, a: f64, config: &DiagnosticsConfig) -> Result<StatReport> {
    let details = conditional_law_details(rho, a, config)?;
    Ok(StatReport::new(
        format!("conditional_law@rho={rho},a={a}"),
        details.iter().map(|d| d.ks_distance).fold(0.0, f64::max),
        ks::one_sample_critical(config.alpha, config.particle_count),
        config.particle_count as u64,
        config.seed,
    ))
}

/// Stationarity of the Gaussian conditional-law measure under translations.
pub fn conditional_law_stationarity(
    rho: f64,
    a: f64,
    shifts: &[i64],
    deltas: &[CylinderSet],
    config: &DiagnosticsConfig,
) -> Result<Vec<StatReport>> {
    check_correlations(rho, a)?;
    config.validate()?;
    if shifts.iter().any(|&t| t == 0) {
        return domain("shift 0 is a vacuous stationarity test");
    }
    let (lo, hi) = config.window;
    let particles = config.particle_count;
    let draw_with = |window: (i64, i64), t: i64, seed: u64| -> Result<ParticleMeasure> {
        let y = stationary_gaussian_path(a, window, seed)?;
        Ok(shift_measure(&gaussian_conditional_measure(rho, &y, particles, seed)?, t))
    };
    shifts
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let draw_a = |seed: u64| draw_with((lo, hi), 0, seed);
            let draw_b = |seed: u64| draw_with((lo + t, hi + t), t, seed);
            let sa = SeededSampler::new(derive_seed(config.seed, Stream::SamplerA, i as u64), &draw_a);
            let sb = SeededSampler::new(derive_seed(config.seed, Stream::SamplerB, i as u64), &draw_b);
            let mut report = distributions_equal(&sa, &sb, deltas, config.sample_size, config.alpha)?;
            report.test_name = format!("conditional_law_stationarity@t={t}");
            report.seed = config.seed;
            Ok(report)
        })
        .collect()
}
