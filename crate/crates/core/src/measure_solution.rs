//! Conditional particle measures `mu(.) = P{x in . | xi}` and checks that
//! they are measure-valued strong solutions: adaptedness to the noise past,
//! the characteristic-functional identity linking consecutive coordinates,
//! and equivariance under joint translation of noise and paths.
//!
//! A measure is built from one frozen noise path by starting many
//! independent initializers and running each through the same noise.
//! Particle `j` always uses the seed `derive_seed(init_seed_stream, Particle, j)`,
//! so two builds that share a stream are coupled particle by particle. This
//! coupling is what lets the almost-sure identities be checked bit-exactly.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::path_space::{NoiseWindow, PathWindow};
use crate::random_measure::{integrate, shift_measure, ParticleMeasure};
use crate::recurrence_engine::{stationary_sampler, Initializer, UpdateMap};
use crate::seed::{derive_seed, stream_rng, Stream};
use crate::sum::std_dev;

/// Parameters of the characteristic functional
/// `exp(i sum_k lambda_k u_{n+k} + i rho u_{n+m+1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharSpec {
    pub n: i64,
    pub m: usize,
    pub lambdas: Vec<f64>,
    pub rho: f64,
}

impl CharSpec {
    pub fn new(n: i64, lambdas: Vec<f64>, rho: f64) -> Result<Self> {
        if lambdas.is_empty() {
            return domain("characteristic spec needs m >= 1");
        }
        Ok(Self { n, m: lambdas.len(), lambdas, rho })
    }

    fn validate(&self) -> Result<()> {
        if self.m == 0 || self.lambdas.len() != self.m {
            return domain(format!("spec has m = {} but {} lambdas", self.m, self.lambdas.len()));
        }
        Ok(())
    }

    /// Index of the last coordinate under the `lambda` sum, `n + m`.
    pub fn last_lambda_index(&self) -> i64 {
        self.n + self.m as i64
    }

    fn linear_phase(&self, u: &PathWindow) -> f64 {
        self.lambdas
            .iter()
            .enumerate()
            .map(|(k, l)| l * u.get(self.n + 1 + k as i64).expect("window checked"))
            .fold(0.0, |acc, t| acc + t)
    }
}

#[derive(Debug, Clone)]
pub struct MeasureBuilder {
    pub map: UpdateMap,
    pub particle_count: usize,
    /// Inclusive index range `(n_lo, n_hi)` of the returned particles.
    pub window: (i64, i64),
    pub init_seed_stream: u64,
    pub initializer: Initializer,
}

impl MeasureBuilder {
    pub fn new(map: UpdateMap, particle_count: usize, window: (i64, i64), init_seed_stream: u64) -> Result<Self> {
        let b = Self {
            map,
            particle_count,
            window,
            init_seed_stream,
            initializer: Initializer { index: window.0, ..Initializer::default() },
        };
        b.validate()?;
        Ok(b)
    }

    pub fn with_initializer(mut self, initializer: Initializer) -> Self {
        self.initializer = initializer;
        self
    }

    pub fn with_seed_stream(mut self, init_seed_stream: u64) -> Self {
        self.init_seed_stream = init_seed_stream;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.particle_count == 0 {
            return domain("particle_count must be positive");
        }
        if self.window.0 >= self.window.1 {
            return domain(format!("window {:?} needs n_lo < n_hi", self.window));
        }
        Ok(())
    }

    /// Window and initializer moved `t` steps to the right.
    pub fn translated(&self, t: i64) -> Self {
        let mut b = self.clone();
        b.window = (self.window.0 + t, self.window.1 + t);
        b.initializer.index += t;
        b
    }

    /// Noise indices `[lo, hi]` read by [`conditional_measure`].
    pub fn noise_range(&self) -> (i64, i64) {
        let i0 = self.initializer.index;
        (self.window.0.min(i0) + 1, self.window.1.max(i0))
    }

    pub fn particle_seed(&self, j: usize) -> u64 {
        derive_seed(self.init_seed_stream, Stream::Particle, j as u64)
    }
}

/// Uniform-weight ensemble of solutions driven by the same noise path, one
/// per independent initializer draw, restricted to `builder.window`.
pub fn conditional_measure(builder: &MeasureBuilder, noise: &NoiseWindow) -> Result<ParticleMeasure> {
    builder.validate()?;
    let (lo, hi) = builder.noise_range();
    if !noise.contains(lo) || !noise.contains(hi) {
        return domain(format!(
            "noise window [{}, {}] does not cover the required range [{lo}, {hi}]",
            noise.first_index(),
            noise.last_index()
        ));
    }
    let noise = noise.slice(lo, hi)?;
    let (w_lo, w_hi) = builder.window;
    let particles = (0..builder.particle_count)
        .into_par_iter()
        .map(|j| {
            let path = stationary_sampler(&builder.map, &noise, &builder.initializer, builder.particle_seed(j))?;
            path.slice(w_lo, w_hi)
        })
        .collect::<Result<Vec<_>>>()?;
    ParticleMeasure::uniform(particles)
}

/// Left side of the identity: `int exp(i sum lambda_k u_{n+k} + i rho u_{n+m+1}) mu(du)`.
pub fn hopf_lhs(mu: &ParticleMeasure, spec: &CharSpec) -> Result<Complex64> {
    spec.validate()?;
    mu.require_indices(spec.n + 1, spec.last_lambda_index() + 1)?;
    let target = spec.last_lambda_index() + 1;
    Ok(integrate(mu, |u| {
        let phase = spec.linear_phase(u) + spec.rho * u.get(target).expect("window checked");
        Complex64::from_polar(1.0, phase)
    }))
}

/// Right side: the last coordinate replaced by `phi(u_{n+m}, xi_{n+m+1})`.
pub fn hopf_rhs(mu: &ParticleMeasure, noise: &NoiseWindow, spec: &CharSpec, map: &UpdateMap) -> Result<Complex64> {
    spec.validate()?;
    mu.require_indices(spec.n + 1, spec.last_lambda_index())?;
    let last = spec.last_lambda_index();
    let xi = noise.at(last + 1)?;
    Ok(integrate(mu, |u| {
        let next = map.apply(u.get(last).expect("window checked"), xi);
        let phase = spec.linear_phase(u) + spec.rho * next;
        Complex64::from_polar(1.0, phase)
    }))
}

pub fn hopf_residual(mu: &ParticleMeasure, noise: &NoiseWindow, spec: &CharSpec, map: &UpdateMap) -> Result<f64> {
    Ok(hopf_report(mu, noise, spec, map)?.residual)
}

/// One evaluation of both sides; serializes as
/// `{spec, lhs_re, lhs_im, rhs_re, rhs_im, residual}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub spec: CharSpec,
    pub lhs_re: f64,
    pub lhs_im: f64,
    pub rhs_re: f64,
    pub rhs_im: f64,
    pub residual: f64,
}

pub fn hopf_report(mu: &ParticleMeasure, noise: &NoiseWindow, spec: &CharSpec, map: &UpdateMap) -> Result<ResidualReport> {
    let lhs = hopf_lhs(mu, spec)?;
    let rhs = hopf_rhs(mu, noise, spec, map)?;
    Ok(ResidualReport {
        spec: spec.clone(),
        lhs_re: lhs.re,
        lhs_im: lhs.im,
        rhs_re: rhs.re,
        rhs_im: rhs.im,
        residual: (lhs - rhs).norm(),
    })
}

const GRID_LAMBDAS: [f64; 3] = [1.0, -0.5, 2.0];
const GRID_RHOS: [f64; 4] = [0.0, 1.0, -2.5, std::f64::consts::TAU];

/// Deterministic family of specs inside `window`: `m = 1..=3`, the leftmost
/// and rightmost admissible `n`, and a few `rho` values including `0` and `2 pi`.
pub fn spec_grid(window: (i64, i64)) -> Vec<CharSpec> {
    let width = window.1 - window.0 + 1;
    let mut specs = Vec::new();
    for m in 1..=3usize {
        if (m as i64) + 1 > width {
            break;
        }
        let n_min = window.0 - 1;
        let n_max = window.1 - m as i64 - 1;
        let mut ns = vec![n_min];
        if n_max != n_min {
            ns.push(n_max);
        }
        for n in ns {
            for &rho in &GRID_RHOS {
                specs.push(CharSpec { n, m, lambdas: GRID_LAMBDAS[..m].to_vec(), rho });
            }
        }
    }
    specs
}

/// `count` specs with `m` up to 4, `n` uniform over admissible positions,
/// and `lambda_k`, `rho` uniform in `[-10, 10)`.
pub fn random_specs(window: (i64, i64), count: usize, seed: u64) -> Vec<CharSpec> {
    let width = window.1 - window.0 + 1;
    let max_m = (width - 1).clamp(1, 4) as usize;
    (0..count)
        .map(|i| {
            let mut rng = stream_rng(seed, Stream::Spec, i as u64);
            let m = rng.random_range(1..=max_m);
            let n = rng.random_range(window.0 - 1..=window.1 - m as i64 - 1);
            let lambdas = (0..m).map(|_| rng.random_range(-10.0..10.0)).collect();
            CharSpec { n, m, lambdas, rho: rng.random_range(-10.0..10.0) }
        })
        .collect()
}

/// Randomly permutes the values of coordinate `index` across particles,
/// decoupling it from the rest of each trajectory.
pub fn shuffle_coordinate(mu: &ParticleMeasure, index: i64, seed: u64) -> Result<ParticleMeasure> {
    let mut values = mu.coordinate(index)?;
    values.shuffle(&mut stream_rng(seed, Stream::Perturb, 0));
    mu.with_coordinate(index, &values)
}

/// Whether measures built from the two noise paths coincide bit for bit on
/// every coordinate at index `<= n`. No precondition on the noise paths.
pub fn pasts_agree(builder: &MeasureBuilder, noise_a: &NoiseWindow, noise_b: &NoiseWindow, n: i64) -> Result<bool> {
    let mu_a = conditional_measure(builder, noise_a)?;
    let mu_b = conditional_measure(builder, noise_b)?;
    let hi = n.min(builder.window.1);
    for i in builder.window.0..=hi {
        let a = mu_a.coordinate(i)?;
        let b = mu_b.coordinate(i)?;
        if a.iter().zip(&b).any(|(x, y)| x.to_bits() != y.to_bits()) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Adaptedness check: two noise paths that agree up to `n` and differ
/// afterwards must give measures that agree on all coordinates up to `n`.
pub fn consistency_check(builder: &MeasureBuilder, noise_a: &NoiseWindow, noise_b: &NoiseWindow, n: i64) -> Result<bool> {
    if builder.window.0 < builder.initializer.index {
        return domain("window starts left of the initializer; past coordinates would read future noise");
    }
    if noise_a.offset() != noise_b.offset() || noise_a.len() != noise_b.len() {
        return domain("noise paths must share a window");
    }
    let mut differ_after = false;
    for (k, (a, b)) in noise_a.values().iter().zip(noise_b.values()).enumerate() {
        let index = noise_a.offset() + k as i64;
        let same = a.to_bits() == b.to_bits();
        if index <= n && !same {
            return domain(format!("noise paths differ at index {index} <= {n}"));
        }
        differ_after |= index > n && !same;
    }
    if !differ_after {
        return domain(format!("noise paths do not differ after index {n}"));
    }
    pasts_agree(builder, noise_a, noise_b, n)
}

/// Largest coordinate gap between `mu^{-t}` and the measure built from the
/// noise translated by `t` with the window and initializer translated along.
pub fn shift_equivariance_gap(builder: &MeasureBuilder, noise: &NoiseWindow, t: i64) -> Result<f64> {
    let lhs = shift_measure(&conditional_measure(builder, noise)?, -t);
    let rhs = conditional_measure(&builder.translated(t), &noise.shifted(-t))?;
    measure_gap(&lhs, &rhs)
}

pub const EQUIVARIANCE_TOLERANCE: f64 = 1e-12;

pub fn shift_equivariance_check(builder: &MeasureBuilder, noise: &NoiseWindow, t: i64) -> Result<bool> {
    Ok(shift_equivariance_gap(builder, noise, t)? <= EQUIVARIANCE_TOLERANCE)
}

/// Max coordinate-wise distance between two measures on the same window and
/// particle count; infinite when the shapes differ.
pub fn measure_gap(a: &ParticleMeasure, b: &ParticleMeasure) -> Result<f64> {
    if a.len() != b.len() || a.first_index() != b.first_index() || a.last_index() != b.last_index() {
        return Ok(f64::INFINITY);
    }
    Ok(a.particles()
        .iter()
        .zip(b.particles())
        .flat_map(|(p, q)| p.values().iter().zip(q.values()).map(|(x, y)| (x - y).abs()))
        .fold(0.0f64, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub std_dev: f64,
    pub range: f64,
}

/// Dispersion of coordinate `index` across particles.
pub fn ensemble_spread(mu: &ParticleMeasure, index: i64) -> Result<Spread> {
    let values = mu.coordinate(index)?;
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    Ok(Spread { std_dev: std_dev(&values), range: hi - lo })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recurrence_engine::{contraction_map, fractional_map, NoiseModel};

    fn builder(particles: usize) -> MeasureBuilder {
        MeasureBuilder::new(fractional_map(), particles, (0, 10), 17).unwrap()
    }

    fn noise(seed: u64) -> NoiseWindow {
        NoiseModel::uniform(seed).generate_range(1, 10).unwrap()
    }

    #[test]
    fn builder_validation() {
        assert!(MeasureBuilder::new(fractional_map(), 0, (0, 5), 1).is_err());
        assert!(MeasureBuilder::new(fractional_map(), 3, (5, 5), 1).is_err());
        assert_eq!(builder(1).noise_range(), (1, 10));
    }

    #[test]
    fn single_particle_is_point_mass() {
        let mu = conditional_measure(&builder(1), &noise(1)).unwrap();
        assert_eq!(mu.len(), 1);
        assert_eq!(mu.weights(), &[1.0]);
    }

    #[test]
    fn particles_follow_recursion() {
        let xi = noise(2);
        let mu = conditional_measure(&builder(64), &xi).unwrap();
        for p in mu.particles() {
            for k in 0..10 {
                let next = (p.get(k).unwrap() + xi.get(k + 1).unwrap()).rem_euclid(1.0);
                assert!((next - p.get(k + 1).unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn insufficient_noise_is_domain_error() {
        let short = NoiseModel::uniform(1).generate_range(1, 9).unwrap();
        assert!(matches!(conditional_measure(&builder(4), &short), Err(crate::Error::Domain(_))));
    }

    #[test]
    fn contraction_collapses() {
        let b = MeasureBuilder::new(contraction_map(0.5).unwrap(), 200, (0, 40), 5).unwrap();
        let xi = NoiseModel::uniform(9).generate_range(1, 40).unwrap();
        let mu = conditional_measure(&b, &xi).unwrap();
        let initial = ensemble_spread(&mu, 0).unwrap().range;
        let last = ensemble_spread(&mu, 40).unwrap();
        assert!(last.range <= 0.5f64.powi(40) * initial + 1e-9);
        assert!(last.std_dev <= 1e-9);
    }

    #[test]
    fn hopf_trivial_specs() {
        let mu = conditional_measure(&builder(32), &noise(3)).unwrap();
        let zero = CharSpec::new(2, vec![0.0, 0.0], 0.0).unwrap();
        assert!((hopf_lhs(&mu, &zero).unwrap() - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        let rho0 = CharSpec::new(1, vec![0.3, -1.2, 4.0], 0.0).unwrap();
        let map = fractional_map();
        assert_eq!(hopf_lhs(&mu, &rho0).unwrap(), hopf_rhs(&mu, &noise(3), &rho0, &map).unwrap());
        assert_eq!(hopf_residual(&mu, &noise(3), &rho0, &map).unwrap(), 0.0);
    }

    #[test]
    fn hopf_two_particles_average() {
        let p = PathWindow::new(0, vec![0.1, 0.2, 0.3]).unwrap();
        let q = PathWindow::new(0, vec![0.4, 0.5, 0.6]).unwrap();
        let mu = ParticleMeasure::uniform(vec![p, q]).unwrap();
        let spec = CharSpec::new(-1, vec![1.5], -2.0).unwrap();
        let e = |a: f64, b: f64| Complex64::from_polar(1.0, 1.5 * a - 2.0 * b);
        let expected = (e(0.1, 0.2) + e(0.4, 0.5)) * 0.5;
        assert!((hopf_lhs(&mu, &spec).unwrap() - expected).norm() < 1e-15);
    }

    #[test]
    fn hopf_window_violations() {
        let mu = conditional_measure(&builder(4), &noise(3)).unwrap();
        let map = fractional_map();
        let beyond = CharSpec::new(8, vec![1.0, 1.0], 1.0).unwrap();
        assert!(hopf_lhs(&mu, &beyond).is_err());
        let before = CharSpec::new(-2, vec![1.0], 1.0).unwrap();
        assert!(hopf_rhs(&mu, &noise(3), &before, &map).is_err());
        assert!(CharSpec::new(0, vec![], 1.0).is_err());
        let bad = CharSpec { n: 0, m: 2, lambdas: vec![1.0], rho: 0.0 };
        assert!(hopf_lhs(&mu, &bad).is_err());
    }

    #[test]
    fn hopf_holds_on_construction() {
        let xi = noise(4);
        let mu = conditional_measure(&builder(500), &xi).unwrap();
        let map = fractional_map();
        for spec in spec_grid((0, 10)).iter().chain(&random_specs((0, 10), 50, 1)) {
            assert!(hopf_residual(&mu, &xi, spec, &map).unwrap() <= 1e-9, "{spec:?}");
        }
    }

    #[test]
    fn shuffled_last_coordinate_breaks_hopf() {
        let xi = noise(4);
        let mu = conditional_measure(&builder(2000), &xi).unwrap();
        let broken = shuffle_coordinate(&mu, 10, 3).unwrap();
        let spec = CharSpec::new(8, vec![-1.0], 1.0).unwrap();
        assert!(hopf_residual(&broken, &xi, &spec, &fractional_map()).unwrap() > 0.01);
    }

    #[test]
    fn specs_stay_inside_window() {
        for spec in spec_grid((3, 7)).iter().chain(&random_specs((3, 7), 200, 9)) {
            assert!(spec.n + 1 >= 3 && spec.n + spec.m as i64 + 1 <= 7);
            assert_eq!(spec.lambdas.len(), spec.m);
        }
        assert_eq!(spec_grid((0, 1)).len(), 4);
    }

    #[test]
    fn consistency_examples() {
        let b = builder(64);
        let a = noise(5);
        let mut future = a.values().to_vec();
        future[5] = 0.123; // index 6
        let c = NoiseWindow::new(1, future).unwrap();
        assert!(consistency_check(&b, &a, &c, 5).unwrap());
        // identical noise: precondition fails but the measures agree
        assert!(consistency_check(&b, &a, &a, 5).is_err());
        assert!(pasts_agree(&b, &a, &a, 5).unwrap());
        // differ in the past
        let mut past = a.values().to_vec();
        past[3] = 0.987; // index 4
        let d = NoiseWindow::new(1, past).unwrap();
        assert!(consistency_check(&b, &a, &d, 5).is_err());
        assert!(!pasts_agree(&b, &a, &d, 5).unwrap());
    }

    #[test]
    fn consistency_requires_forward_only_window() {
        let b = builder(8).with_initializer(Initializer { index: 4, ..Initializer::default() });
        let a = noise(5);
        let mut v = a.values().to_vec();
        v[9] = 0.5;
        let c = NoiseWindow::new(1, v).unwrap();
        assert!(consistency_check(&b, &a, &c, 6).is_err());
    }

    #[test]
    fn equivariance_examples() {
        let b = builder(32).with_initializer(Initializer { index: 3, ..Initializer::default() });
        let xi = noise(6);
        assert!(shift_equivariance_check(&b, &xi, 0).unwrap());
        assert!(shift_equivariance_check(&b, &xi, 3).unwrap());
        assert!(shift_equivariance_check(&b, &xi, -2).unwrap());
        // mismatched initializer seeds
        let lhs = shift_measure(&conditional_measure(&b, &xi).unwrap(), -3);
        let other = b.translated(3).with_seed_stream(18);
        let rhs = conditional_measure(&other, &xi.shifted(-3)).unwrap();
        assert!(measure_gap(&lhs, &rhs).unwrap() > 1e-3);
    }
}
