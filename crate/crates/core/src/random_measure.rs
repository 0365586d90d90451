//! Realizations `mu(omega, .)` of a random measure on sequence space, stored
//! as weighted ensembles of path windows.
//!
//! The law of a random measure is never materialized. It is represented by a
//! [`SeededSampler`], a deterministic map `seed -> ParticleMeasure`, and
//! compared against another through finitely many cylinder probabilities in
//! [`distributions_equal`].

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::ks;
use crate::path_space::{shift_path, PathWindow};
use crate::seed::{derive_seed, stream_rng, Stream};
use crate::sum::{pairwise_sum, pairwise_sum_complex};

const WEIGHT_TOLERANCE: f64 = 1e-12;

/// Seed of the fixed random projection used by [`distributions_equal`].
const PROJECTION_SEED: u64 = 0x5EED_0F_D1_57;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleMeasure {
    particles: Vec<PathWindow>,
    weights: Vec<f64>,
}

impl ParticleMeasure {
    pub fn new(particles: Vec<PathWindow>, weights: Vec<f64>) -> Result<Self> {
        if particles.is_empty() {
            return domain("particle measure needs at least one particle");
        }
        if particles.len() != weights.len() {
            return domain("particles and weights differ in length");
        }
        let (offset, len) = (particles[0].offset(), particles[0].len());
        if particles.iter().any(|p| p.offset() != offset || p.len() != len) {
            return domain("particle windows differ in offset or length");
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return domain("weights must be finite and nonnegative");
        }
        let total = pairwise_sum(&weights);
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return domain(format!("weights sum to {total}, not 1"));
        }
        Ok(Self { particles, weights })
    }

    /// Equal weights `1 / N`.
    pub fn uniform(particles: Vec<PathWindow>) -> Result<Self> {
        let n = particles.len();
        Self::new(particles, vec![1.0 / n as f64; n])
    }

    pub fn point_mass(path: PathWindow) -> Self {
        Self { particles: vec![path], weights: vec![1.0] }
    }

    pub fn particles(&self) -> &[PathWindow] {
        &self.particles
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn first_index(&self) -> i64 {
        self.particles[0].first_index()
    }

    pub fn last_index(&self) -> i64 {
        self.particles[0].last_index()
    }

    pub fn contains(&self, index: i64) -> bool {
        self.particles[0].contains(index)
    }

    pub(crate) fn require_indices(&self, lo: i64, hi: i64) -> Result<()> {
        if self.contains(lo) && self.contains(hi) {
            Ok(())
        } else {
            domain(format!(
                "indices [{lo}, {hi}] not inside particle window [{}, {}]",
                self.first_index(),
                self.last_index()
            ))
        }
    }

    /// Values of coordinate `index` across particles, in particle order.
    pub fn coordinate(&self, index: i64) -> Result<Vec<f64>> {
        self.require_indices(index, index)?;
        let k = (index - self.first_index()) as usize;
        Ok(self.particles.iter().map(|p| p.values()[k]).collect())
    }

    /// Replaces coordinate `index` of every particle. Used to build perturbed
    /// measures for negative controls.
    pub fn with_coordinate(&self, index: i64, values: &[f64]) -> Result<Self> {
        self.require_indices(index, index)?;
        if values.len() != self.len() {
            return domain("one value per particle required");
        }
        let particles = self
            .particles
            .iter()
            .zip(values)
            .map(|(p, &v)| {
                let mut vals = p.values().to_vec();
                vals[(index - p.offset()) as usize] = v;
                PathWindow::new(p.offset(), vals)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { particles, weights: self.weights.clone() })
    }
}

/// `sum_j w_j f(u_j)`.
pub fn integrate<F>(mu: &ParticleMeasure, f: F) -> Complex64
where
    F: Fn(&PathWindow) -> Complex64 + Sync,
{
    let terms: Vec<Complex64> = mu
        .particles
        .par_iter()
        .zip(mu.weights.par_iter())
        .map(|(p, &w)| f(p) * w)
        .collect();
    pairwise_sum_complex(&terms)
}

pub fn integrate_real<F>(mu: &ParticleMeasure, f: F) -> f64
where
    F: Fn(&PathWindow) -> f64 + Sync,
{
    let terms: Vec<f64> = mu
        .particles
        .par_iter()
        .zip(mu.weights.par_iter())
        .map(|(p, &w)| f(p) * w)
        .collect();
    pairwise_sum(&terms)
}

/// Half-open interval `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return domain(format!("interval [{lo}, {hi}) is empty"));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x < self.hi
    }
}

/// `{u : u_{start+i} in intervals[i] for i = 0..=m}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderSet {
    start: i64,
    intervals: Vec<Interval>,
}

impl CylinderSet {
    pub fn new(start: i64, intervals: Vec<Interval>) -> Result<Self> {
        if intervals.is_empty() {
            return domain("cylinder set needs at least one interval");
        }
        Ok(Self { start, intervals })
    }

    /// Convenience constructor from `(lo, hi)` pairs.
    pub fn from_bounds(start: i64, bounds: &[(f64, f64)]) -> Result<Self> {
        let intervals = bounds
            .iter()
            .map(|&(a, b)| Interval::new(a, b))
            .collect::<Result<Vec<_>>>()?;
        Self::new(start, intervals)
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn end(&self) -> i64 {
        self.start + self.intervals.len() as i64 - 1
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn with_start(&self, start: i64) -> Self {
        Self { start, intervals: self.intervals.clone() }
    }

    pub fn contains(&self, path: &PathWindow) -> bool {
        self.intervals.iter().enumerate().all(|(i, iv)| {
            path.get(self.start + i as i64)
                .map(|x| iv.contains(x))
                .unwrap_or(false)
        })
    }
}

pub fn cylinder_prob(mu: &ParticleMeasure, delta: &CylinderSet) -> Result<f64> {
    mu.require_indices(delta.start(), delta.end())?;
    Ok(integrate_real(mu, |p| if delta.contains(p) { 1.0 } else { 0.0 }))
}

/// Image of `mu` under the translation `u -> u_t`.
pub fn shift_measure(mu: &ParticleMeasure, t: i64) -> ParticleMeasure {
    ParticleMeasure {
        particles: mu.particles.iter().map(|p| shift_path(p, t)).collect(),
        weights: mu.weights.clone(),
    }
}

/// Outcome of a statistical check; `passed` iff `statistic <= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatReport {
    pub test_name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub passed: bool,
    pub sample_size: u64,
    pub seed: u64,
}

impl StatReport {
    pub fn new(test_name: impl Into<String>, statistic: f64, threshold: f64, sample_size: u64, seed: u64) -> Self {
        Self {
            test_name: test_name.into(),
            statistic,
            threshold,
            passed: statistic <= threshold,
            sample_size,
            seed,
        }
    }
}

/// Deterministic generator of measure realizations. Replica `r` is drawn
/// from `derive_seed(seed, Stream::Replica, r)`.
pub struct SeededSampler<'a> {
    pub seed: u64,
    pub draw: &'a (dyn Fn(u64) -> Result<ParticleMeasure> + Sync),
}

impl<'a> SeededSampler<'a> {
    pub fn new(seed: u64, draw: &'a (dyn Fn(u64) -> Result<ParticleMeasure> + Sync)) -> Self {
        Self { seed, draw }
    }

    fn replica(&self, r: u64) -> Result<ParticleMeasure> {
        (self.draw)(derive_seed(self.seed, Stream::Replica, r))
    }

    /// Cylinder-probability vectors `(mu(D_1), ..., mu(D_n))` for each replica.
    pub fn cylinder_vectors(&self, deltas: &[CylinderSet], replicas: usize) -> Result<Vec<Vec<f64>>> {
        (0..replicas as u64)
            .into_par_iter()
            .map(|r| {
                let mu = self.replica(r)?;
                deltas.iter().map(|d| cylinder_prob(&mu, d)).collect()
            })
            .collect()
    }
}

pub const MIN_REPLICAS: usize = 100;

/// Two-sample test that two random measures have the same law, restricted
/// to the joint law of `(mu(D_1), ..., mu(D_n))`. Each coordinate, plus one
/// fixed random linear combination when `n > 1`, gets a two-sample KS test;
/// the reported statistic is the largest of them.
pub fn distributions_equal(
    sampler_a: &SeededSampler<'_>,
    sampler_b: &SeededSampler<'_>,
    deltas: &[CylinderSet],
    replicas: usize,
    alpha: f64,
) -> Result<StatReport> {
    if replicas < MIN_REPLICAS {
        return domain(format!("need at least {MIN_REPLICAS} replicas, got {replicas}"));
    }
    if deltas.is_empty() {
        return domain("no cylinder sets to compare");
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return domain(format!("alpha {alpha} outside (0, 1)"));
    }
    let va = sampler_a.cylinder_vectors(deltas, replicas)?;
    let vb = sampler_b.cylinder_vectors(deltas, replicas)?;

    let column = |v: &[Vec<f64>], j: usize| v.iter().map(|row| row[j]).collect::<Vec<_>>();
    let mut statistic = (0..deltas.len())
        .map(|j| ks::two_sample_statistic(&column(&va, j), &column(&vb, j)))
        .fold(0.0f64, f64::max);

    if deltas.len() > 1 {
        let mut rng = stream_rng(PROJECTION_SEED, Stream::Projection, deltas.len() as u64);
        let coeffs: Vec<f64> = (0..deltas.len()).map(|_| rng.sample(StandardNormal)).collect();
        let project = |v: &[Vec<f64>]| {
            v.iter()
                .map(|row| row.iter().zip(&coeffs).map(|(x, c)| x * c).sum::<f64>())
                .collect::<Vec<_>>()
        };
        statistic = statistic.max(ks::two_sample_statistic(&project(&va), &project(&vb)));
    }

    Ok(StatReport::new(
        "distributions_equal",
        statistic,
        ks::two_sample_critical(alpha, replicas, replicas),
        replicas as u64,
        sampler_a.seed,
    ))
}
