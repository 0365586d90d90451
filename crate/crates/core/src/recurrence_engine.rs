//! Iteration of `x_{n+1} = phi(x_n, xi_{n+1})`: update maps, noise, forward
//! and backward passes, and the sampler that starts the recursion from an
//! independent initializer.
//!
//! Index convention: when `x` sits at index `n0`, the noise window starts
//! at `n0 + 1`, so a noise window over `[a, b]` drives a path over
//! `[a - 1, b]`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::path_space::{NoiseWindow, PathWindow};
use crate::seed::rng_from_seed;

type StepFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Fractional part `x - floor(x)`, always in `[0, 1)`.
#[inline]
pub fn frac(x: f64) -> f64 {
    let r = x - x.floor();
    // x slightly below an integer can round up to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// The map `phi` together with an optional left inverse in the state
/// argument: `apply(inverse_apply(x, xi), xi) == x`.
#[derive(Clone)]
pub struct UpdateMap {
    name: String,
    apply: StepFn,
    inverse: Option<StepFn>,
}

impl fmt::Debug for UpdateMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UpdateMap")
            .field("name", &self.name)
            .field("invertible", &self.inverse.is_some())
            .finish()
    }
}

impl UpdateMap {
    pub fn custom<F>(name: impl Into<String>, apply: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self { name: name.into(), apply: Arc::new(apply), inverse: None }
    }

    pub fn with_inverse<G>(mut self, inverse: G) -> Self
    where
        G: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        self.inverse = Some(Arc::new(inverse));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn apply(&self, x: f64, xi: f64) -> f64 {
        (self.apply)(x, xi)
    }

    pub fn has_inverse(&self) -> bool {
        self.inverse.is_some()
    }

    #[inline]
    pub fn inverse_apply(&self, x_next: f64, xi: f64) -> Option<f64> {
        self.inverse.as_ref().map(|g| g(x_next, xi))
    }
}

/// Rotation of the circle `[0, 1)`: `phi(x, y) = {x + y}`.
pub fn fractional_map() -> UpdateMap {
    UpdateMap::custom("fractional", |x, y| frac(x + y)).with_inverse(|x, y| frac(x - y))
}

/// `phi(x, y) = a x + y` with `|a| < 1`.
pub fn contraction_map(a: f64) -> Result<UpdateMap> {
    if !(a.abs() < 1.0) {
        return domain(format!("contraction factor {a} must satisfy |a| < 1"));
    }
    let map = UpdateMap::custom(format!("contraction:a={a}"), move |x, y| a * x + y);
    Ok(if a != 0.0 {
        map.with_inverse(move |x, y| (x - y) / a)
    } else {
        map
    })
}

impl FromStr for UpdateMap {
    type Err = Error;

    /// Parses `fractional` or `contraction:a=<value>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "fractional" {
            return Ok(fractional_map());
        }
        if let Some(rest) = s.strip_prefix("contraction:") {
            let value = rest
                .strip_prefix("a=")
                .ok_or_else(|| Error::Domain(format!("expected contraction:a=<value>, got {s:?}")))?;
            let a: f64 = value
                .parse()
                .map_err(|_| Error::Domain(format!("bad contraction factor {value:?}")))?;
            return contraction_map(a);
        }
        domain(format!("unknown update map {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseLaw {
    /// Uniform on `[0, 1)`.
    Uniform,
    StandardNormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub law: NoiseLaw,
    pub seed: u64,
}

impl NoiseModel {
    pub fn uniform(seed: u64) -> Self {
        Self { law: NoiseLaw::Uniform, seed }
    }

    /// `len` i.i.d. draws placed at indices `offset..offset + len`.
    pub fn generate(&self, offset: i64, len: usize) -> Result<NoiseWindow> {
        let mut rng = rng_from_seed(self.seed);
        let values = match self.law {
            NoiseLaw::Uniform => (0..len).map(|_| rng.random::<f64>()).collect(),
            NoiseLaw::StandardNormal => (0..len).map(|_| rng.sample(StandardNormal)).collect(),
        };
        NoiseWindow::new(offset, values)
    }

    /// Noise covering the index range `[lo, hi]`.
    pub fn generate_range(&self, lo: i64, hi: i64) -> Result<NoiseWindow> {
        if hi < lo {
            return domain(format!("empty noise range [{lo}, {hi}]"));
        }
        self.generate(lo, (hi - lo + 1) as usize)
    }
}

/// Runs the recursion forward from `x0` at index `noise.offset() - 1`.
pub fn iterate_forward(x0: f64, noise: &NoiseWindow, map: &UpdateMap) -> PathWindow {
    let mut values = Vec::with_capacity(noise.len() + 1);
    let mut x = x0;
    values.push(x);
    for &xi in noise.values() {
        x = map.apply(x, xi);
        values.push(x);
    }
    PathWindow::new(noise.offset() - 1, values).expect("path holds x0")
}

/// Runs the recursion backward from `xn` at index `noise.last_index()`,
/// using `x_{k-1} = inverse_apply(x_k, xi_k)`.
pub fn iterate_backward(xn: f64, noise: &NoiseWindow, map: &UpdateMap) -> Result<PathWindow> {
    if !map.has_inverse() {
        return Err(Error::Unsupported(format!("map {:?} has no inverse", map.name())));
    }
    let mut values = vec![0.0; noise.len() + 1];
    let mut x = xn;
    values[noise.len()] = x;
    for (k, &xi) in noise.values().iter().enumerate().rev() {
        x = map.inverse_apply(x, xi).expect("checked above");
        values[k] = x;
    }
    PathWindow::new(noise.offset() - 1, values)
}

/// Law of the initializer `eta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitLaw {
    /// Uniform on `[lo, hi)`.
    Uniform { lo: f64, hi: f64 },
}

impl Default for InitLaw {
    fn default() -> Self {
        InitLaw::Uniform { lo: 0.0, hi: 1.0 }
    }
}

impl InitLaw {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return domain(format!("bad initializer range [{lo}, {hi})"));
        }
        Ok(InitLaw::Uniform { lo, hi })
    }

    pub fn draw(&self, seed: u64) -> f64 {
        let mut rng = rng_from_seed(seed);
        match *self {
            InitLaw::Uniform { lo, hi } => {
                let u: f64 = rng.random();
                let x = lo + (hi - lo) * u;
                if x >= hi {
                    lo
                } else {
                    x
                }
            }
        }
    }
}

/// Where and how the recursion is started.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Initializer {
    pub index: i64,
    pub law: InitLaw,
}

impl Default for Initializer {
    fn default() -> Self {
        Self { index: 0, law: InitLaw::default() }
    }
}

/// Solution started from `eta ~ init.law` (drawn from `init_seed`, a stream
/// independent of the noise) at `init.index`, run forward over the noise to
/// the right of the initializer and backward over the noise at or left of
/// it. The returned path covers `[noise.offset() - 1, noise.last_index()]`.
pub fn stationary_sampler(
    map: &UpdateMap,
    noise: &NoiseWindow,
    init: &Initializer,
    init_seed: u64,
) -> Result<PathWindow> {
    let lo = noise.first_index() - 1;
    let hi = noise.last_index();
    let i0 = init.index;
    if i0 < lo || i0 > hi {
        return domain(format!("initializer index {i0} outside path window [{lo}, {hi}]"));
    }
    if i0 > lo && !map.has_inverse() {
        return Err(Error::Unsupported(format!(
            "window extends left of the initializer but map {:?} has no inverse",
            map.name()
        )));
    }
    let eta = init.law.draw(init_seed);
    let mut values = Vec::with_capacity(noise.len() + 1);
    if i0 > lo {
        let past = iterate_backward(eta, &noise.slice(lo + 1, i0)?, map)?;
        values.extend_from_slice(past.values());
    } else {
        values.push(eta);
    }
    if i0 < hi {
        let future = iterate_forward(eta, &noise.slice(i0 + 1, hi)?, map);
        values.extend_from_slice(&future.values()[1..]);
    }
    PathWindow::new(lo, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise(offset: i64, values: &[f64]) -> NoiseWindow {
        NoiseWindow::new(offset, values.to_vec()).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn frac_maps_negatives_into_unit_interval() {
        assert!(close(frac(-0.4), 0.6));
        assert_eq!(frac(-1e-18), 0.0);
        assert_eq!(frac(3.0), 0.0);
    }

    #[test]
    fn fractional_map_examples() {
        let m = fractional_map();
        assert!(close(m.apply(0.25, 0.5), 0.75));
        assert!(close(m.apply(0.75, 0.9), 0.65));
        assert!(close(m.inverse_apply(m.apply(0.3, 0.9), 0.9).unwrap(), 0.3));
    }

    #[test]
    fn contraction_map_examples() {
        let m = contraction_map(0.5).unwrap();
        assert_eq!(m.apply(1.0, 1.0), 1.5);
        assert_eq!(m.apply(1.5, 1.0), 1.75);
        assert!(close(m.inverse_apply(m.apply(0.3, 0.7), 0.7).unwrap(), 0.3));
        let memoryless = contraction_map(0.0).unwrap();
        assert_eq!(memoryless.apply(12.0, 0.25), 0.25);
        assert!(!memoryless.has_inverse());
        assert!(contraction_map(1.0).is_err());
        assert!(contraction_map(-1.5).is_err());
        assert!(contraction_map(f64::NAN).is_err());
    }

    #[test]
    fn parse_map_names() {
        assert_eq!("fractional".parse::<UpdateMap>().unwrap().name(), "fractional");
        let c: UpdateMap = "contraction:a=0.5".parse().unwrap();
        assert_eq!(c.apply(1.0, 1.0), 1.5);
        assert!("contraction:a=2".parse::<UpdateMap>().is_err());
        assert!("contraction:0.5".parse::<UpdateMap>().is_err());
        assert!("bogus".parse::<UpdateMap>().is_err());
    }

    #[test]
    fn forward_examples() {
        let p = iterate_forward(0.25, &noise(1, &[0.5, 0.9]), &fractional_map());
        assert_eq!(p.offset(), 0);
        assert_eq!(p.values()[0], 0.25);
        assert!(close(p.values()[1], 0.75) && close(p.values()[2], 0.65));

        let c = contraction_map(0.5).unwrap();
        let q = iterate_forward(1.0, &noise(1, &[1.0, 1.0]), &c);
        assert_eq!(q.values(), &[1.0, 1.5, 1.75]);

        let single = iterate_forward(0.1, &noise(1, &[0.3]), &c);
        assert_eq!(single.values()[1], c.apply(0.1, 0.3));
    }

    #[test]
    fn backward_examples() {
        let m = fractional_map();
        let p = iterate_backward(0.75, &noise(1, &[0.5]), &m).unwrap();
        assert_eq!(p.offset(), 0);
        assert!(close(p.values()[0], 0.25));
        let q = iterate_backward(0.1, &noise(1, &[0.5]), &m).unwrap();
        assert!(close(q.values()[0], 0.6));
        let no_inverse = UpdateMap::custom("sq", |x, y| x * x + y);
        assert!(matches!(
            iterate_backward(0.1, &noise(1, &[0.5]), &no_inverse),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn sampler_places_eta_at_initializer() {
        let m = fractional_map();
        let n = NoiseModel::uniform(3).generate_range(-4, 6).unwrap();
        let init = Initializer { index: 0, law: InitLaw::default() };
        let p = stationary_sampler(&m, &n, &init, 99).unwrap();
        assert_eq!(p.first_index(), -5);
        assert_eq!(p.last_index(), 6);
        assert_eq!(p.get(0).unwrap(), InitLaw::default().draw(99));
        assert!(p.values().iter().all(|&x| (0.0..1.0).contains(&x)));
        for k in -5..6 {
            let next = m.apply(p.get(k).unwrap(), n.get(k + 1).unwrap());
            let d = (next - p.get(k + 1).unwrap()).abs();
            assert!(d.min(1.0 - d) < 1e-12);
        }
    }

    #[test]
    fn sampler_rejects_backward_without_inverse() {
        let m = UpdateMap::custom("sq", |x, y| x * x + y);
        let n = NoiseModel::uniform(3).generate_range(1, 5).unwrap();
        let left = Initializer { index: 2, law: InitLaw::default() };
        assert!(matches!(stationary_sampler(&m, &n, &left, 1), Err(Error::Unsupported(_))));
        let start = Initializer { index: 0, law: InitLaw::default() };
        assert!(stationary_sampler(&m, &n, &start, 1).is_ok());
        let outside = Initializer { index: 9, law: InitLaw::default() };
        assert!(matches!(stationary_sampler(&m, &n, &outside, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn uniform_noise_in_unit_interval() {
        let n = NoiseModel::uniform(5).generate(0, 10_000).unwrap();
        assert!(n.values().iter().all(|&x| (0.0..1.0).contains(&x)));
        let g = NoiseModel { law: NoiseLaw::StandardNormal, seed: 5 }.generate(0, 10).unwrap();
        assert!(g.values().iter().any(|&x| x < 0.0));
    }
}
