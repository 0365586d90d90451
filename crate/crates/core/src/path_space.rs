//! Finite windows of bi-infinite sequences, translations, stopping, and the
//! trajectory metric evaluated on a finite time grid.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

macro_rules! indexed_window {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        pub struct $name {
            offset: i64,
            values: Vec<f64>,
        }

        impl $name {
            /// `values[k]` is the coordinate at absolute index `offset + k`.
            pub fn new(offset: i64, values: Vec<f64>) -> Result<Self> {
                if values.is_empty() {
                    return domain(concat!(stringify!($name), " must hold at least one value"));
                }
                Ok(Self { offset, values })
            }

            pub fn offset(&self) -> i64 {
                self.offset
            }

            pub fn values(&self) -> &[f64] {
                &self.values
            }

            pub fn into_values(self) -> Vec<f64> {
                self.values
            }

            pub fn len(&self) -> usize {
                self.values.len()
            }

            pub fn is_empty(&self) -> bool {
                false
            }

            pub fn first_index(&self) -> i64 {
                self.offset
            }

            pub fn last_index(&self) -> i64 {
                self.offset + self.values.len() as i64 - 1
            }

            pub fn contains(&self, index: i64) -> bool {
                index >= self.first_index() && index <= self.last_index()
            }

            pub fn get(&self, index: i64) -> Option<f64> {
                if self.contains(index) {
                    Some(self.values[(index - self.offset) as usize])
                } else {
                    None
                }
            }

            /// Coordinate at `index`, or a domain error naming the window.
            pub fn at(&self, index: i64) -> Result<f64> {
                self.get(index).ok_or_else(|| {
                    crate::Error::Domain(format!(
                        "index {index} outside window [{}, {}]",
                        self.first_index(),
                        self.last_index()
                    ))
                })
            }

            /// Sub-window over `[lo, hi]`, which must lie inside this window.
            pub fn slice(&self, lo: i64, hi: i64) -> Result<Self> {
                if lo > hi || !self.contains(lo) || !self.contains(hi) {
                    return domain(format!(
                        "range [{lo}, {hi}] not inside window [{}, {}]",
                        self.first_index(),
                        self.last_index()
                    ));
                }
                let a = (lo - self.offset) as usize;
                let b = (hi - self.offset) as usize;
                Ok(Self { offset: lo, values: self.values[a..=b].to_vec() })
            }

            /// Translation `u_t(i) = u(i + t)`.
            pub fn shifted(&self, t: i64) -> Self {
                Self { offset: self.offset - t, values: self.values.clone() }
            }
        }
    };
}

indexed_window!(
    /// A finite stretch of a real trajectory `(u_i)`.
    PathWindow
);

indexed_window!(
    /// A finite stretch of the driving i.i.d. noise `(xi_i)`.
    NoiseWindow
);

/// Translation on trajectories: the result at index `i` is `p` at `i + t`.
pub fn shift_path(p: &PathWindow, t: i64) -> PathWindow {
    p.shifted(t)
}

/// Path stopped at `t`: coordinates after `t` are frozen at the value at `t`.
pub fn truncate_path(p: &PathWindow, t: i64) -> Result<PathWindow> {
    let stop = p.at(t)?;
    let keep = (t - p.offset()) as usize + 1;
    let values = p
        .values()
        .iter()
        .enumerate()
        .map(|(k, &v)| if k < keep { v } else { stop })
        .collect();
    PathWindow::new(p.offset(), values)
}

/// A continuous-time function observed on a strictly increasing grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledFunction {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl SampledFunction {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return domain("times and values differ in length");
        }
        if times.is_empty() {
            return domain("sampled function needs at least one point");
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return domain("times must be strictly increasing");
        }
        Ok(Self { times, values })
    }

    pub fn from_fn(times: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = times.iter().map(|&t| f(t)).collect();
        Self::new(times, values)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Truncated trajectory distance and the bound on the omitted terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub value: f64,
    pub tail_bound: f64,
}

fn saturate(r: f64) -> f64 {
    r / (1.0 + r)
}

/// `sum_{k=1..K} 2^-k * phi(max_{|t| <= k} |f(t) - g(t)|)` with
/// `phi(r) = r / (1 + r)`, maxima taken over grid points. The terms for
/// `k > K` sum to less than `2^-K`, returned as `tail_bound`.
pub fn traj_metric(f: &SampledFunction, g: &SampledFunction, k_max: u32) -> Result<MetricValue> {
    if k_max == 0 {
        return domain("K must be positive");
    }
    if f.times != g.times {
        return domain("functions are sampled on different grids");
    }
    let k_f = f64::from(k_max);
    let (first, last) = (f.times[0], f.times[f.times.len() - 1]);
    if first > -k_f || last < k_f {
        return domain(format!("grid [{first}, {last}] does not cover [-{k_max}, {k_max}]"));
    }
    let mut value = 0.0;
    let mut weight = 1.0;
    for k in 1..=k_max {
        weight *= 0.5;
        let k = f64::from(k);
        let sup = f
            .times
            .iter()
            .zip(f.values.iter().zip(&g.values))
            .filter(|(t, _)| t.abs() <= k)
            .map(|(_, (a, b))| (a - b).abs())
            .fold(0.0f64, f64::max);
        value += weight * saturate(sup);
    }
    Ok(MetricValue { value, tail_bound: weight })
}
