//! Measure-valued solutions of stochastic recurrence equations
//! `x_{n+1} = phi(x_n, xi_{n+1})`.
//!
//! When a stationary recursion has no solution that is a functional of the
//! noise, the conditional law of the solution given the noise still is. This
//! crate builds that conditional law as a particle measure over trajectory
//! windows and checks the properties that make it a measure-valued strong
//! solution:
//!
//! * adaptedness: coordinates up to `n` depend only on noise up to `n`
//!   ([`consistency_check`]);
//! * the characteristic-functional identity between consecutive coordinates
//!   ([`hopf_residual`]);
//! * stationarity under translation ([`stationarity_suite`]) and
//!   equivariance under joint translation of noise and paths
//!   ([`shift_equivariance_check`]).
//!
//! The circle rotation `phi(x, y) = {x + y}` with uniform noise is the
//! reference case: it has a stationary solution but no strong one, and the
//! diagnostics exhibit the numerical signature of that.

pub mod diagnostics;
pub mod error;
pub mod ks;
pub mod measure_solution;
pub mod path_space;
pub mod random_measure;
pub mod recurrence_engine;
pub mod seed;
pub mod sum;

pub use diagnostics::{
    conditional_char_statistic, conditional_law_demo, rotation_flow, rotation_invariance_demo, stationarity_suite,
    tsirelson_statistic, DiagnosticsConfig, RotationState,
};
pub use error::{Error, Result};
pub use measure_solution::{
    conditional_measure, consistency_check, hopf_lhs, hopf_residual, hopf_rhs, shift_equivariance_check, CharSpec,
    MeasureBuilder, ResidualReport,
};
pub use num_complex::Complex64;
pub use path_space::{shift_path, traj_metric, truncate_path, MetricValue, NoiseWindow, PathWindow, SampledFunction};
pub use random_measure::{
    cylinder_prob, distributions_equal, integrate, shift_measure, CylinderSet, Interval, ParticleMeasure,
    SeededSampler, StatReport,
};
pub use recurrence_engine::{
    contraction_map, fractional_map, iterate_backward, iterate_forward, stationary_sampler, InitLaw, Initializer,
    NoiseLaw, NoiseModel, UpdateMap,
};
pub use seed::{derive_seed, Stream, RNG_NAME};
