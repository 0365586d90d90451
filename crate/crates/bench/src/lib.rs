//! Shared fixtures for the benchmarks.

use trajmeasure::seed::{derive_seed, Stream};
use trajmeasure::{fractional_map, MeasureBuilder, NoiseModel, NoiseWindow};

/// Fractional-map builder on indices `0..window` together with a matching noise path.
pub fn fractional_fixture(particles: usize, window: i64, seed: u64) -> (MeasureBuilder, NoiseWindow) {
    let builder = MeasureBuilder::new(fractional_map(), particles, (0, window - 1), derive_seed(seed, Stream::Init, 0))
        .expect("valid fixture");
    let (lo, hi) = builder.noise_range();
    let noise = NoiseModel::uniform(derive_seed(seed, Stream::Noise, 0))
        .generate_range(lo, hi)
        .expect("valid fixture");
    (builder, noise)
}
