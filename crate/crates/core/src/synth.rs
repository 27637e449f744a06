//! Seeded synthetic monthly series for demos and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::series::{MonthlyLoadSeries, SeriesCollection, YearMonth};

/// Linear trend plus a fixed annual shape with multiplicative noise:
/// `E_t = level * (1 + growth * t / 12 + amplitude * shape(month)) * (1 + noise * e_t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub start_year: i32,
    pub years: usize,
    pub level: f64,
    /// Trend increment per year as a fraction of `level`.
    pub growth: f64,
    /// Seasonal swing as a fraction of `level`.
    pub amplitude: f64,
    /// Standard deviation of the multiplicative noise.
    pub noise: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            start_year: 1995,
            years: 20,
            level: 20_000.0,
            growth: 0.03,
            amplitude: 0.12,
            noise: 0.02,
        }
    }
}

/// Winter peak with a smaller summer bump, zero mean over the year.
pub fn annual_shape(month: u32) -> f64 {
    let phase = 2.0 * std::f64::consts::PI * (month as f64 - 1.0) / 12.0;
    phase.cos() + 0.35 * (2.0 * phase).cos()
}

pub fn synthetic_series(
    country: &str,
    spec: &SyntheticSpec,
    seed: u64,
) -> Result<MonthlyLoadSeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let start = YearMonth::new(spec.start_year, 1)?;
    let values = (0..spec.years * 12)
        .map(|t| {
            let month = (t % 12) as u32 + 1;
            let clean = spec.level
                * (1.0 + spec.growth * t as f64 / 12.0 + spec.amplitude * annual_shape(month));
            clean * (1.0 + spec.noise * normal.sample(&mut rng))
        })
        .collect();
    MonthlyLoadSeries::new(country, start, values)
}

/// Exactly periodic series: `shape` tiled `years` times.
pub fn tiled_series(
    country: &str,
    start_year: i32,
    shape: &[f64; 12],
    years: usize,
) -> Result<MonthlyLoadSeries> {
    let values = shape.iter().cycle().take(12 * years).copied().collect();
    MonthlyLoadSeries::new(country, YearMonth::new(start_year, 1)?, values)
}

/// Independent positive noise around a constant level, no seasonality.
pub fn white_noise_series(
    country: &str,
    start_year: i32,
    months: usize,
    seed: u64,
) -> Result<MonthlyLoadSeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(1000.0, 50.0).expect("valid normal");
    let values = (0..months).map(|_| normal.sample(&mut rng)).collect();
    MonthlyLoadSeries::new(country, YearMonth::new(start_year, 1)?, values)
}

/// `count` synthetic countries (`S00`, `S01`, ...) with seed-varied level,
/// growth and amplitude around the defaults.
pub fn synthetic_corpus(count: usize, seed: u64) -> Result<SeriesCollection> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SeriesCollection::new();
    for i in 0..count {
        let spec = SyntheticSpec {
            level: rng.gen_range(2_000.0..60_000.0),
            growth: rng.gen_range(0.01..0.05),
            amplitude: rng.gen_range(0.06..0.2),
            ..SyntheticSpec::default()
        };
        out.insert(synthetic_series(&format!("S{i:02}"), &spec, rng.gen())?)?;
    }
    Ok(out)
}
