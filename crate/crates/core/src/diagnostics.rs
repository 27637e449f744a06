//! Checks of the similarity assumption and forecast accuracy metrics.
//!
//! The assumption test bins the pairwise x-pattern distances and the paired
//! y-pattern distances into quintiles and runs a chi-squared independence
//! test on the resulting 5x5 contingency table. A statistic above the
//! critical value says that similar inputs go with similar outputs.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_lr;

use crate::codec::PatternDataset;
use crate::error::{invalid, Error, Result};
use crate::models::sq_distance;
use crate::series::MonthlyLoadSeries;

pub const CATEGORIES: usize = 5;
pub const SIGNIFICANCE: f64 = 0.05;

/// Pairwise distances `(d(x_i, x_j), d(y_i, y_j))` for every `i < j`.
pub fn distance_samples(dataset: &PatternDataset) -> Result<Vec<(f64, f64)>> {
    let pairs = dataset.pairs();
    if pairs.len() < 2 {
        return Err(Error::InsufficientHistory {
            context: format!("{} distance samples", dataset.source_id()),
            required: 2,
            available: pairs.len(),
        });
    }
    let mut out = Vec::with_capacity(pairs.len() * (pairs.len() - 1) / 2);
    for i in 0..pairs.len() {
        for j in i + 1..pairs.len() {
            out.push((
                sq_distance(&pairs[i].x, &pairs[j].x).sqrt(),
                sq_distance(&pairs[i].y, &pairs[j].y).sqrt(),
            ));
        }
    }
    Ok(out)
}

/// Quintile category of each value plus the four upper edges of bins 1-4.
#[derive(Debug, Clone, PartialEq)]
pub struct Binning {
    pub bins: Vec<usize>,
    pub edges: [f64; CATEGORIES - 1],
}

/// Assigns values to five equal-frequency categories. The edge of bin `k`
/// is the order statistic of rank `ceil(k * N / 5)`; a value equal to an edge
/// falls in the lower bin, so leftover observations go to the first bins.
pub fn quintile_bins(values: &[f64]) -> Result<Binning> {
    if values.len() < CATEGORIES {
        return Err(Error::InsufficientHistory {
            context: "quintile binning".into(),
            required: CATEGORIES,
            available: values.len(),
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("binning input"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted[0] == sorted[sorted.len() - 1] {
        return Err(Error::Degenerate("all values equal, nothing to bin".into()));
    }
    let n = sorted.len();
    let mut edges = [0.0; CATEGORIES - 1];
    for (k, edge) in edges.iter_mut().enumerate() {
        let rank = ((k + 1) * n).div_ceil(CATEGORIES);
        *edge = sorted[rank - 1];
    }
    let bins = values
        .iter()
        .map(|v| edges.iter().take_while(|e| v > e).count())
        .collect();
    Ok(Binning { bins, edges })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub counts: [[u64; CATEGORIES]; CATEGORIES],
    pub row_edges: [f64; CATEGORIES - 1],
    pub col_edges: [f64; CATEGORIES - 1],
}

impl ContingencyTable {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquaredResult {
    pub statistic: f64,
    pub dof: usize,
    pub critical_value: f64,
    pub reject_null: bool,
    pub table: ContingencyTable,
}

/// Upper `alpha` quantile of the chi-squared distribution with `dof`
/// degrees of freedom, by bisection on the regularized lower incomplete
/// gamma function.
pub fn chi_squared_critical_value(alpha: f64, dof: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) || dof == 0 {
        return Err(invalid(format!(
            "need 0 < alpha < 1 and dof >= 1 (alpha={alpha}, dof={dof})"
        )));
    }
    let k = dof as f64 / 2.0;
    let cdf = |x: f64| gamma_lr(k, x / 2.0);
    let target = 1.0 - alpha;
    let (mut lo, mut hi) = (0.0, dof as f64 + 10.0);
    while cdf(hi) < target {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Chi-squared test of independence between quintile-binned `dx` and `dy`.
pub fn chi_squared_independence(samples: &[(f64, f64)]) -> Result<ChiSquaredResult> {
    let min = CATEGORIES * CATEGORIES;
    if samples.len() < min {
        return Err(Error::InsufficientHistory {
            context: "chi-squared samples".into(),
            required: min,
            available: samples.len(),
        });
    }
    let dx: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let dy: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let rows = quintile_bins(&dx)?;
    let cols = quintile_bins(&dy)?;
    let mut counts = [[0u64; CATEGORIES]; CATEGORIES];
    for (&r, &c) in rows.bins.iter().zip(&cols.bins) {
        counts[r][c] += 1;
    }
    let total = samples.len() as f64;
    let row_sums: Vec<f64> = counts
        .iter()
        .map(|r| r.iter().sum::<u64>() as f64)
        .collect();
    let col_sums: Vec<f64> = (0..CATEGORIES)
        .map(|c| counts.iter().map(|r| r[c]).sum::<u64>() as f64)
        .collect();
    if row_sums.iter().chain(&col_sums).any(|s| *s == 0.0) {
        return Err(Error::Degenerate(
            "empty category gives a zero expected count".into(),
        ));
    }
    let mut statistic = 0.0;
    for r in 0..CATEGORIES {
        for c in 0..CATEGORIES {
            let expected = row_sums[r] * col_sums[c] / total;
            let diff = counts[r][c] as f64 - expected;
            statistic += diff * diff / expected;
        }
    }
    let dof = (CATEGORIES - 1) * (CATEGORIES - 1);
    let critical_value = chi_squared_critical_value(SIGNIFICANCE, dof)?;
    Ok(ChiSquaredResult {
        statistic,
        dof,
        critical_value,
        reject_null: statistic > critical_value,
        table: ContingencyTable {
            counts,
            row_edges: rows.edges,
            col_edges: cols.edges,
        },
    })
}

/// Accuracy summary of one forecast. Percentages are in percent, RMSE in the
/// series' units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub median_ape: f64,
    pub mape: f64,
    pub iqr_ape: f64,
    pub rmse: f64,
}

/// Linear-interpolation quantile of sorted data.
pub(crate) fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Absolute percentage errors `100 |a - f| / a`.
pub fn ape(actual: &[f64], forecast: &[f64]) -> Result<Vec<f64>> {
    if actual.len() != forecast.len() {
        return Err(Error::LengthMismatch {
            expected: actual.len(),
            actual: forecast.len(),
        });
    }
    if actual.is_empty() {
        return Err(Error::Empty);
    }
    if let Some(a) = actual.iter().find(|a| a.is_nan() || **a <= 0.0) {
        return Err(invalid(format!("actual values must be > 0, got {a}")));
    }
    if forecast.iter().any(|f| !f.is_finite()) {
        return Err(Error::NonFinite("forecast"));
    }
    Ok(actual
        .iter()
        .zip(forecast)
        .map(|(a, f)| 100.0 * (a - f).abs() / a)
        .collect())
}

pub fn error_metrics(actual: &[f64], forecast: &[f64]) -> Result<MetricsReport> {
    let mut apes = ape(actual, forecast)?;
    apes.sort_by(f64::total_cmp);
    let mse = actual
        .iter()
        .zip(forecast)
        .map(|(a, f)| (a - f).powi(2))
        .sum::<f64>()
        / actual.len() as f64;
    Ok(MetricsReport {
        median_ape: quantile(&apes, 0.5),
        mape: apes.iter().sum::<f64>() / apes.len() as f64,
        iqr_ape: quantile(&apes, 0.75) - quantile(&apes, 0.25),
        rmse: mse.sqrt(),
    })
}

/// Repeats the same calendar month of the last observed year for each of
/// the `m` months following the series end.
pub fn seasonal_naive(series: &MonthlyLoadSeries, m: usize) -> Result<Vec<f64>> {
    let values = series.values();
    let len = values.len();
    if len < 12 {
        return Err(Error::InsufficientHistory {
            context: format!("{} seasonal naive", series.country()),
            required: 12,
            available: len,
        });
    }
    Ok((1..=m)
        .map(|h| {
            let back = 12 * h.div_ceil(12);
            values[len - 1 + h - back]
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{CodingVariables, EncodingSpec, PatternPair};
    use crate::series::YearMonth;

    fn sizes(bins: &[usize]) -> [usize; 5] {
        let mut s = [0; 5];
        for &b in bins {
            s[b] += 1;
        }
        s
    }

    #[test]
    fn quintiles_of_ten_and_eleven() {
        let ten: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(sizes(&quintile_bins(&ten).unwrap().bins), [2, 2, 2, 2, 2]);
        let eleven: Vec<f64> = (1..=11).rev().map(f64::from).collect();
        assert_eq!(
            sizes(&quintile_bins(&eleven).unwrap().bins),
            [3, 2, 2, 2, 2]
        );
        assert!(quintile_bins(&[3.0; 8]).is_err());
        assert!(quintile_bins(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn boundary_values_go_low() {
        let b = quintile_bins(&[1.0, 1.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]).unwrap();
        assert_eq!(b.edges[0], 1.0);
        assert_eq!(sizes(&b.bins), [3, 1, 2, 2, 2]);
    }

    #[test]
    fn critical_value_df16() {
        let c = chi_squared_critical_value(0.05, 16).unwrap();
        assert!((c - 26.30).abs() < 0.01, "{c}");
        assert!((c - 26.296).abs() < 1e-3, "{c}");
        assert!((chi_squared_critical_value(0.05, 1).unwrap() - 3.841).abs() < 1e-3);
    }

    #[test]
    fn perfect_dependence() {
        let samples: Vec<(f64, f64)> = (0..100).map(|i| (i as f64, i as f64)).collect();
        let r = chi_squared_independence(&samples).unwrap();
        assert!((r.statistic - 400.0).abs() < 1e-9);
        assert_eq!(r.dof, 16);
        assert!(r.reject_null);
        for (i, row) in r.table.counts.iter().enumerate() {
            assert_eq!(row[i], 20);
        }
        assert_eq!(r.table.total(), 100);
    }

    #[test]
    fn product_table_gives_zero() {
        // every (row, col) combination exactly once
        let samples: Vec<(f64, f64)> = (0..25).map(|i| ((i / 5) as f64, (i % 5) as f64)).collect();
        let r = chi_squared_independence(&samples).unwrap();
        assert!(r.statistic.abs() < 1e-12);
        assert!(!r.reject_null);
        assert!(chi_squared_independence(&samples[..24]).is_err());
    }

    #[test]
    fn distance_sample_counts() {
        let c = CodingVariables {
            mean: 1.0,
            dispersion: 1.0,
        };
        let pair = |i: usize, y: f64| PatternPair {
            x: vec![0.0, 0.0],
            y: vec![y],
            x_coding: c,
            y_coding: c,
            anchor_index: i,
            degenerate: false,
        };
        let spec = EncodingSpec {
            n: 2,
            m: 1,
            ..EncodingSpec::default()
        };
        let ds =
            PatternDataset::new((0..5).map(|i| pair(i, i as f64)).collect(), spec, "T").unwrap();
        let s = distance_samples(&ds).unwrap();
        assert_eq!(s.len(), 10);
        assert!(s.iter().all(|&(dx, dy)| dx == 0.0 && dy > 0.0));
        let two = PatternDataset::new(vec![pair(0, 0.0), pair(1, 1.0)], spec, "T").unwrap();
        assert_eq!(distance_samples(&two).unwrap().len(), 1);
        assert!(distance_samples(&two.without(0)).is_err());
    }

    #[test]
    fn metric_examples() {
        let m = error_metrics(&[5.0, 7.0], &[5.0, 7.0]).unwrap();
        assert_eq!(
            m,
            MetricsReport {
                median_ape: 0.0,
                mape: 0.0,
                iqr_ape: 0.0,
                rmse: 0.0
            }
        );
        let m = error_metrics(&[100.0, 100.0], &[110.0, 90.0]).unwrap();
        assert!(
            (m.mape - 10.0).abs() < 1e-12
                && (m.median_ape - 10.0).abs() < 1e-12
                && (m.rmse - 10.0).abs() < 1e-12
        );
        let m = error_metrics(&[100.0], &[105.0]).unwrap();
        assert!((m.mape - 5.0).abs() < 1e-12 && (m.rmse - 5.0).abs() < 1e-12);
        assert!(error_metrics(&[0.0], &[1.0]).is_err());
        assert!(error_metrics(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn iqr_uses_interpolated_quartiles() {
        // APE = 0, 10, 20, 30 -> Q1 = 7.5, Q3 = 22.5
        let m = error_metrics(&[100.0; 4], &[100.0, 110.0, 80.0, 130.0]).unwrap();
        assert!((m.iqr_ape - 15.0).abs() < 1e-12);
        assert!((m.median_ape - 15.0).abs() < 1e-12);
    }

    #[test]
    fn seasonal_naive_examples() {
        let year: Vec<f64> = (1..=12).map(|v| 100.0 + v as f64).collect();
        let tiled: Vec<f64> = year.iter().cycle().take(36).copied().collect();
        let s = MonthlyLoadSeries::new("T", YearMonth::new(2000, 1).unwrap(), tiled).unwrap();
        assert_eq!(seasonal_naive(&s, 12).unwrap(), year);

        let thirteen: Vec<f64> = (1..=13).map(f64::from).collect();
        let s = MonthlyLoadSeries::new("T", YearMonth::new(2000, 1).unwrap(), thirteen).unwrap();
        // targets are months 2..13 of the calendar; each maps 12 months back
        assert_eq!(
            seasonal_naive(&s, 12).unwrap(),
            (2..=13).map(f64::from).collect::<Vec<_>>()
        );
        let short =
            MonthlyLoadSeries::new("T", YearMonth::new(2000, 1).unwrap(), vec![1.0; 11]).unwrap();
        assert!(seasonal_naive(&short, 12).is_err());
    }
}
