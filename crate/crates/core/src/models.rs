//! Similarity-weighted regressors over pattern datasets.
//!
//! Every model predicts a y-pattern as a convex combination of the training
//! y-patterns, `m(x) = sum_i w(x, x_i) y_i`, and differs only in the
//! weighting function:
//!
//! * k-NN: uniform weights over the `k` nearest x-patterns, optionally shaped
//!   by a distance-dependent function with differentiation `rho` and
//!   convexity `gamma` (k-NNw).
//! * FNM: membership `exp(-(d / sigma)^alpha)` over all training patterns.
//! * N-WE: Nadaraya-Watson with a product normal kernel, one bandwidth per
//!   pattern component.
//! * GRNN: Gaussian units `exp(-d^2 / sigma_i^2)`, one per training pattern.
//!
//! Distances are Euclidean on x-patterns.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::codec::{
    build_pairs, decode_y, encode_x, CodingMode, CodingVariables, EncodingSpec, PatternDataset,
};
use crate::error::{invalid, Error, Result};
use crate::series::MonthlyLoadSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Knn,
    KnnWeighted,
    Fnm,
    Nwe,
    Grnn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        Self::Knn,
        Self::KnnWeighted,
        Self::Fnm,
        Self::Nwe,
        Self::Grnn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Knn => "knn",
            Self::KnnWeighted => "knnw",
            Self::Fnm => "fnm",
            Self::Nwe => "nwe",
            Self::Grnn => "grnn",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "knn" => Ok(Self::Knn),
            "knnw" | "knn_weighted" => Ok(Self::KnnWeighted),
            "fnm" => Ok(Self::Fnm),
            "nwe" => Ok(Self::Nwe),
            "grnn" => Ok(Self::Grnn),
            other => Err(invalid(format!("unknown model kind {other:?}"))),
        }
    }
}

/// A model variant with its hyperparameters. Only the fields relevant to
/// `kind` are consulted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub k: usize,
    pub rho: f64,
    pub gamma: f64,
    /// FNM membership width, or the shared GRNN bandwidth.
    pub sigma: f64,
    pub alpha: f64,
    /// Per-component N-WE bandwidths.
    pub bandwidths: Vec<f64>,
    /// Per-neuron GRNN bandwidths; `sigma` is used for every neuron when absent.
    pub per_neuron_sigmas: Option<Vec<f64>>,
}

impl ModelConfig {
    fn base(kind: ModelKind) -> Self {
        Self {
            kind,
            k: 1,
            rho: 0.0,
            gamma: 0.0,
            sigma: 1.0,
            alpha: 2.0,
            bandwidths: Vec::new(),
            per_neuron_sigmas: None,
        }
    }

    pub fn knn(k: usize) -> Self {
        Self {
            k,
            ..Self::base(ModelKind::Knn)
        }
    }

    pub fn knn_weighted(k: usize, rho: f64, gamma: f64) -> Self {
        Self {
            k,
            rho,
            gamma,
            ..Self::base(ModelKind::KnnWeighted)
        }
    }

    pub fn fnm(sigma: f64, alpha: f64) -> Self {
        Self {
            sigma,
            alpha,
            ..Self::base(ModelKind::Fnm)
        }
    }

    pub fn nwe(bandwidths: Vec<f64>) -> Self {
        Self {
            bandwidths,
            ..Self::base(ModelKind::Nwe)
        }
    }

    pub fn grnn(sigma: f64) -> Self {
        Self {
            sigma,
            ..Self::base(ModelKind::Grnn)
        }
    }

    pub fn grnn_per_neuron(sigmas: Vec<f64>) -> Self {
        Self {
            per_neuron_sigmas: Some(sigmas),
            ..Self::base(ModelKind::Grnn)
        }
    }
}

/// Nonnegative weights over the training pairs, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Accepts externally built weights after checking the simplex constraint.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(invalid("weights must be finite and nonnegative"));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("weights sum to {sum}, expected 1")));
        }
        Ok(Self(weights))
    }
}

pub fn euclidean_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(sq_distance(a, b).sqrt())
}

pub(crate) fn sq_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Training indices sorted by ascending distance, ties toward lower anchor.
pub(crate) fn neighbor_order(distances: &[f64], anchors: &[usize]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..distances.len()).collect();
    order.sort_by(|&i, &j| {
        distances[i]
            .partial_cmp(&distances[j])
            .unwrap_or(Ordering::Equal)
            .then(anchors[i].cmp(&anchors[j]))
    });
    order
}

/// Sparse k-NN weights given the neighbor order. Returns `(index, weight)`
/// for the `k` nearest.
pub(crate) fn knn_sparse(
    order: &[usize],
    distances: &[f64],
    k: usize,
    rho: f64,
    gamma: f64,
) -> Vec<(usize, f64)> {
    let hood = &order[..k];
    if rho == 0.0 {
        let w = 1.0 / k as f64;
        return hood.iter().map(|&i| (i, w)).collect();
    }
    let d_k = distances[hood[k - 1]];
    let v: Vec<f64> = hood
        .iter()
        .map(|&i| {
            let r = if d_k > 0.0 { distances[i] / d_k } else { 0.0 };
            let denom = 1.0 + gamma * r;
            // gamma = -1 at r = 1: the shape is flat at 1 for every r < 1
            let shape = if denom == 0.0 { 1.0 } else { (1.0 - r) / denom };
            rho * (shape - 1.0) + 1.0
        })
        .collect();
    let sum: f64 = v.iter().sum();
    if sum > 0.0 {
        hood.iter().zip(&v).map(|(&i, &vi)| (i, vi / sum)).collect()
    } else {
        // every neighbor sits at the k-th distance
        let w = 1.0 / k as f64;
        hood.iter().map(|&i| (i, w)).collect()
    }
}

/// Normalized `exp(-e_i)` weights. When every term underflows, all weight goes
/// to the smallest exponent (lowest anchor on ties).
pub(crate) fn kernel_weights(exponents: &[f64], anchors: &[usize]) -> Vec<f64> {
    let raw: Vec<f64> = exponents.iter().map(|e| (-e).exp()).collect();
    let sum: f64 = raw.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        return raw.into_iter().map(|g| g / sum).collect();
    }
    let mut best = 0;
    for i in 1..exponents.len() {
        let better = match exponents[i].partial_cmp(&exponents[best]) {
            Some(Ordering::Less) => true,
            Some(Ordering::Equal) => anchors[i] < anchors[best],
            _ => false,
        };
        if better {
            best = i;
        }
    }
    let mut w = vec![0.0; exponents.len()];
    w[best] = 1.0;
    w
}

fn check_query(query: &[f64], dataset: &PatternDataset) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::Degenerate("empty pattern dataset".into()));
    }
    if query.len() != dataset.spec().n {
        return Err(Error::LengthMismatch {
            expected: dataset.spec().n,
            actual: query.len(),
        });
    }
    if query.iter().any(|q| !q.is_finite()) {
        return Err(Error::NonFinite("query pattern"));
    }
    Ok(())
}

fn distances_to(query: &[f64], dataset: &PatternDataset) -> Vec<f64> {
    dataset
        .pairs()
        .iter()
        .map(|p| sq_distance(query, &p.x).sqrt())
        .collect()
}

fn anchors(dataset: &PatternDataset) -> Vec<usize> {
    dataset.pairs().iter().map(|p| p.anchor_index).collect()
}

fn positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!(
            "{name} must be finite and > 0, got {value}"
        )))
    }
}

/// k-NN weights. `rho = 0` gives the plain uniform `1/k` neighborhood.
pub fn knn_weights(
    query: &[f64],
    dataset: &PatternDataset,
    k: usize,
    rho: f64,
    gamma: f64,
) -> Result<WeightVector> {
    check_query(query, dataset)?;
    if k == 0 || k > dataset.len() {
        return Err(invalid(format!(
            "k must be in 1..={}, got {k}",
            dataset.len()
        )));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(invalid(format!("rho must be in [0, 1], got {rho}")));
    }
    if !(gamma >= -1.0 && gamma.is_finite()) {
        return Err(invalid(format!("gamma must be >= -1, got {gamma}")));
    }
    let d = distances_to(query, dataset);
    let order = neighbor_order(&d, &anchors(dataset));
    let mut w = vec![0.0; dataset.len()];
    for (i, wi) in knn_sparse(&order, &d, k, rho, gamma) {
        w[i] = wi;
    }
    Ok(WeightVector(w))
}

/// Fuzzy neighborhood weights, `mu_i = exp(-(d_i / sigma)^alpha)` normalized
/// over all training patterns.
pub fn fnm_weights(
    query: &[f64],
    dataset: &PatternDataset,
    sigma: f64,
    alpha: f64,
) -> Result<WeightVector> {
    check_query(query, dataset)?;
    positive("sigma", sigma)?;
    positive("alpha", alpha)?;
    let e: Vec<f64> = distances_to(query, dataset)
        .iter()
        .map(|d| (d / sigma).powf(alpha))
        .collect();
    Ok(WeightVector(kernel_weights(&e, &anchors(dataset))))
}

/// Nadaraya-Watson weights with a product normal kernel.
pub fn nwe_weights(
    query: &[f64],
    dataset: &PatternDataset,
    bandwidths: &[f64],
) -> Result<WeightVector> {
    check_query(query, dataset)?;
    if bandwidths.len() != query.len() {
        return Err(Error::LengthMismatch {
            expected: query.len(),
            actual: bandwidths.len(),
        });
    }
    for &h in bandwidths {
        positive("bandwidth", h)?;
    }
    let e: Vec<f64> = dataset
        .pairs()
        .iter()
        .map(|p| {
            query
                .iter()
                .zip(&p.x)
                .zip(bandwidths)
                .map(|((q, x), h)| (q - x) * (q - x) / (2.0 * h * h))
                .sum()
        })
        .collect();
    Ok(WeightVector(kernel_weights(&e, &anchors(dataset))))
}

/// GRNN weights, `G_i = exp(-|x - x_i|^2 / sigma_i^2)` normalized.
pub fn grnn_weights(
    query: &[f64],
    dataset: &PatternDataset,
    sigmas: &[f64],
) -> Result<WeightVector> {
    check_query(query, dataset)?;
    if sigmas.len() != dataset.len() {
        return Err(Error::LengthMismatch {
            expected: dataset.len(),
            actual: sigmas.len(),
        });
    }
    for &s in sigmas {
        positive("sigma", s)?;
    }
    let e: Vec<f64> = dataset
        .pairs()
        .iter()
        .zip(sigmas)
        .map(|(p, s)| sq_distance(query, &p.x) / (s * s))
        .collect();
    Ok(WeightVector(kernel_weights(&e, &anchors(dataset))))
}

/// Dispatches to the weighting function for `config.kind`.
pub fn weights(
    query: &[f64],
    dataset: &PatternDataset,
    config: &ModelConfig,
) -> Result<WeightVector> {
    match config.kind {
        ModelKind::Knn => knn_weights(query, dataset, config.k, 0.0, 0.0),
        ModelKind::KnnWeighted => knn_weights(query, dataset, config.k, config.rho, config.gamma),
        ModelKind::Fnm => fnm_weights(query, dataset, config.sigma, config.alpha),
        ModelKind::Nwe => nwe_weights(query, dataset, &config.bandwidths),
        ModelKind::Grnn => match &config.per_neuron_sigmas {
            Some(sigmas) => grnn_weights(query, dataset, sigmas),
            None => grnn_weights(query, dataset, &vec![config.sigma; dataset.len()]),
        },
    }
}

/// Weighted combination of the training y-patterns.
pub fn aggregate(weights: &WeightVector, dataset: &PatternDataset) -> Result<Vec<f64>> {
    if weights.len() != dataset.len() {
        return Err(Error::LengthMismatch {
            expected: dataset.len(),
            actual: weights.len(),
        });
    }
    Ok(aggregate_sparse(
        weights
            .as_slice()
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, w)| *w != 0.0),
        dataset,
    ))
}

pub(crate) fn aggregate_sparse(
    weights: impl Iterator<Item = (usize, f64)>,
    dataset: &PatternDataset,
) -> Vec<f64> {
    let pairs = dataset.pairs();
    let mut out = vec![0.0; dataset.spec().m];
    for (i, w) in weights {
        for (o, y) in out.iter_mut().zip(&pairs[i].y) {
            *o += w * y;
        }
    }
    out
}

/// Forecasts the `m` months following `query_window` (shifted by the horizon)
/// from an already built dataset.
///
/// The forecast pattern is decoded with `coding_override` when given, and
/// otherwise with the query window's own coding variables, which is only
/// valid in history coding mode.
pub fn forecast_with_dataset(
    dataset: &PatternDataset,
    query_window: &[f64],
    config: &ModelConfig,
    coding_override: Option<CodingVariables>,
) -> Result<Vec<f64>> {
    let spec = dataset.spec();
    let query = encode_x(query_window, spec)?;
    let w = weights(&query.pattern, dataset, config)?;
    let y_hat = aggregate(&w, dataset)?;
    let coding = match (coding_override, spec.coding_mode) {
        (Some(c), _) => c,
        (None, CodingMode::History) => query.coding,
        (None, CodingMode::External) => {
            return Err(Error::Missing(
                "coding variables for external coding mode".into(),
            ))
        }
    };
    decode_y(&y_hat, &coding, spec)
}

/// Encodes `series`, weights its pairs against the last `n` months and
/// decodes the aggregated pattern into demand for the next `m` months
/// (starting `tau` months after the series end).
pub fn forecast(
    series: &MonthlyLoadSeries,
    config: &ModelConfig,
    spec: &EncodingSpec,
    coding_override: Option<CodingVariables>,
) -> Result<Vec<f64>> {
    let dataset = build_pairs(series, spec)?;
    let values = series.values();
    forecast_with_dataset(
        &dataset,
        &values[values.len() - spec.n..],
        config,
        coding_override,
    )
}
