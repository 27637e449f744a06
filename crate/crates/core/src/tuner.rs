//! Hyperparameter selection by exhaustive grid search with leave-one-out
//! cross-validation over pattern pairs.
//!
//! Kernel widths are searched on a data-calibrated scale: FNM and GRNN use
//! `sigma = a * d_med` (median pairwise x-pattern distance), N-WE uses
//! `h_t = b * h^S_t` with Scott-rule starting bandwidths.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{build_pairs, decode_y, EncodingSpec, PatternDataset};
use crate::error::{invalid, Error, Result};
use crate::models::{
    aggregate_sparse, kernel_weights, knn_sparse, neighbor_order, sq_distance, ModelConfig,
    ModelKind,
};
use crate::series::MonthlyLoadSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_values: Vec<usize>,
    pub k_values: Vec<usize>,
    pub a_values: Vec<f64>,
    pub b_values: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n_values: (3..=24).collect(),
            k_values: (1..=50).collect(),
            // 0.02, 0.04, ..., 1.00
            a_values: (1..=50).map(|i| i as f64 * 2.0 / 100.0).collect(),
            // 0.15, 0.20, ..., 2.00
            b_values: (0..=37).map(|i| (15 + 5 * i) as f64 / 100.0).collect(),
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_values.is_empty()
            || self.k_values.is_empty()
            || self.a_values.is_empty()
            || self.b_values.is_empty()
        {
            return Err(invalid("grid lists must be nonempty"));
        }
        if self.n_values.contains(&0) || self.k_values.contains(&0) {
            return Err(invalid("grid n and k values must be >= 1"));
        }
        if self
            .a_values
            .iter()
            .chain(&self.b_values)
            .any(|v| !(*v > 0.0 && v.is_finite()))
        {
            return Err(invalid("grid a and b values must be finite and > 0"));
        }
        Ok(())
    }
}

/// One evaluated grid point. `param` is `k`, `a` or `b` depending on the kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub n: usize,
    pub param: f64,
    pub config: ModelConfig,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best_config: ModelConfig,
    pub best_spec: EncodingSpec,
    pub best_param: f64,
    /// Mean validation MAPE (%) of the best point.
    pub cv_error: f64,
    pub grid_trace: Vec<TracePoint>,
    /// Grid points skipped because the data could not support them.
    pub infeasible: usize,
}

fn require_pairs(dataset: &PatternDataset, required: usize, what: &str) -> Result<()> {
    if dataset.len() < required {
        return Err(Error::InsufficientHistory {
            context: format!("{} {what}", dataset.source_id()),
            required,
            available: dataset.len(),
        });
    }
    Ok(())
}

fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Median of the `N(N-1)/2` pairwise x-pattern distances.
pub fn median_pairwise_distance(dataset: &PatternDataset) -> Result<f64> {
    require_pairs(dataset, 2, "pattern pairs for median distance")?;
    let pairs = dataset.pairs();
    let mut d = Vec::with_capacity(pairs.len() * (pairs.len() - 1) / 2);
    for i in 0..pairs.len() {
        for j in i + 1..pairs.len() {
            d.push(sq_distance(&pairs[i].x, &pairs[j].x).sqrt());
        }
    }
    d.sort_by(f64::total_cmp);
    Ok(median_sorted(&d))
}

/// Scott-rule starting bandwidths `s_t * N^(-1/(n+4))` with population
/// standard deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct ScottBandwidths {
    pub values: Vec<f64>,
    /// Components with zero spread across the training x-patterns.
    pub flat_components: Vec<usize>,
}

impl ScottBandwidths {
    pub fn is_degenerate(&self) -> bool {
        !self.flat_components.is_empty()
    }
}

pub fn scott_bandwidths(dataset: &PatternDataset) -> Result<ScottBandwidths> {
    require_pairs(dataset, 2, "pattern pairs for Scott bandwidths")?;
    let n = dataset.spec().n;
    let count = dataset.len() as f64;
    let factor = count.powf(-1.0 / (n as f64 + 4.0));
    let mut values = Vec::with_capacity(n);
    let mut flat_components = Vec::new();
    for t in 0..n {
        let mean = dataset.pairs().iter().map(|p| p.x[t]).sum::<f64>() / count;
        let var = dataset
            .pairs()
            .iter()
            .map(|p| (p.x[t] - mean).powi(2))
            .sum::<f64>()
            / count;
        let h = var.sqrt() * factor;
        if h <= 0.0 {
            flat_components.push(t);
        }
        values.push(h);
    }
    Ok(ScottBandwidths {
        values,
        flat_components,
    })
}

pub fn sigma_from_a(a: f64, dataset: &PatternDataset) -> Result<f64> {
    sigma_from_median(a, median_pairwise_distance(dataset)?)
}

fn sigma_from_median(a: f64, d_med: f64) -> Result<f64> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(invalid(format!("a must be > 0, got {a}")));
    }
    if d_med <= 0.0 {
        return Err(Error::Degenerate("median pairwise distance is 0".into()));
    }
    Ok(a * d_med)
}

pub fn bandwidths_from_b(b: f64, dataset: &PatternDataset) -> Result<Vec<f64>> {
    bandwidths_from_scott(b, &scott_bandwidths(dataset)?)
}

fn bandwidths_from_scott(b: f64, scott: &ScottBandwidths) -> Result<Vec<f64>> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(invalid(format!("b must be > 0, got {b}")));
    }
    if let Some(t) = scott.flat_components.first() {
        return Err(Error::Degenerate(format!(
            "x-pattern component {} has zero spread",
            t + 1
        )));
    }
    Ok(scott.values.iter().map(|h| b * h).collect())
}

/// Precomputed state shared by every fold of one dataset.
struct FoldContext<'a> {
    dataset: &'a PatternDataset,
    anchors: Vec<usize>,
    /// Row-major `N x N` squared distances.
    sq: Vec<f64>,
    dist: Vec<f64>,
    /// Decoded true demands of each pair's output window.
    actual: Vec<Vec<f64>>,
    /// Row-major `N x m` y-patterns.
    ys: Vec<f64>,
    /// Per-fold neighbor order excluding the held-out pair.
    orders: std::sync::OnceLock<Vec<Vec<usize>>>,
}

impl<'a> FoldContext<'a> {
    fn new(dataset: &'a PatternDataset) -> Result<Self> {
        let pairs = dataset.pairs();
        let n = pairs.len();
        let mut sq = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let d = sq_distance(&pairs[i].x, &pairs[j].x);
                sq[i * n + j] = d;
                sq[j * n + i] = d;
            }
        }
        let dist = sq.iter().map(|d| d.sqrt()).collect();
        let actual = pairs
            .iter()
            .map(|p| {
                let a = decode_y(&p.y, &p.y_coding, dataset.spec())?;
                if a.iter().any(|v| *v <= 0.0) {
                    return Err(Error::Degenerate(format!(
                        "{} pair at index {} decodes to non-positive demand",
                        dataset.source_id(),
                        p.anchor_index
                    )));
                }
                Ok(a)
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            dataset,
            anchors: pairs.iter().map(|p| p.anchor_index).collect(),
            sq,
            dist,
            actual,
            ys: pairs.iter().flat_map(|p| p.y.iter().copied()).collect(),
            orders: std::sync::OnceLock::new(),
        })
    }

    fn len(&self) -> usize {
        self.anchors.len()
    }

    fn orders(&self) -> &[Vec<usize>] {
        self.orders.get_or_init(|| {
            let n = self.len();
            (0..n)
                .map(|j| {
                    let row = &self.dist[j * n..(j + 1) * n];
                    neighbor_order(row, &self.anchors)
                        .into_iter()
                        .filter(|&i| i != j)
                        .collect()
                })
                .collect()
        })
    }

    /// Kernel weights of the other pairs for held-out pair `j`.
    fn kernel_fold(&self, j: usize, exponent: impl Fn(usize) -> f64) -> Vec<(usize, f64)> {
        let others: Vec<usize> = (0..self.len()).filter(|&i| i != j).collect();
        let e: Vec<f64> = others.iter().map(|&i| exponent(i)).collect();
        let anchors: Vec<usize> = others.iter().map(|&i| self.anchors[i]).collect();
        others
            .into_iter()
            .zip(kernel_weights(&e, &anchors))
            .filter(|(_, w)| *w != 0.0)
            .collect()
    }

    /// Neighbor weights of the other pairs for held-out pair `j` (k-NN kinds).
    fn fold_weights(&self, j: usize, config: &ModelConfig) -> Vec<(usize, f64)> {
        let n = self.len();
        let (rho, gamma) = match config.kind {
            ModelKind::KnnWeighted => (config.rho, config.gamma),
            _ => (0.0, 0.0),
        };
        knn_sparse(
            &self.orders()[j],
            &self.dist[j * n..(j + 1) * n],
            config.k,
            rho,
            gamma,
        )
    }

    fn check(&self, config: &ModelConfig) -> Result<()> {
        let n = self.len();
        let spec = self.dataset.spec();
        match config.kind {
            ModelKind::Knn | ModelKind::KnnWeighted => {
                if config.k == 0 {
                    return Err(invalid("k must be >= 1"));
                }
                require_pairs(
                    self.dataset,
                    config.k + 1,
                    "pattern pairs for leave-one-out k-NN",
                )?;
                if config.kind == ModelKind::KnnWeighted
                    && (!(0.0..=1.0).contains(&config.rho)
                        || !(config.gamma >= -1.0 && config.gamma.is_finite()))
                {
                    return Err(invalid("rho must be in [0, 1] and gamma >= -1"));
                }
            }
            ModelKind::Fnm => {
                require_pairs(self.dataset, 2, "pattern pairs for leave-one-out")?;
                if !(config.sigma > 0.0
                    && config.alpha > 0.0
                    && config.sigma.is_finite()
                    && config.alpha.is_finite())
                {
                    return Err(invalid("sigma and alpha must be > 0"));
                }
            }
            ModelKind::Grnn => {
                require_pairs(self.dataset, 2, "pattern pairs for leave-one-out")?;
                match &config.per_neuron_sigmas {
                    Some(s) if s.len() != n => {
                        return Err(Error::LengthMismatch {
                            expected: n,
                            actual: s.len(),
                        })
                    }
                    Some(s) if s.iter().any(|v| !(*v > 0.0 && v.is_finite())) => {
                        return Err(invalid("GRNN sigmas must be > 0"))
                    }
                    None if !(config.sigma > 0.0 && config.sigma.is_finite()) => {
                        return Err(invalid("GRNN sigma must be > 0"))
                    }
                    _ => {}
                }
            }
            ModelKind::Nwe => {
                require_pairs(self.dataset, 2, "pattern pairs for leave-one-out")?;
                if config.bandwidths.len() != spec.n {
                    return Err(Error::LengthMismatch {
                        expected: spec.n,
                        actual: config.bandwidths.len(),
                    });
                }
                if config
                    .bandwidths
                    .iter()
                    .any(|h| !(*h > 0.0 && h.is_finite()))
                {
                    return Err(invalid("bandwidths must be > 0"));
                }
            }
        }
        Ok(())
    }

    /// Symmetric `N x N` kernel exponents for FNM, GRNN and N-WE; row `j`
    /// column `i` is the exponent of pair `i` when pair `j` is the query.
    fn exponents(&self, config: &ModelConfig) -> Vec<f64> {
        let n = self.len();
        let pairs = self.dataset.pairs();
        match config.kind {
            ModelKind::Fnm if config.alpha == 2.0 => {
                let s2 = config.sigma * config.sigma;
                self.sq.iter().map(|d| d / s2).collect()
            }
            ModelKind::Fnm => self
                .dist
                .iter()
                .map(|d| (d / config.sigma).powf(config.alpha))
                .collect(),
            ModelKind::Grnn => match &config.per_neuron_sigmas {
                Some(s) => (0..n * n)
                    .map(|ji| self.sq[ji] / (s[ji % n] * s[ji % n]))
                    .collect(),
                None => {
                    let s2 = config.sigma * config.sigma;
                    self.sq.iter().map(|d| d / s2).collect()
                }
            },
            _ => {
                let inv: Vec<f64> = config
                    .bandwidths
                    .iter()
                    .map(|h| 1.0 / (2.0 * h * h))
                    .collect();
                let mut e = vec![0.0; n * n];
                for j in 0..n {
                    for i in j + 1..n {
                        let v: f64 = pairs[j]
                            .x
                            .iter()
                            .zip(&pairs[i].x)
                            .zip(&inv)
                            .map(|((q, x), c)| (q - x) * (q - x) * c)
                            .sum();
                        e[j * n + i] = v;
                        e[i * n + j] = v;
                    }
                }
                e
            }
        }
    }

    fn error(&self, config: &ModelConfig) -> Result<f64> {
        self.check(config)?;
        let spec = self.dataset.spec();
        let pairs = self.dataset.pairs();
        let n = self.len();
        let kernel = !matches!(config.kind, ModelKind::Knn | ModelKind::KnnWeighted);
        let exponents = if kernel {
            self.exponents(config)
        } else {
            Vec::new()
        };
        let mut g = vec![0.0; n];
        let mut total = 0.0;
        for j in 0..n {
            let y_hat = if kernel {
                let row = &exponents[j * n..(j + 1) * n];
                let mut sum = 0.0;
                for (i, (gi, e)) in g.iter_mut().zip(row).enumerate() {
                    *gi = if i == j { 0.0 } else { (-e).exp() };
                    sum += *gi;
                }
                if sum > 0.0 && sum.is_finite() {
                    let mut out = vec![0.0; spec.m];
                    for (gi, y) in g.iter().zip(self.ys.chunks_exact(spec.m)) {
                        if *gi != 0.0 {
                            for (o, y) in out.iter_mut().zip(y) {
                                *o += gi * y;
                            }
                        }
                    }
                    out.iter_mut().for_each(|o| *o /= sum);
                    out
                } else {
                    aggregate_sparse(self.kernel_fold(j, |i| row[i]).into_iter(), self.dataset)
                }
            } else {
                aggregate_sparse(self.fold_weights(j, config).into_iter(), self.dataset)
            };
            let predicted = decode_y(&y_hat, &pairs[j].y_coding, spec)?;
            total += predicted
                .iter()
                .zip(&self.actual[j])
                .map(|(p, a)| (a - p).abs() / a)
                .sum::<f64>();
        }
        Ok(100.0 * total / (n * spec.m) as f64)
    }
}

/// Leave-one-out MAPE (%) of `config` on `dataset`: each pair is predicted
/// from all the others, and both the prediction and the held-out y-pattern
/// are decoded with the held-out pair's coding variables.
pub fn loocv_error(dataset: &PatternDataset, config: &ModelConfig) -> Result<f64> {
    FoldContext::new(dataset)?.error(config)
}

/// Hyperparameter values searched for `kind` on one dataset.
enum ParamAxis {
    Knn(Vec<usize>),
    Scale {
        values: Vec<f64>,
        resolve: Box<dyn Fn(f64) -> Result<ModelConfig> + Send + Sync>,
    },
}

fn axis_for(kind: ModelKind, grid: &GridSpec, dataset: &PatternDataset) -> Result<ParamAxis> {
    Ok(match kind {
        ModelKind::Knn | ModelKind::KnnWeighted => ParamAxis::Knn(grid.k_values.clone()),
        ModelKind::Fnm | ModelKind::Grnn => {
            let d_med = median_pairwise_distance(dataset)?;
            ParamAxis::Scale {
                values: grid.a_values.clone(),
                resolve: Box::new(move |a| {
                    let sigma = sigma_from_median(a, d_med)?;
                    Ok(if kind == ModelKind::Fnm {
                        ModelConfig::fnm(sigma, 2.0)
                    } else {
                        ModelConfig::grnn(sigma)
                    })
                }),
            }
        }
        ModelKind::Nwe => {
            let scott = scott_bandwidths(dataset)?;
            ParamAxis::Scale {
                values: grid.b_values.clone(),
                resolve: Box::new(move |b| Ok(ModelConfig::nwe(bandwidths_from_scott(b, &scott)?))),
            }
        }
    })
}

fn config_for_k(kind: ModelKind, k: usize) -> ModelConfig {
    match kind {
        ModelKind::KnnWeighted => ModelConfig::knn_weighted(k, 1.0, 0.0),
        _ => ModelConfig::knn(k),
    }
}

/// Exhaustive search over `n` and the kind's hyperparameter, minimizing
/// leave-one-out MAPE. k-NNw uses `rho = 1, gamma = 0`; FNM uses `alpha = 2`.
/// Ties go to the smaller `n`, then the smaller hyperparameter.
pub fn grid_search(
    series: &MonthlyLoadSeries,
    template: &EncodingSpec,
    kind: ModelKind,
    grid: &GridSpec,
) -> Result<TuneResult> {
    grid.validate()?;
    let mut n_values = grid.n_values.clone();
    n_values.sort_unstable();
    n_values.dedup();

    let mut datasets = Vec::new();
    let mut infeasible = 0;
    for &n in &n_values {
        let spec = template.with_n(n);
        match build_pairs(series, &spec) {
            Ok(ds) => datasets.push((spec, ds)),
            Err(_) => infeasible += 1,
        }
    }

    let mut candidates: Vec<(usize, f64, &PatternDataset, ModelConfig)> = Vec::new();
    let mut contexts = Vec::new();
    for (spec, ds) in &datasets {
        let Ok(ctx) = FoldContext::new(ds) else {
            infeasible += 1;
            continue;
        };
        contexts.push((spec.n, ctx));
        match axis_for(kind, grid, ds) {
            Ok(ParamAxis::Knn(ks)) => {
                for k in ks {
                    if k < ds.len() {
                        candidates.push((spec.n, k as f64, ds, config_for_k(kind, k)));
                    } else {
                        infeasible += 1;
                    }
                }
            }
            Ok(ParamAxis::Scale { values, resolve }) => {
                for v in values {
                    match resolve(v) {
                        Ok(c) => candidates.push((spec.n, v, ds, c)),
                        Err(_) => infeasible += 1,
                    }
                }
            }
            Err(_) => infeasible += 1,
        }
    }

    let evaluated: Vec<Option<TracePoint>> = candidates
        .par_iter()
        .map(|(n, param, _, config)| {
            let ctx = &contexts.iter().find(|(cn, _)| cn == n)?.1;
            ctx.error(config).ok().map(|error| TracePoint {
                n: *n,
                param: *param,
                config: config.clone(),
                error,
            })
        })
        .collect();
    infeasible += evaluated.iter().filter(|e| e.is_none()).count();
    let mut trace: Vec<TracePoint> = evaluated.into_iter().flatten().collect();
    trace.sort_by(|a, b| a.n.cmp(&b.n).then(a.param.total_cmp(&b.param)));

    let best = trace
        .iter()
        .min_by(|a, b| {
            a.error
                .total_cmp(&b.error)
                .then(a.n.cmp(&b.n))
                .then(a.param.total_cmp(&b.param))
        })
        .ok_or_else(|| {
            Error::Degenerate(format!(
                "{}: every {} grid point is infeasible",
                series.country(),
                kind
            ))
        })?
        .clone();
    Ok(TuneResult {
        best_spec: template.with_n(best.n),
        best_config: best.config,
        best_param: best.param,
        cv_error: best.error,
        grid_trace: trace,
        infeasible,
    })
}
