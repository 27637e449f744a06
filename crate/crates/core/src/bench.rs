//! Corpus-level runs: data validation, the similarity-assumption test,
//! per-country tuning and forecasting against a seasonal-naive baseline,
//! and model rankings.
//!
//! Every country is processed independently; a failure is recorded in the
//! report and never aborts the run. Reports are deterministic: countries and
//! models are kept in sorted maps and parallel work is collected in order.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{
    build_pairs, load_coding_csv, CodingMode, CodingTable, CodingVariables, EncodingSpec,
};
use crate::diagnostics::{
    chi_squared_independence, distance_samples, error_metrics, seasonal_naive, ChiSquaredResult,
    MetricsReport,
};
use crate::error::{invalid, Error, Result};
use crate::models::{forecast_with_dataset, ModelConfig, ModelKind};
use crate::series::{
    inspect_csv, load_csv, split_train_test, CountryCheck, MonthlyLoadSeries, SeriesCollection,
    YearMonth,
};
use crate::synth::synthetic_corpus;
use crate::tuner::{grid_search, GridSpec, TracePoint};

pub const BASELINE: &str = "snaive";

/// Source of the coding variables used to decode test-year forecasts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CodingSource {
    /// Mean and dispersion of the query window.
    History,
    /// Forecasted values read from a `country,year,mean_mwh,dispersion_mwh` file.
    External(PathBuf),
    /// Drift extrapolation of the yearly means and dispersions.
    Drift,
}

impl CodingSource {
    /// Suffix appended to model names in reports.
    pub fn suffix(&self) -> &'static str {
        match self {
            Self::History => "",
            Self::External(_) => "+external",
            Self::Drift => "+drift",
        }
    }
}

impl std::str::FromStr for CodingSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "history" => Ok(Self::History),
            "drift" => Ok(Self::Drift),
            _ => match s.strip_prefix("external:") {
                Some(path) if !path.is_empty() => Ok(Self::External(PathBuf::from(path))),
                _ => Err(invalid(format!(
                    "coding must be history, drift or external:<path>, got {s:?}"
                ))),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticSource {
    pub count: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data_path: Option<PathBuf>,
    /// Generated corpus used instead of `data_path`.
    pub synthetic: Option<SyntheticSource>,
    pub test_year: i32,
    pub models: Vec<ModelKind>,
    /// Encoding template; `n` is the assumption-test length, the tuned `n`
    /// comes from `grid.n_values`.
    pub encoding: EncodingSpec,
    pub grid: GridSpec,
    pub coding: CodingSource,
    pub output_dir: PathBuf,
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data_path: None,
            synthetic: None,
            test_year: 2014,
            models: ModelKind::ALL.to_vec(),
            encoding: EncodingSpec::default(),
            grid: GridSpec::default(),
            coding: CodingSource::History,
            output_dir: PathBuf::from("psfm-out"),
            jobs: 1,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.encoding.validate()?;
        self.grid.validate()?;
        if self.jobs == 0 {
            return Err(invalid("jobs must be >= 1"));
        }
        if self.data_path.is_none() && self.synthetic.is_none() {
            return Err(Error::Missing("data path".into()));
        }
        if let Some(p) = &self.data_path {
            if self.synthetic.is_none() && !p.exists() {
                return Err(Error::Missing(format!("data file {}", p.display())));
            }
        }
        if let CodingSource::External(p) = &self.coding {
            if !p.exists() {
                return Err(Error::Missing(format!("coding file {}", p.display())));
            }
        }
        Ok(())
    }

    pub fn load_series(&self) -> Result<SeriesCollection> {
        match (&self.synthetic, &self.data_path) {
            (Some(s), _) => synthetic_corpus(s.count, s.seed),
            (None, Some(p)) => load_csv(p),
            (None, None) => Err(Error::Missing("data path".into())),
        }
    }

    /// Encoding template for tuning, with the coding mode implied by the
    /// coding source.
    fn tuning_template(&self) -> EncodingSpec {
        let coding_mode = match self.coding {
            CodingSource::History => CodingMode::History,
            _ => CodingMode::External,
        };
        EncodingSpec {
            coding_mode,
            ..self.encoding
        }
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
            .map_err(|e| invalid(format!("thread pool: {e}")))
    }
}

// --- validate ---------------------------------------------------------------

#[derive(Debug)]
pub struct ValidationSummary {
    pub checks: Vec<CountryCheck>,
}

impl ValidationSummary {
    pub fn all_valid(&self) -> bool {
        self.checks.iter().all(CountryCheck::is_valid)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let status = if c.is_valid() { "ok" } else { "INVALID" };
            let _ = writeln!(
                out,
                "{}\t{} months\t{}..{}\t{status}",
                c.country, c.months, c.first, c.last
            );
            for p in &c.problems {
                let _ = writeln!(out, "  {p}");
            }
        }
        let bad = self.checks.iter().filter(|c| !c.is_valid()).count();
        let _ = writeln!(out, "{} series, {} invalid", self.checks.len(), bad);
        out
    }
}

pub fn cmd_validate(config: &RunConfig) -> Result<ValidationSummary> {
    if let Some(s) = &config.synthetic {
        let corpus = synthetic_corpus(s.count, s.seed)?;
        let checks = corpus
            .iter()
            .map(|series| CountryCheck {
                country: series.country().to_string(),
                months: series.len(),
                first: series.start(),
                last: series.end(),
                problems: Vec::new(),
            })
            .collect();
        return Ok(ValidationSummary { checks });
    }
    let path = config
        .data_path
        .as_ref()
        .ok_or_else(|| Error::Missing("data path".into()))?;
    Ok(ValidationSummary {
        checks: inspect_csv(std::fs::File::open(path)?)?,
    })
}

// --- assumption ---------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub country: String,
    pub stage: String,
    pub message: String,
}

impl Failure {
    fn new(country: &str, stage: &str, err: &Error) -> Self {
        Self {
            country: country.to_string(),
            stage: stage.to_string(),
            message: err.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionRow {
    pub country: String,
    pub pairs: usize,
    pub result: ChiSquaredResult,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AssumptionTable {
    pub rows: Vec<AssumptionRow>,
    pub failures: Vec<Failure>,
}

impl AssumptionTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("country,pairs,statistic,dof,critical_value,reject_null\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.country,
                r.pairs,
                r.result.statistic,
                r.result.dof,
                r.result.critical_value,
                r.result.reject_null
            );
        }
        out
    }
}

/// Chi-squared statistic of one series under `spec`.
pub fn assumption_test(
    series: &MonthlyLoadSeries,
    spec: &EncodingSpec,
) -> Result<(usize, ChiSquaredResult)> {
    let dataset = build_pairs(series, spec)?;
    let result = chi_squared_independence(&distance_samples(&dataset)?)?;
    Ok((dataset.len(), result))
}

/// Runs the assumption test on every series of the collection.
pub fn cmd_assumption(
    collection: &SeriesCollection,
    spec: &EncodingSpec,
    jobs: usize,
) -> Result<AssumptionTable> {
    let pool = RunConfig {
        jobs,
        ..RunConfig::default()
    }
    .pool()?;
    let series: Vec<&MonthlyLoadSeries> = collection.iter().collect();
    let results: Vec<_> = pool.install(|| {
        series
            .par_iter()
            .map(|s| (s.country(), assumption_test(s, spec)))
            .collect()
    });
    let mut table = AssumptionTable::default();
    for (country, r) in results {
        match r {
            Ok((pairs, result)) => table.rows.push(AssumptionRow {
                country: country.to_string(),
                pairs,
                result,
            }),
            Err(e) => table.failures.push(Failure::new(country, "assumption", &e)),
        }
    }
    Ok(table)
}

// --- coding variable forecasts --------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NaiveMethod {
    Last,
    Drift,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NaiveCoding {
    pub coding: CodingVariables,
    /// The extrapolated dispersion went negative and was set to zero.
    pub clamped: bool,
}

/// Predicts next year's coding variables from the yearly history (oldest
/// first): `last` repeats the final year, `drift` extends the last change.
pub fn naive_coding_forecast(
    history: &[CodingVariables],
    method: NaiveMethod,
) -> Result<NaiveCoding> {
    let need = match method {
        NaiveMethod::Last => 1,
        NaiveMethod::Drift => 2,
    };
    if history.len() < need {
        return Err(Error::InsufficientHistory {
            context: "coding variable history".into(),
            required: need,
            available: history.len(),
        });
    }
    let last = history[history.len() - 1];
    if method == NaiveMethod::Last {
        return Ok(NaiveCoding {
            coding: last,
            clamped: false,
        });
    }
    let prev = history[history.len() - 2];
    let mean = last.mean + (last.mean - prev.mean);
    let dispersion = last.dispersion + (last.dispersion - prev.dispersion);
    if mean.is_nan() || mean <= 0.0 {
        return Err(Error::Degenerate(format!(
            "drift projects a non-positive mean {mean}"
        )));
    }
    Ok(NaiveCoding {
        coding: CodingVariables {
            mean,
            dispersion: dispersion.max(0.0),
        },
        clamped: dispersion < 0.0,
    })
}

/// Coding variables of each complete calendar year of `series`, oldest first.
pub fn yearly_coding_history(series: &MonthlyLoadSeries) -> Vec<CodingVariables> {
    let first = series.start();
    let skip = if first.month == 1 {
        0
    } else {
        13 - first.month as usize
    };
    series.values()[skip.min(series.len())..]
        .chunks_exact(12)
        .map(CodingVariables::of_window)
        .collect()
}

// --- forecast ---------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningSummary {
    pub n: usize,
    /// `k`, `a` or `b` depending on the model.
    pub param: f64,
    pub cv_error: f64,
    pub config: ModelConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub metrics: MetricsReport,
    pub tuning: Option<TuningSummary>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CountryReport {
    pub assumption: Option<ChiSquaredResult>,
    pub models: BTreeMap<String, ModelEntry>,
}

/// Metrics averaged over the countries where the model produced a forecast.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub countries: usize,
    pub median_ape: f64,
    pub mape: f64,
    pub iqr_ape: f64,
    pub rmse: f64,
    /// Mean of the per-country ranks by MAPE (ties share the mid-rank).
    pub mean_rank: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Ranking {
    /// Ascending aggregate median APE.
    pub by_median_ape: Vec<String>,
    /// Ascending mean per-country rank.
    pub by_mean_rank: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub test_year: i32,
    pub per_country: BTreeMap<String, CountryReport>,
    pub aggregate: BTreeMap<String, AggregateMetrics>,
    pub ranking: Ranking,
    pub failures: Vec<Failure>,
}

impl EvaluationReport {
    pub fn from_countries(
        test_year: i32,
        per_country: BTreeMap<String, CountryReport>,
        failures: Vec<Failure>,
    ) -> Self {
        let (aggregate, ranking) = summarize(&per_country);
        Self {
            test_year,
            per_country,
            aggregate,
            ranking,
            failures,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_reader(std::io::BufReader::new(
            std::fs::File::open(path)?,
        ))?)
    }
}

/// Ranks of `values` (ascending, 1-based) with tied values sharing the mean
/// of the positions they occupy.
pub fn mid_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Aggregate metrics and both rankings, recomputed from per-country entries.
pub fn summarize(
    per_country: &BTreeMap<String, CountryReport>,
) -> (BTreeMap<String, AggregateMetrics>, Ranking) {
    let mut sums: BTreeMap<&str, ([f64; 5], usize)> = BTreeMap::new();
    for report in per_country.values() {
        let names: Vec<&str> = report.models.keys().map(String::as_str).collect();
        let mapes: Vec<f64> = report.models.values().map(|e| e.metrics.mape).collect();
        for ((name, entry), rank) in names
            .iter()
            .zip(report.models.values())
            .zip(mid_ranks(&mapes))
        {
            let m = &entry.metrics;
            let (acc, count) = sums.entry(name).or_insert(([0.0; 5], 0));
            for (a, v) in acc
                .iter_mut()
                .zip([m.median_ape, m.mape, m.iqr_ape, m.rmse, rank])
            {
                *a += v;
            }
            *count += 1;
        }
    }
    let aggregate: BTreeMap<String, AggregateMetrics> = sums
        .into_iter()
        .map(|(name, (acc, count))| {
            let c = count as f64;
            let agg = AggregateMetrics {
                countries: count,
                median_ape: acc[0] / c,
                mape: acc[1] / c,
                iqr_ape: acc[2] / c,
                rmse: acc[3] / c,
                mean_rank: acc[4] / c,
            };
            (name.to_string(), agg)
        })
        .collect();
    let ordered = |key: fn(&AggregateMetrics) -> f64| {
        let mut names: Vec<&String> = aggregate.keys().collect();
        names.sort_by(|a, b| {
            key(&aggregate[*a])
                .total_cmp(&key(&aggregate[*b]))
                .then(a.cmp(b))
        });
        names.into_iter().cloned().collect::<Vec<_>>()
    };
    let ranking = Ranking {
        by_median_ape: ordered(|a| a.median_ape),
        by_mean_rank: ordered(|a| a.mean_rank),
    };
    (aggregate, ranking)
}

/// Test-year actuals and one model's forecast, in plot-ready form.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastTable {
    pub country: String,
    pub model: String,
    pub months: Vec<YearMonth>,
    pub actual: Vec<f64>,
    pub forecast: Vec<f64>,
}

impl ForecastTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("country,year,month,actual,forecast\n");
        for ((ym, a), f) in self.months.iter().zip(&self.actual).zip(&self.forecast) {
            let _ = writeln!(out, "{},{},{},{a},{f}", self.country, ym.year, ym.month);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceTable {
    pub country: String,
    pub model: String,
    pub points: Vec<TracePoint>,
}

impl TraceTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,param,cv_mape\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{},{}", p.n, p.param, p.error);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub report: EvaluationReport,
    pub forecasts: Vec<ForecastTable>,
    pub traces: Vec<TraceTable>,
}

struct CountryOutcome {
    report: CountryReport,
    forecasts: Vec<ForecastTable>,
    traces: Vec<TraceTable>,
    failures: Vec<Failure>,
}

fn coding_for(
    config: &RunConfig,
    table: Option<&CodingTable>,
    train: &MonthlyLoadSeries,
) -> Result<Option<CodingVariables>> {
    match &config.coding {
        CodingSource::History => Ok(None),
        CodingSource::External(_) => table
            .and_then(|t| t.get(train.country(), config.test_year))
            .map(Some)
            .ok_or_else(|| {
                Error::Missing(format!(
                    "coding variables for {} {}",
                    train.country(),
                    config.test_year
                ))
            }),
        CodingSource::Drift => Ok(Some(
            naive_coding_forecast(&yearly_coding_history(train), NaiveMethod::Drift)?.coding,
        )),
    }
}

fn tune_and_forecast(
    train: &MonthlyLoadSeries,
    kind: ModelKind,
    config: &RunConfig,
    coding: Option<CodingVariables>,
) -> Result<(Vec<f64>, TuningSummary, Vec<TracePoint>)> {
    let tuned = grid_search(train, &config.tuning_template(), kind, &config.grid)?;
    let spec = tuned.best_spec;
    let dataset = build_pairs(train, &spec)?;
    // the query window ends tau months before the first test month
    let end = train.len() + 1 - spec.tau;
    if end < spec.n {
        return Err(Error::InsufficientHistory {
            context: "query window".into(),
            required: spec.n + spec.tau - 1,
            available: train.len(),
        });
    }
    let forecast = forecast_with_dataset(
        &dataset,
        &train.values()[end - spec.n..end],
        &tuned.best_config,
        coding,
    )?;
    let summary = TuningSummary {
        n: spec.n,
        param: tuned.best_param,
        cv_error: tuned.cv_error,
        config: tuned.best_config,
    };
    Ok((forecast, summary, tuned.grid_trace))
}

fn evaluate_country(
    series: &MonthlyLoadSeries,
    config: &RunConfig,
    table: Option<&CodingTable>,
) -> CountryOutcome {
    let country = series.country();
    let mut out = CountryOutcome {
        report: CountryReport::default(),
        forecasts: Vec::new(),
        traces: Vec::new(),
        failures: Vec::new(),
    };
    let min_n = config
        .grid
        .n_values
        .iter()
        .copied()
        .min()
        .unwrap_or(config.encoding.n);
    let (train, test) = match split_train_test(
        series,
        config.test_year,
        config.encoding.with_n(min_n).min_series_len(),
    ) {
        Ok(split) => split,
        Err(e) => {
            out.failures.push(Failure::new(country, "split", &e));
            return out;
        }
    };
    let months: Vec<YearMonth> = (0..12).map(|i| test.month_at(i)).collect();
    let record = |name: String,
                  forecast: Vec<f64>,
                  tuning: Option<TuningSummary>,
                  out: &mut CountryOutcome| {
        match error_metrics(test.values(), &forecast) {
            Ok(metrics) => {
                out.report
                    .models
                    .insert(name.clone(), ModelEntry { metrics, tuning });
                out.forecasts.push(ForecastTable {
                    country: country.to_string(),
                    model: name,
                    months: months.clone(),
                    actual: test.values().to_vec(),
                    forecast,
                });
            }
            Err(e) => out.failures.push(Failure::new(country, &name, &e)),
        }
    };

    match assumption_test(&train, &config.encoding) {
        Ok((_, result)) => out.report.assumption = Some(result),
        Err(e) => out.failures.push(Failure::new(country, "assumption", &e)),
    }
    match seasonal_naive(&train, 12) {
        Ok(f) => record(BASELINE.to_string(), f, None, &mut out),
        Err(e) => out.failures.push(Failure::new(country, BASELINE, &e)),
    }
    let coding = match coding_for(config, table, &train) {
        Ok(c) => c,
        Err(e) => {
            out.failures.push(Failure::new(country, "coding", &e));
            return out;
        }
    };
    for &kind in &config.models {
        let name = format!("{}{}", kind.name(), config.coding.suffix());
        match tune_and_forecast(&train, kind, config, coding) {
            Ok((forecast, tuning, trace)) => {
                out.traces.push(TraceTable {
                    country: country.to_string(),
                    model: name.clone(),
                    points: trace,
                });
                record(name, forecast, Some(tuning), &mut out);
            }
            Err(e) => out.failures.push(Failure::new(country, &name, &e)),
        }
    }
    out
}

/// Tunes every model on each country's training years, forecasts the test
/// year and scores it. Nothing is written to disk.
pub fn evaluate_corpus(collection: &SeriesCollection, config: &RunConfig) -> Result<RunOutcome> {
    config.encoding.validate()?;
    config.grid.validate()?;
    if config.encoding.m != 12 {
        return Err(invalid(format!(
            "test-year forecasts need m = 12, got {}",
            config.encoding.m
        )));
    }
    let table = match &config.coding {
        CodingSource::External(path) => Some(load_coding_csv(path)?),
        _ => None,
    };
    let series: Vec<&MonthlyLoadSeries> = collection.iter().collect();
    let outcomes: Vec<CountryOutcome> = config.pool()?.install(|| {
        series
            .par_iter()
            .map(|s| evaluate_country(s, config, table.as_ref()))
            .collect()
    });

    let mut per_country = BTreeMap::new();
    let mut failures = Vec::new();
    let mut forecasts = Vec::new();
    let mut traces = Vec::new();
    for (s, o) in series.iter().zip(outcomes) {
        if !o.report.models.is_empty() || o.report.assumption.is_some() {
            per_country.insert(s.country().to_string(), o.report);
        }
        failures.extend(o.failures);
        forecasts.extend(o.forecasts);
        traces.extend(o.traces);
    }
    Ok(RunOutcome {
        report: EvaluationReport::from_countries(config.test_year, per_country, failures),
        forecasts,
        traces,
    })
}

/// Writes `report.json`, `forecasts/<country>_<model>.csv` and
/// `traces/<country>_<model>.csv` under `dir`.
pub fn write_outcome(outcome: &RunOutcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir.join("forecasts"))?;
    std::fs::create_dir_all(dir.join("traces"))?;
    std::fs::write(dir.join("report.json"), outcome.report.to_json()?)?;
    for f in &outcome.forecasts {
        std::fs::write(
            dir.join("forecasts")
                .join(format!("{}_{}.csv", f.country, f.model)),
            f.to_csv(),
        )?;
    }
    for t in &outcome.traces {
        std::fs::write(
            dir.join("traces")
                .join(format!("{}_{}.csv", t.country, t.model)),
            t.to_csv(),
        )?;
    }
    Ok(())
}

pub fn cmd_tune_forecast(collection: &SeriesCollection, config: &RunConfig) -> Result<RunOutcome> {
    let outcome = evaluate_corpus(collection, config)?;
    write_outcome(&outcome, &config.output_dir)?;
    Ok(outcome)
}

// --- rank -------------------------------------------------------------------

/// Merges several reports (for example one per coding variant) and ranks all
/// their models together.
pub fn cmd_rank(reports: &[EvaluationReport]) -> Result<EvaluationReport> {
    let first = reports.first().ok_or(Error::Empty)?;
    let mut per_country: BTreeMap<String, CountryReport> = BTreeMap::new();
    let mut failures = Vec::new();
    for r in reports {
        for (country, cr) in &r.per_country {
            let merged = per_country.entry(country.clone()).or_default();
            if merged.assumption.is_none() {
                merged.assumption.clone_from(&cr.assumption);
            }
            for (model, entry) in &cr.models {
                if model == BASELINE && merged.models.get(model) == Some(entry) {
                    continue;
                }
                if merged.models.insert(model.clone(), entry.clone()).is_some() {
                    return Err(invalid(format!(
                        "model {model} appears twice for {country}"
                    )));
                }
            }
        }
        failures.extend(r.failures.iter().cloned());
    }
    Ok(EvaluationReport::from_countries(
        first.test_year,
        per_country,
        failures,
    ))
}

/// One line per model: aggregates and its position under both rankings.
pub fn rank_table_csv(report: &EvaluationReport) -> String {
    let position =
        |list: &[String], name: &str| list.iter().position(|m| m == name).map_or(0, |p| p + 1);
    let mut out = String::from(
        "model,countries,median_ape,mape,iqr_ape,rmse,mean_rank,rank_median_ape,rank_mean_rank\n",
    );
    for name in &report.ranking.by_median_ape {
        let a = &report.aggregate[name];
        let _ = writeln!(
            out,
            "{name},{},{},{},{},{},{},{},{}",
            a.countries,
            a.median_ape,
            a.mape,
            a.iqr_ape,
            a.rmse,
            a.mean_rank,
            position(&report.ranking.by_median_ape, name),
            position(&report.ranking.by_mean_rank, name),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(mape: f64) -> ModelEntry {
        ModelEntry {
            metrics: MetricsReport {
                median_ape: mape,
                mape,
                iqr_ape: 1.0,
                rmse: 10.0 * mape,
            },
            tuning: None,
        }
    }

    fn report(rows: &[(&str, &[(&str, f64)])]) -> EvaluationReport {
        let per_country = rows
            .iter()
            .map(|(c, models)| {
                let models = models
                    .iter()
                    .map(|(m, v)| (m.to_string(), entry(*v)))
                    .collect();
                (
                    c.to_string(),
                    CountryReport {
                        assumption: None,
                        models,
                    },
                )
            })
            .collect();
        EvaluationReport::from_countries(2014, per_country, Vec::new())
    }

    #[test]
    fn drift_and_last() {
        let h = [
            CodingVariables {
                mean: 100.0,
                dispersion: 10.0,
            },
            CodingVariables {
                mean: 110.0,
                dispersion: 4.0,
            },
        ];
        let d = naive_coding_forecast(&h, NaiveMethod::Drift).unwrap();
        assert_eq!(d.coding.mean, 120.0);
        assert_eq!(d.coding.dispersion, 0.0);
        assert!(d.clamped);
        let l = naive_coding_forecast(&h[..1], NaiveMethod::Last).unwrap();
        assert_eq!(l.coding.mean, 100.0);
        assert!(!l.clamped);
        assert!(naive_coding_forecast(&h[..1], NaiveMethod::Drift).is_err());
        assert!(naive_coding_forecast(&[], NaiveMethod::Last).is_err());
    }

    #[test]
    fn yearly_history_uses_whole_years() {
        let s = MonthlyLoadSeries::new(
            "X",
            YearMonth::new(2000, 7).unwrap(),
            (1..=30).map(f64::from).collect(),
        )
        .unwrap();
        let h = yearly_coding_history(&s);
        // Jul 2000 .. Dec 2002: 2001 and 2002 are complete
        assert_eq!(h.len(), 2);
        assert_eq!(h[0].mean, (7..=18).sum::<i32>() as f64 / 12.0);
    }

    #[test]
    fn coding_source_parsing() {
        assert_eq!(
            "history".parse::<CodingSource>().unwrap(),
            CodingSource::History
        );
        assert_eq!(
            "drift".parse::<CodingSource>().unwrap(),
            CodingSource::Drift
        );
        assert_eq!(
            "external:c.csv".parse::<CodingSource>().unwrap(),
            CodingSource::External("c.csv".into())
        );
        assert!("external:".parse::<CodingSource>().is_err());
        assert!("arima".parse::<CodingSource>().is_err());
    }

    #[test]
    fn mid_rank_ties() {
        assert_eq!(mid_ranks(&[3.0, 1.0, 2.0]), vec![3.0, 1.0, 2.0]);
        assert_eq!(mid_ranks(&[1.0, 1.0, 5.0]), vec![1.5, 1.5, 3.0]);
    }

    #[test]
    fn single_model_ranks_first() {
        let r = report(&[("A", &[("knn", 3.0)])]);
        assert_eq!(r.ranking.by_median_ape, vec!["knn"]);
        assert_eq!(r.aggregate["knn"].mean_rank, 1.0);
    }

    #[test]
    fn dominant_model_ranks_first_under_both_rules() {
        let r = report(&[
            ("A", &[("good", 1.0), ("bad", 2.0)]),
            ("B", &[("good", 4.0), ("bad", 9.0)]),
        ]);
        assert_eq!(r.ranking.by_median_ape, vec!["good", "bad"]);
        assert_eq!(r.ranking.by_mean_rank, vec!["good", "bad"]);
        assert_eq!(r.aggregate["good"].mean_rank, 1.0);
        assert_eq!(r.aggregate["bad"].mean_rank, 2.0);
        assert_eq!(r.aggregate["good"].mape, 2.5);
    }

    #[test]
    fn tie_shares_rank() {
        let r = report(&[
            ("A", &[("x", 1.0), ("y", 1.0)]),
            ("B", &[("x", 1.0), ("y", 2.0)]),
        ]);
        assert_eq!(r.aggregate["x"].mean_rank, (1.5 + 1.0) / 2.0);
        assert_eq!(r.aggregate["y"].mean_rank, (1.5 + 2.0) / 2.0);
    }

    #[test]
    fn aggregate_recomputes_exactly() {
        let r = report(&[
            ("A", &[("x", 1.3), ("y", 0.7)]),
            ("B", &[("x", 2.9)]),
            ("C", &[("y", 4.1), ("x", 0.2)]),
        ]);
        let (agg, ranking) = summarize(&r.per_country);
        assert_eq!(agg, r.aggregate);
        assert_eq!(ranking, r.ranking);
        assert_eq!(r.aggregate["x"].countries, 3);
        assert_eq!(r.aggregate["y"].countries, 2);
    }

    #[test]
    fn rank_merges_reports() {
        let a = report(&[("A", &[("knn", 3.0), ("snaive", 5.0)])]);
        let b = report(&[("A", &[("knn+drift", 2.0), ("snaive", 5.0)])]);
        let merged = cmd_rank(&[a.clone(), b]).unwrap();
        assert_eq!(
            merged.ranking.by_median_ape,
            vec!["knn+drift", "knn", "snaive"]
        );
        assert!(cmd_rank(&[a.clone(), a]).is_err());
        assert!(cmd_rank(&[]).is_err());
        let csv = rank_table_csv(&merged);
        assert!(csv.lines().nth(1).unwrap().starts_with("knn+drift,1,"));
    }
}
