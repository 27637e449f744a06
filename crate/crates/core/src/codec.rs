//! Pattern encoding of seasonal sequences.
//!
//! An input window `X_i` of `n` months ending at index `i` becomes an
//! x-pattern; the window `Y_i` of `m` months starting `tau` months later
//! becomes a y-pattern. Both are normalized by a mean and a dispersion (the
//! coding variables), and a forecast y-pattern is mapped back to demand with
//! the inverse transform.
//!
//! Dispersion is the root of the *sum* of squared deviations, so a
//! standardized pattern has zero mean and unit Euclidean norm.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::series::MonthlyLoadSeries;

/// Relative tolerance below which a dispersion counts as zero.
const FLAT_TOL: f64 = 1e-10;

/// How raw demands map to pattern components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternDefinition {
    /// `E`
    Raw,
    /// `E - mean`
    Centered,
    /// `E / mean`
    Ratio,
    /// `(E - mean) / D`
    Standardized,
}

impl std::str::FromStr for PatternDefinition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "raw" => Ok(Self::Raw),
            "centered" => Ok(Self::Centered),
            "ratio" => Ok(Self::Ratio),
            "standardized" => Ok(Self::Standardized),
            other => Err(invalid(format!("unknown pattern definition {other:?}"))),
        }
    }
}

/// Where the y-pattern coding variables come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodingMode {
    /// Mean and dispersion of the input window `X_i`.
    History,
    /// Mean and dispersion of the output window `Y_i`. Known for training
    /// pairs; for a forecast they must be supplied (predicted) by the caller.
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodingSpec {
    pub x_definition: PatternDefinition,
    pub y_definition: PatternDefinition,
    /// x-pattern length
    pub n: usize,
    /// y-pattern length
    pub m: usize,
    /// forecast horizon in months
    pub tau: usize,
    pub coding_mode: CodingMode,
}

impl Default for EncodingSpec {
    fn default() -> Self {
        Self {
            x_definition: PatternDefinition::Standardized,
            y_definition: PatternDefinition::Standardized,
            n: 12,
            m: 12,
            tau: 1,
            coding_mode: CodingMode::History,
        }
    }
}

impl EncodingSpec {
    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 || self.tau == 0 {
            return Err(invalid(format!(
                "n, m and tau must be >= 1 (n={}, m={}, tau={})",
                self.n, self.m, self.tau
            )));
        }
        Ok(())
    }

    /// Shortest series that yields one pattern pair.
    pub fn min_series_len(&self) -> usize {
        self.n + self.tau + self.m - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodingVariables {
    pub mean: f64,
    pub dispersion: f64,
}

impl CodingVariables {
    pub fn new(mean: f64, dispersion: f64) -> Result<Self> {
        if !mean.is_finite() || !dispersion.is_finite() {
            return Err(Error::NonFinite("coding variables"));
        }
        if dispersion < 0.0 {
            return Err(invalid(format!(
                "dispersion must be >= 0, got {dispersion}"
            )));
        }
        Ok(Self { mean, dispersion })
    }

    /// Mean and root-sum-square deviation of `window`.
    pub fn of_window(window: &[f64]) -> Self {
        let mean = window.iter().sum::<f64>() / window.len() as f64;
        let dispersion = window
            .iter()
            .map(|e| (e - mean).powi(2))
            .sum::<f64>()
            .sqrt();
        Self { mean, dispersion }
    }

    /// True when `definition` cannot be applied with these variables.
    pub fn is_degenerate_for(&self, definition: PatternDefinition) -> bool {
        match definition {
            PatternDefinition::Raw | PatternDefinition::Centered => false,
            PatternDefinition::Ratio => self.mean == 0.0,
            PatternDefinition::Standardized => self.dispersion <= FLAT_TOL * self.mean.abs(),
        }
    }
}

/// An encoded input window.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedWindow {
    pub pattern: Vec<f64>,
    pub coding: CodingVariables,
    /// Set when the window is flat under the chosen definition and the
    /// constant fallback pattern was emitted.
    pub degenerate: bool,
}

fn check_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

fn apply(
    values: &[f64],
    coding: &CodingVariables,
    definition: PatternDefinition,
) -> (Vec<f64>, bool) {
    if coding.is_degenerate_for(definition) {
        let fill = if definition == PatternDefinition::Ratio {
            1.0
        } else {
            0.0
        };
        return (vec![fill; values.len()], true);
    }
    let CodingVariables { mean, dispersion } = *coding;
    let pattern = match definition {
        PatternDefinition::Raw => values.to_vec(),
        PatternDefinition::Centered => values.iter().map(|e| e - mean).collect(),
        PatternDefinition::Ratio => values.iter().map(|e| e / mean).collect(),
        PatternDefinition::Standardized => values.iter().map(|e| (e - mean) / dispersion).collect(),
    };
    (pattern, false)
}

/// Encodes an input window of length `spec.n`.
pub fn encode_x(window: &[f64], spec: &EncodingSpec) -> Result<EncodedWindow> {
    if window.len() != spec.n {
        return Err(Error::LengthMismatch {
            expected: spec.n,
            actual: window.len(),
        });
    }
    check_finite(window, "x window")?;
    let coding = CodingVariables::of_window(window);
    let (pattern, degenerate) = apply(window, &coding, spec.x_definition);
    Ok(EncodedWindow {
        pattern,
        coding,
        degenerate,
    })
}

/// Encodes an output window of length `spec.m` using the supplied coding
/// variables (they are not recomputed from the window).
pub fn encode_y(window: &[f64], coding: &CodingVariables, spec: &EncodingSpec) -> Result<Vec<f64>> {
    if window.len() != spec.m {
        return Err(Error::LengthMismatch {
            expected: spec.m,
            actual: window.len(),
        });
    }
    check_finite(window, "y window")?;
    Ok(apply(window, coding, spec.y_definition).0)
}

fn invert(pattern: &[f64], coding: &CodingVariables, definition: PatternDefinition) -> Vec<f64> {
    let CodingVariables { mean, dispersion } = *coding;
    if coding.is_degenerate_for(definition) {
        return vec![mean; pattern.len()];
    }
    match definition {
        PatternDefinition::Raw => pattern.to_vec(),
        PatternDefinition::Centered => pattern.iter().map(|y| y + mean).collect(),
        PatternDefinition::Ratio => pattern.iter().map(|y| y * mean).collect(),
        PatternDefinition::Standardized => pattern.iter().map(|y| y * dispersion + mean).collect(),
    }
}

/// Inverse of [`encode_y`]. Under degenerate coding variables every month
/// decodes to the coding mean.
pub fn decode_y(
    pattern: &[f64],
    coding: &CodingVariables,
    spec: &EncodingSpec,
) -> Result<Vec<f64>> {
    if pattern.len() != spec.m {
        return Err(Error::LengthMismatch {
            expected: spec.m,
            actual: pattern.len(),
        });
    }
    check_finite(pattern, "y pattern")?;
    Ok(invert(pattern, coding, spec.y_definition))
}

/// Inverse of [`encode_x`], given the window's coding variables.
pub fn decode_x(
    pattern: &[f64],
    coding: &CodingVariables,
    spec: &EncodingSpec,
) -> Result<Vec<f64>> {
    if pattern.len() != spec.n {
        return Err(Error::LengthMismatch {
            expected: spec.n,
            actual: pattern.len(),
        });
    }
    check_finite(pattern, "x pattern")?;
    Ok(invert(pattern, coding, spec.x_definition))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternPair {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub x_coding: CodingVariables,
    pub y_coding: CodingVariables,
    /// Index of the last month of the input window in the source series.
    pub anchor_index: usize,
    pub degenerate: bool,
}

/// The training set of paired x/y patterns for one series.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternDataset {
    pairs: Vec<PatternPair>,
    spec: EncodingSpec,
    source_id: String,
}

impl PatternDataset {
    /// Assembles a dataset from ready-made pairs, checking pattern lengths.
    pub fn new(
        pairs: Vec<PatternPair>,
        spec: EncodingSpec,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        spec.validate()?;
        for p in &pairs {
            if p.x.len() != spec.n {
                return Err(Error::LengthMismatch {
                    expected: spec.n,
                    actual: p.x.len(),
                });
            }
            if p.y.len() != spec.m {
                return Err(Error::LengthMismatch {
                    expected: spec.m,
                    actual: p.y.len(),
                });
            }
        }
        Ok(Self {
            pairs,
            spec,
            source_id: source_id.into(),
        })
    }

    pub fn pairs(&self) -> &[PatternPair] {
        &self.pairs
    }

    pub fn spec(&self) -> &EncodingSpec {
        &self.spec
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    /// Number of pairs, `N`.
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Copy of the dataset with pair `index` removed.
    pub fn without(&self, index: usize) -> Self {
        let mut pairs = self.pairs.clone();
        pairs.remove(index);
        Self {
            pairs,
            spec: self.spec,
            source_id: self.source_id.clone(),
        }
    }
}

/// Builds all pattern pairs of `values`, advancing the windows one month at a
/// time. Yields `L - n - m - tau + 2` pairs.
pub fn build_pairs_from_values(
    values: &[f64],
    spec: &EncodingSpec,
    source_id: &str,
) -> Result<PatternDataset> {
    spec.validate()?;
    let len = values.len();
    if len < spec.min_series_len() {
        return Err(Error::InsufficientHistory {
            context: format!(
                "{source_id} pattern pairs (n={}, m={}, tau={})",
                spec.n, spec.m, spec.tau
            ),
            required: spec.min_series_len(),
            available: len,
        });
    }
    let mut pairs = Vec::with_capacity(len + 2 - spec.n - spec.m - spec.tau);
    for anchor in spec.n - 1..=len - spec.tau - spec.m {
        let x_window = &values[anchor + 1 - spec.n..=anchor];
        let y_start = anchor + spec.tau;
        let y_window = &values[y_start..y_start + spec.m];
        let enc = encode_x(x_window, spec)?;
        let y_coding = match spec.coding_mode {
            CodingMode::History => enc.coding,
            CodingMode::External => CodingVariables::of_window(y_window),
        };
        let y = encode_y(y_window, &y_coding, spec)?;
        pairs.push(PatternPair {
            x: enc.pattern,
            y,
            x_coding: enc.coding,
            y_coding,
            anchor_index: anchor,
            degenerate: enc.degenerate || y_coding.is_degenerate_for(spec.y_definition),
        });
    }
    PatternDataset::new(pairs, *spec, source_id)
}

pub fn build_pairs(series: &MonthlyLoadSeries, spec: &EncodingSpec) -> Result<PatternDataset> {
    build_pairs_from_values(series.values(), spec, series.country())
}

/// Forecasted coding variables for a target year, keyed by `(country, year)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CodingTable {
    entries: BTreeMap<(String, i32), CodingVariables>,
}

impl CodingTable {
    pub fn insert(&mut self, country: impl Into<String>, year: i32, coding: CodingVariables) {
        self.entries.insert((country.into(), year), coding);
    }

    pub fn get(&self, country: &str, year: i32) -> Option<CodingVariables> {
        self.entries.get(&(country.to_string(), year)).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub const CODING_CSV_HEADER: [&str; 4] = ["country", "year", "mean_mwh", "dispersion_mwh"];

/// Reads a `country,year,mean_mwh,dispersion_mwh` file.
pub fn read_coding_csv<R: Read>(reader: R) -> Result<CodingTable> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers != CODING_CSV_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {}", CODING_CSV_HEADER.join(",")),
        });
    }
    let mut table = CodingTable::default();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).map(str::trim).unwrap_or("");
        let bad = |what: &str| Error::Parse {
            line,
            message: format!("cannot parse {what}"),
        };
        let year: i32 = field(1).parse().map_err(|_| bad("year"))?;
        let mean: f64 = field(2).parse().map_err(|_| bad("mean_mwh"))?;
        let dispersion: f64 = field(3).parse().map_err(|_| bad("dispersion_mwh"))?;
        let coding = CodingVariables::new(mean, dispersion).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        table.insert(field(0), year, coding);
    }
    Ok(table)
}

pub fn load_coding_csv(path: impl AsRef<Path>) -> Result<CodingTable> {
    read_coding_csv(std::fs::File::open(path)?)
}
