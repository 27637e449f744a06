//! Monthly demand series: ingestion, validation and train/test splitting.
//!
//! The on-disk format is a plain CSV with header `country,year,month,demand_mwh`,
//! one row per observation. Series must be gap-free; missing months are hard
//! errors rather than being imputed.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 4] = ["country", "year", "month", "demand_mwh"];

/// A calendar month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct YearMonth {
    pub year: i32,
    /// 1..=12
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::InvalidParameter(format!(
                "month {month} outside 1..=12"
            )));
        }
        Ok(Self { year, month })
    }

    fn ordinal(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    fn from_ordinal(ord: i64) -> Self {
        Self {
            year: ord.div_euclid(12) as i32,
            month: (ord.rem_euclid(12) + 1) as u32,
        }
    }

    /// The month `offset` months later (or earlier, if negative).
    pub fn add_months(self, offset: i64) -> Self {
        Self::from_ordinal(self.ordinal() + offset)
    }

    /// Signed number of months from `self` to `other`.
    pub fn months_until(self, other: YearMonth) -> i64 {
        other.ordinal() - self.ordinal()
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{:02}", self.year, self.month)
    }
}

/// One country's contiguous monthly demand history (MWh).
///
/// Stored as a start month plus a dense vector, so the no-gap invariant holds
/// by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthlyLoadSeries {
    country: String,
    start: YearMonth,
    demand: Vec<f64>,
}

impl MonthlyLoadSeries {
    pub fn new(country: impl Into<String>, start: YearMonth, demand: Vec<f64>) -> Result<Self> {
        let country = country.into();
        if demand.is_empty() {
            return Err(Error::Empty);
        }
        for (i, &value) in demand.iter().enumerate() {
            if !value.is_finite() || value <= 0.0 {
                let at = start.add_months(i as i64);
                return Err(Error::InvalidDemand {
                    country,
                    year: at.year,
                    month: at.month,
                    value,
                });
            }
        }
        Ok(Self {
            country,
            start,
            demand,
        })
    }

    pub fn country(&self) -> &str {
        &self.country
    }

    pub fn start(&self) -> YearMonth {
        self.start
    }

    /// Last observed month.
    pub fn end(&self) -> YearMonth {
        self.start.add_months(self.demand.len() as i64 - 1)
    }

    pub fn len(&self) -> usize {
        self.demand.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demand.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.demand
    }

    pub fn month_at(&self, index: usize) -> YearMonth {
        self.start.add_months(index as i64)
    }

    /// Position of `ym` in the series, if observed.
    pub fn index_of(&self, ym: YearMonth) -> Option<usize> {
        let offset = self.start.months_until(ym);
        (offset >= 0 && (offset as usize) < self.demand.len()).then_some(offset as usize)
    }

    pub fn observations(&self) -> impl Iterator<Item = (YearMonth, f64)> + '_ {
        self.demand
            .iter()
            .enumerate()
            .map(|(i, &v)| (self.month_at(i), v))
    }

    /// Sub-series covering indices `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.demand.len() {
            return Err(Error::InvalidParameter(format!(
                "slice {}..{} of series with {} months",
                range.start,
                range.end,
                self.demand.len()
            )));
        }
        Ok(Self {
            country: self.country.clone(),
            start: self.month_at(range.start),
            demand: self.demand[range].to_vec(),
        })
    }
}

/// Series keyed by country code, iterated in code order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SeriesCollection {
    series: BTreeMap<String, MonthlyLoadSeries>,
}

impl SeriesCollection {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, series: MonthlyLoadSeries) -> Result<()> {
        if self.series.contains_key(series.country()) {
            return Err(Error::DuplicateCountry(series.country().to_string()));
        }
        self.series.insert(series.country().to_string(), series);
        Ok(())
    }

    pub fn get(&self, country: &str) -> Option<&MonthlyLoadSeries> {
        self.series.get(country)
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &MonthlyLoadSeries> {
        self.series.values()
    }

    pub fn countries(&self) -> impl Iterator<Item = &str> {
        self.series.keys().map(String::as_str)
    }
}

impl FromIterator<MonthlyLoadSeries> for Result<SeriesCollection> {
    fn from_iter<I: IntoIterator<Item = MonthlyLoadSeries>>(iter: I) -> Self {
        let mut out = SeriesCollection::new();
        for s in iter {
            out.insert(s)?;
        }
        Ok(out)
    }
}

fn parse_field<T: std::str::FromStr>(
    record: &csv::StringRecord,
    idx: usize,
    line: u64,
) -> Result<T> {
    let raw = record.get(idx).ok_or_else(|| Error::Parse {
        line,
        message: format!("expected 4 fields, got {}", record.len()),
    })?;
    raw.trim().parse::<T>().map_err(|_| Error::Parse {
        line,
        message: format!("cannot parse {} from {raw:?}", CSV_HEADER[idx]),
    })
}

type RawRows = BTreeMap<String, Vec<(YearMonth, f64)>>;

fn read_rows<R: Read>(reader: R) -> Result<RawRows> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let names: Vec<&str> = headers.iter().map(str::trim).collect();
    if names != CSV_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {}", CSV_HEADER.join(",")),
        });
    }

    let mut rows = RawRows::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 4 {
            return Err(Error::Parse {
                line,
                message: format!("expected 4 fields, got {}", record.len()),
            });
        }
        let country: String = parse_field(&record, 0, line)?;
        if country.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty country code".into(),
            });
        }
        let year: i32 = parse_field(&record, 1, line)?;
        let month: u32 = parse_field(&record, 2, line)?;
        let demand: f64 = parse_field(&record, 3, line)?;
        let ym = YearMonth::new(year, month).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        rows.entry(country).or_default().push((ym, demand));
    }
    if rows.is_empty() {
        return Err(Error::Empty);
    }
    Ok(rows)
}

/// Sorts one country's rows and checks them. Returns the series, or every
/// problem found.
fn assemble(
    country: String,
    mut obs: Vec<(YearMonth, f64)>,
) -> std::result::Result<MonthlyLoadSeries, Vec<Error>> {
    obs.sort_by_key(|&(ym, _)| ym);
    let mut problems = Vec::new();
    for w in obs.windows(2) {
        let (prev, next) = (w[0].0, w[1].0);
        if prev == next {
            problems.push(Error::DuplicateObservation {
                country: country.clone(),
                year: next.year,
                month: next.month,
            });
        } else if prev.months_until(next) != 1 {
            let missing = prev.add_months(1);
            problems.push(Error::Gap {
                country: country.clone(),
                year: missing.year,
                month: missing.month,
            });
        }
    }
    for &(ym, value) in &obs {
        if !value.is_finite() || value <= 0.0 {
            problems.push(Error::InvalidDemand {
                country: country.clone(),
                year: ym.year,
                month: ym.month,
                value,
            });
        }
    }
    if !problems.is_empty() {
        return Err(problems);
    }
    let start = obs[0].0;
    MonthlyLoadSeries::new(country, start, obs.into_iter().map(|(_, v)| v).collect())
        .map_err(|e| vec![e])
}

/// Reads a collection from CSV text. Rows may appear in any order.
pub fn read_csv<R: Read>(reader: R) -> Result<SeriesCollection> {
    let mut out = SeriesCollection::new();
    for (country, obs) in read_rows(reader)? {
        let series = assemble(country, obs).map_err(|mut errs| errs.swap_remove(0))?;
        out.insert(series)?;
    }
    Ok(out)
}

/// Per-country outcome of [`inspect_csv`].
#[derive(Debug)]
pub struct CountryCheck {
    pub country: String,
    pub months: usize,
    pub first: YearMonth,
    pub last: YearMonth,
    pub problems: Vec<Error>,
}

impl CountryCheck {
    pub fn is_valid(&self) -> bool {
        self.problems.is_empty()
    }
}

/// Like [`read_csv`] but reports every problem of every country instead of
/// stopping at the first. Malformed rows still abort.
pub fn inspect_csv<R: Read>(reader: R) -> Result<Vec<CountryCheck>> {
    Ok(read_rows(reader)?
        .into_iter()
        .map(|(country, obs)| {
            let months = obs.len();
            let first = obs.iter().map(|o| o.0).min().expect("nonempty");
            let last = obs.iter().map(|o| o.0).max().expect("nonempty");
            let problems = assemble(country.clone(), obs).err().unwrap_or_default();
            CountryCheck {
                country,
                months,
                first,
                last,
                problems,
            }
        })
        .collect())
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<SeriesCollection> {
    read_csv(std::fs::File::open(path)?)
}

/// Writes the collection in the same format `read_csv` accepts. Demand values
/// use the shortest round-trip representation, so reloading is exact.
pub fn write_csv<W: Write>(collection: &SeriesCollection, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(CSV_HEADER)?;
    for s in collection.iter() {
        for (ym, v) in s.observations() {
            wtr.write_record([
                s.country().to_string(),
                ym.year.to_string(),
                ym.month.to_string(),
                v.to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_csv(collection: &SeriesCollection, path: impl AsRef<Path>) -> Result<()> {
    write_csv(collection, std::fs::File::create(path)?)
}

/// Splits off the twelve months of `test_year` as the test set; everything
/// before January of that year is training data. Months after the test year
/// are dropped.
///
/// `min_history` is the number of training months the caller needs, usually
/// `n + m + tau - 1` for the encoding in use.
pub fn split_train_test(
    series: &MonthlyLoadSeries,
    test_year: i32,
    min_history: usize,
) -> Result<(MonthlyLoadSeries, MonthlyLoadSeries)> {
    let jan = YearMonth {
        year: test_year,
        month: 1,
    };
    let dec = YearMonth {
        year: test_year,
        month: 12,
    };
    let (Some(first), Some(last)) = (series.index_of(jan), series.index_of(dec)) else {
        return Err(Error::InsufficientHistory {
            context: format!("{} test year {test_year}", series.country()),
            required: 12,
            available: series
                .observations()
                .filter(|(ym, _)| ym.year == test_year)
                .count(),
        });
    };
    if first < min_history.max(1) {
        return Err(Error::InsufficientHistory {
            context: format!("{} training months before {test_year}", series.country()),
            required: min_history.max(1),
            available: first,
        });
    }
    Ok((series.slice(0..first)?, series.slice(first..last + 1)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<SeriesCollection> {
        read_csv(text.as_bytes())
    }

    fn ym(year: i32, month: u32) -> YearMonth {
        YearMonth::new(year, month).unwrap()
    }

    #[test]
    fn minimal_file_loads() {
        let c = parse("country,year,month,demand_mwh\nDE,2010,1,40000\nDE,2010,2,38000\n").unwrap();
        assert_eq!(c.len(), 1);
        let de = c.get("DE").unwrap();
        assert_eq!(de.len(), 2);
        assert_eq!(de.values(), &[40000.0, 38000.0]);
    }

    #[test]
    fn rows_are_sorted() {
        let c = parse("country,year,month,demand_mwh\nPL,2011,1,3\nPL,2010,12,2\nPL,2010,11,1\n")
            .unwrap();
        let pl = c.get("PL").unwrap();
        assert_eq!(pl.start(), ym(2010, 11));
        assert_eq!(pl.values(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn gap_is_reported() {
        let err =
            parse("country,year,month,demand_mwh\nDE,2010,1,40000\nDE,2010,3,39000\n").unwrap_err();
        assert_eq!(err.to_string(), "DE missing 2010-02");
    }

    #[test]
    fn non_positive_demand_rejected() {
        let err = parse("country,year,month,demand_mwh\nDE,2010,1,-5\n").unwrap_err();
        assert!(matches!(err, Error::InvalidDemand { .. }), "{err}");
    }

    #[test]
    fn duplicate_rejected() {
        let err = parse("country,year,month,demand_mwh\nDE,2010,1,1\nDE,2010,1,2\n").unwrap_err();
        assert!(matches!(err, Error::DuplicateObservation { .. }));
    }

    #[test]
    fn parse_error_names_line() {
        let err = parse("country,year,month,demand_mwh\nDE,2010,1,1\nDE,2010,x,2\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
        // comma decimal separators are not accepted
        assert!(parse("country,year,month,demand_mwh\nDE,2010,1,\"1,5\"\n").is_err());
    }

    #[test]
    fn empty_file_rejected() {
        assert!(parse("").is_err());
        assert!(matches!(
            parse("country,year,month,demand_mwh\n").unwrap_err(),
            Error::Empty
        ));
    }

    #[test]
    fn inspect_reports_every_country() {
        let text = "country,year,month,demand_mwh\nDE,2010,1,1\nDE,2010,3,1\nPL,2010,1,2\nPL,2010,2,2\nFR,2010,1,0\n";
        let checks = inspect_csv(text.as_bytes()).unwrap();
        assert_eq!(checks.len(), 3);
        let by: BTreeMap<_, _> = checks.iter().map(|c| (c.country.as_str(), c)).collect();
        assert_eq!(by["DE"].problems[0].to_string(), "DE missing 2010-02");
        assert!(by["PL"].is_valid());
        assert_eq!(by["PL"].months, 2);
        assert!(!by["FR"].is_valid());
    }

    #[test]
    fn split_two_years() {
        let s =
            MonthlyLoadSeries::new("DE", ym(2012, 1), (1..=24).map(f64::from).collect()).unwrap();
        let (train, test) = split_train_test(&s, 2013, 12).unwrap();
        assert_eq!(train.len(), 12);
        assert_eq!(test.len(), 12);
        assert_eq!(test.start(), ym(2013, 1));
        assert_eq!(train.end(), ym(2012, 12));
    }

    #[test]
    fn split_incomplete_test_year() {
        let s = MonthlyLoadSeries::new("DE", ym(2012, 1), vec![1.0; 18]).unwrap();
        assert!(split_train_test(&s, 2013, 1).is_err());
    }

    #[test]
    fn split_longest_corpus_series() {
        let s = MonthlyLoadSeries::new("DE", ym(1991, 1), vec![1.0; 288]).unwrap();
        let (train, test) = split_train_test(&s, 2014, 24).unwrap();
        assert_eq!(train.len(), 276);
        assert_eq!(test.len(), 12);
    }

    #[test]
    fn split_insufficient_history_states_minimum() {
        let s = MonthlyLoadSeries::new("DE", ym(2012, 1), vec![1.0; 24]).unwrap();
        let err = split_train_test(&s, 2013, 24).unwrap_err();
        assert!(err.to_string().contains("at least 24"), "{err}");
    }

    #[test]
    fn year_month_arithmetic() {
        assert_eq!(ym(2010, 12).add_months(1), ym(2011, 1));
        assert_eq!(ym(2010, 1).add_months(-1), ym(2009, 12));
        assert_eq!(ym(2010, 3).months_until(ym(2011, 2)), 11);
    }
}
