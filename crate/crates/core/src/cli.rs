//! Command-line front end: `psfm validate | assumption | forecast | rank`.
//!
//! Options may also come from a TOML file passed with `--config`, using the
//! flag names as keys (`test-year = 2014`, `grid-k = "1..20"`). Flags given on
//! the command line win. Exit codes: 0 success, 1 invalid input, 2 failure
//! while running.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::bench::{
    cmd_assumption, cmd_rank, cmd_tune_forecast, cmd_validate, rank_table_csv, CodingSource,
    EvaluationReport, Failure, RunConfig, SyntheticSource,
};
use crate::codec::EncodingSpec;
use crate::error::{invalid, Error, Result};
use crate::models::ModelKind;
use crate::tuner::GridSpec;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "psfm",
    version,
    about = "Pattern similarity-based forecasting of monthly demand"
)]
struct Cli {
    /// TOML file with option defaults
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a series CSV for gaps, duplicates and bad values
    Validate(Options),
    /// Chi-squared test of the similarity assumption per country
    Assumption(Options),
    /// Tune, forecast the test year and score every model
    Forecast(Options),
    /// Merge report.json files and rank their models
    Rank(RankArgs),
}

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct Options {
    /// Series CSV (country,year,month,demand_mwh)
    #[arg(long)]
    data: Option<PathBuf>,
    /// Use N generated series instead of --data
    #[arg(long, value_name = "N")]
    synthetic: Option<usize>,
    /// Seed for --synthetic
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    test_year: Option<i32>,
    /// Comma-separated: knn,knnw,fnm,nwe,grnn
    #[arg(long)]
    models: Option<String>,
    /// Input window length (assumption test)
    #[arg(long)]
    n: Option<usize>,
    /// Forecast horizon length
    #[arg(long)]
    m: Option<usize>,
    /// Lead between input and forecast windows
    #[arg(long)]
    tau: Option<usize>,
    /// raw, centered, ratio or standardized
    #[arg(long)]
    x_pattern: Option<String>,
    #[arg(long)]
    y_pattern: Option<String>,
    /// history, drift or external:<path>
    #[arg(long)]
    coding: Option<String>,
    /// Window lengths to search, e.g. 3..24 or 6,12
    #[arg(long)]
    grid_n: Option<String>,
    #[arg(long)]
    grid_k: Option<String>,
    /// Kernel width multipliers, e.g. 0.02..1:0.02
    #[arg(long)]
    grid_a: Option<String>,
    #[arg(long)]
    grid_b: Option<String>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Debug, Args)]
struct RankArgs {
    /// report.json files produced by `forecast`
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    /// Directory for ranking.csv and the merged report.json
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Options {
    fn or(self, file: Options) -> Options {
        Options {
            data: self.data.or(file.data),
            synthetic: self.synthetic.or(file.synthetic),
            seed: self.seed.or(file.seed),
            test_year: self.test_year.or(file.test_year),
            models: self.models.or(file.models),
            n: self.n.or(file.n),
            m: self.m.or(file.m),
            tau: self.tau.or(file.tau),
            x_pattern: self.x_pattern.or(file.x_pattern),
            y_pattern: self.y_pattern.or(file.y_pattern),
            coding: self.coding.or(file.coding),
            grid_n: self.grid_n.or(file.grid_n),
            grid_k: self.grid_k.or(file.grid_k),
            grid_a: self.grid_a.or(file.grid_a),
            grid_b: self.grid_b.or(file.grid_b),
            out: self.out.or(file.out),
            jobs: self.jobs.or(file.jobs),
        }
    }

    fn run_config(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        cfg.data_path.clone_from(&self.data);
        cfg.synthetic = self.synthetic.map(|count| SyntheticSource {
            count,
            seed: self.seed.unwrap_or(0),
        });
        if let Some(y) = self.test_year {
            cfg.test_year = y;
        }
        if let Some(list) = &self.models {
            cfg.models = list
                .split(',')
                .map(|s| s.trim().parse())
                .collect::<Result<Vec<ModelKind>>>()?;
        }
        let mut enc = EncodingSpec::default();
        enc.n = self.n.unwrap_or(enc.n);
        enc.m = self.m.unwrap_or(enc.m);
        enc.tau = self.tau.unwrap_or(enc.tau);
        if let Some(x) = &self.x_pattern {
            enc.x_definition = x.parse()?;
        }
        if let Some(y) = &self.y_pattern {
            enc.y_definition = y.parse()?;
        }
        cfg.encoding = enc;
        if let Some(c) = &self.coding {
            cfg.coding = c.parse::<CodingSource>()?;
        }
        let mut grid = GridSpec::default();
        if let Some(s) = &self.grid_n {
            grid.n_values = parse_int_list(s)?;
        }
        if let Some(s) = &self.grid_k {
            grid.k_values = parse_int_list(s)?;
        }
        if let Some(s) = &self.grid_a {
            grid.a_values = parse_float_list(s)?;
        }
        if let Some(s) = &self.grid_b {
            grid.b_values = parse_float_list(s)?;
        }
        cfg.grid = grid;
        if let Some(out) = &self.out {
            cfg.output_dir.clone_from(out);
        }
        cfg.jobs = self.jobs.unwrap_or(cfg.jobs);
        cfg.validate()?;
        Ok(cfg)
    }
}

/// `"3..24"` (inclusive) or `"1,2,5"`.
pub fn parse_int_list(s: &str) -> Result<Vec<usize>> {
    let bad = || invalid(format!("bad integer list {s:?}"));
    if let Some((lo, hi)) = s.split_once("..") {
        let lo: usize = lo.trim().parse().map_err(|_| bad())?;
        let hi: usize = hi.trim().parse().map_err(|_| bad())?;
        if lo > hi {
            return Err(bad());
        }
        return Ok((lo..=hi).collect());
    }
    s.split(',')
        .map(|v| v.trim().parse().map_err(|_| bad()))
        .collect()
}

/// `"0.02..1:0.02"` (start, inclusive end, step) or `"0.1,0.5"`.
pub fn parse_float_list(s: &str) -> Result<Vec<f64>> {
    let bad = || invalid(format!("bad number list {s:?}"));
    let num = |v: &str| v.trim().parse::<f64>().map_err(|_| bad());
    if let Some((lo, rest)) = s.split_once("..") {
        let (hi, step) = rest.split_once(':').ok_or_else(bad)?;
        let (lo, hi, step) = (num(lo)?, num(hi)?, num(step)?);
        if step.is_nan() || step <= 0.0 || lo > hi {
            return Err(bad());
        }
        let count = ((hi - lo) / step + 1e-9).floor() as usize;
        return Ok((0..=count).map(|i| lo + i as f64 * step).collect());
    }
    s.split(',').map(num).collect()
}

fn exit_code(e: &Error) -> i32 {
    if e.is_input_error() {
        EXIT_INVALID
    } else {
        EXIT_FAILURE
    }
}

fn report_failures(failures: &[Failure]) {
    for f in failures {
        eprintln!("failed: {} [{}] {}", f.country, f.stage, f.message);
    }
}

fn load_config_file(path: &Path) -> std::result::Result<Options, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
        }
    };
    let file_options = match &cli.config {
        Some(path) => match load_config_file(path) {
            Ok(o) => o,
            Err(msg) => {
                eprintln!("error: config {msg}");
                return EXIT_INVALID;
            }
        },
        None => Options::default(),
    };
    let result = match cli.command {
        Command::Validate(o) => validate(o.or(file_options)),
        Command::Assumption(o) => assumption(o.or(file_options)),
        Command::Forecast(o) => forecast(o.or(file_options)),
        Command::Rank(r) => rank(&r),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        exit_code(&e)
    })
}

fn validate(o: Options) -> Result<i32> {
    let summary = cmd_validate(&o.run_config()?)?;
    print!("{}", summary.render());
    Ok(if summary.all_valid() {
        EXIT_OK
    } else {
        EXIT_INVALID
    })
}

fn assumption(o: Options) -> Result<i32> {
    let cfg = o.run_config()?;
    let table = cmd_assumption(&cfg.load_series()?, &cfg.encoding, cfg.jobs)?;
    let csv = table.to_csv();
    print!("{csv}");
    if o.out.is_some() {
        std::fs::create_dir_all(&cfg.output_dir)?;
        std::fs::write(cfg.output_dir.join("assumption.csv"), &csv)?;
    }
    report_failures(&table.failures);
    Ok(if table.rows.is_empty() {
        EXIT_FAILURE
    } else {
        EXIT_OK
    })
}

fn forecast(o: Options) -> Result<i32> {
    let cfg = o.run_config()?;
    let outcome = cmd_tune_forecast(&cfg.load_series()?, &cfg)?;
    print!("{}", rank_table_csv(&outcome.report));
    report_failures(&outcome.report.failures);
    eprintln!(
        "{} countries, {} failures, output in {}",
        outcome.report.per_country.len(),
        outcome.report.failures.len(),
        cfg.output_dir.display()
    );
    Ok(if outcome.report.aggregate.is_empty() {
        EXIT_FAILURE
    } else {
        EXIT_OK
    })
}

fn rank(args: &RankArgs) -> Result<i32> {
    let reports = args
        .reports
        .iter()
        .map(EvaluationReport::load)
        .collect::<Result<Vec<_>>>()?;
    let merged = cmd_rank(&reports)?;
    let csv = rank_table_csv(&merged);
    print!("{csv}");
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("ranking.csv"), &csv)?;
        std::fs::write(dir.join("report.json"), merged.to_json()?)?;
    }
    Ok(EXIT_OK)
}
