//! Runs the full benchmark on a generated corpus and writes the report.
//!
//! `cargo run --release --example benchmark_corpus -- [countries] [out-dir]`

use psfm::bench::{cmd_tune_forecast, rank_table_csv, RunConfig};

fn main() -> psfm::Result<()> {
    let mut args = std::env::args().skip(1);
    let count = args.next().and_then(|a| a.parse().ok()).unwrap_or(4);
    let out = args.next().unwrap_or_else(|| "psfm-bench".into());
    let corpus = psfm::synth::synthetic_corpus(count, 2024)?;
    let config = RunConfig {
        output_dir: out.into(),
        jobs: 2,
        ..RunConfig::default()
    };
    let outcome = cmd_tune_forecast(&corpus, &config)?;
    print!("{}", rank_table_csv(&outcome.report));
    for f in &outcome.report.failures {
        eprintln!("{} [{}]: {}", f.country, f.stage, f.message);
    }
    println!(
        "report written to {}",
        config.output_dir.join("report.json").display()
    );
    Ok(())
}
