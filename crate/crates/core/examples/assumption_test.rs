//! Chi-squared test of whether similar x-patterns go with similar y-patterns.

use psfm::bench::assumption_test;
use psfm::prelude::*;
use psfm::synth::white_noise_series;

fn main() -> psfm::Result<()> {
    let spec = EncodingSpec::default();
    let seasonal = psfm::synth::synthetic_series("IT", &SyntheticSpec::default(), 2)?;
    let noise = white_noise_series("WN", 1995, 240, 2)?;
    for series in [&seasonal, &noise] {
        let (pairs, r) = assumption_test(series, &spec)?;
        println!(
            "{}: {pairs} pairs, chi2 = {:.1} (critical {:.2}, dof {}), reject independence: {}",
            series.country(),
            r.statistic,
            r.critical_value,
            r.dof,
            r.reject_null
        );
        for row in r.table.counts {
            println!("    {row:?}");
        }
    }
    Ok(())
}
