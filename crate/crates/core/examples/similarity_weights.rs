//! Compares the weights the five models give to historical patterns.

use psfm::models::euclidean_distance;
use psfm::prelude::*;
use psfm::tuner::{scott_bandwidths, sigma_from_a};

fn main() -> psfm::Result<()> {
    let series = psfm::synth::synthetic_series("CZ", &SyntheticSpec::default(), 5)?;
    let spec = EncodingSpec::default();
    let dataset = build_pairs(&series, &spec)?;
    let values = series.values();
    let query = encode_x(&values[values.len() - spec.n..], &spec)?.pattern;

    let sigma = sigma_from_a(0.2, &dataset)?;
    let scott = scott_bandwidths(&dataset)?;
    let configs = [
        ModelConfig::knn(5),
        ModelConfig::knn_weighted(5, 1.0, 0.0),
        ModelConfig::fnm(sigma, 2.0),
        ModelConfig::nwe(scott.values.iter().map(|h| 0.5 * h).collect()),
        ModelConfig::grnn(sigma),
    ];
    for config in &configs {
        let w = weights(&query, &dataset, config)?;
        let mut top: Vec<(usize, f64, f64)> = w
            .as_slice()
            .iter()
            .enumerate()
            .map(|(i, w)| {
                (
                    i,
                    *w,
                    euclidean_distance(&query, &dataset.pairs()[i].x).unwrap_or(f64::NAN),
                )
            })
            .collect();
        top.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.2.total_cmp(&b.2)));
        let shown: Vec<String> = top[..3]
            .iter()
            .map(|(i, w, d)| {
                format!(
                    "{} w={w:.3} d={d:.3}",
                    series.month_at(dataset.pairs()[*i].anchor_index)
                )
            })
            .collect();
        println!("{:<5} {}", config.kind.name(), shown.join(" | "));
    }
    Ok(())
}
