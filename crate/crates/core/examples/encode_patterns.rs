//! Encodes a monthly series into x/y pattern pairs and decodes one back.

use psfm::prelude::*;

fn main() -> psfm::Result<()> {
    let series = psfm::synth::synthetic_series("PL", &SyntheticSpec::default(), 11)?;
    let spec = EncodingSpec::default();
    let dataset = build_pairs(&series, &spec)?;
    println!(
        "{} months -> {} pattern pairs (n = {}, m = {})",
        series.len(),
        dataset.len(),
        spec.n,
        spec.m
    );

    let last = dataset.pairs().last().expect("nonempty");
    let norm: f64 = last.x.iter().map(|v| v * v).sum::<f64>().sqrt();
    println!(
        "last x-pattern: norm {norm:.6}, first values {:.3?}",
        &last.x[..4]
    );

    let demand = decode_y(&last.y, &last.y_coding, &spec)?;
    println!(
        "decoded y window starts at {}: {:.1?}",
        series.month_at(last.anchor_index + spec.tau),
        &demand[..3]
    );

    for definition in [
        PatternDefinition::Raw,
        PatternDefinition::Centered,
        PatternDefinition::Ratio,
    ] {
        let spec = EncodingSpec {
            x_definition: definition,
            ..spec
        };
        let window = &series.values()[..spec.n];
        println!(
            "{definition:?}: {:.3?}",
            &encode_x(window, &spec)?.pattern[..3]
        );
    }
    Ok(())
}
