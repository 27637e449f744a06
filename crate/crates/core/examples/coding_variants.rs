//! Forecasts with coding variables from the query window, a drift
//! extrapolation of yearly statistics, and the (normally unknown) true values.

use psfm::bench::{naive_coding_forecast, yearly_coding_history, NaiveMethod};
use psfm::prelude::*;

fn main() -> psfm::Result<()> {
    let spec = SyntheticSpec {
        growth: 0.06,
        ..SyntheticSpec::default()
    };
    let series = psfm::synth::synthetic_series("IE", &spec, 8)?;
    let (train, test) = split_train_test(&series, 2014, 36)?;
    let history = EncodingSpec::default();
    let external = EncodingSpec {
        coding_mode: CodingMode::External,
        ..history
    };
    let config = ModelConfig::knn(4);

    let drift = naive_coding_forecast(&yearly_coding_history(&train), NaiveMethod::Drift)?;
    let oracle = CodingVariables::of_window(test.values());
    let runs = [
        ("history", forecast(&train, &config, &history, None)?),
        (
            "drift",
            forecast(&train, &config, &external, Some(drift.coding))?,
        ),
        ("true", forecast(&train, &config, &external, Some(oracle))?),
    ];
    for (name, f) in runs {
        println!(
            "{name:<8} MAPE {:.2}%",
            error_metrics(test.values(), &f)?.mape
        );
    }
    Ok(())
}
