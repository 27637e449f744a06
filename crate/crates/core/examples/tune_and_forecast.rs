//! Tunes each model by leave-one-out grid search and forecasts a test year.

use psfm::prelude::*;

fn main() -> psfm::Result<()> {
    let series = psfm::synth::synthetic_series("ES", &SyntheticSpec::default(), 3)?;
    let (train, test) = split_train_test(&series, 2014, 36)?;
    let template = EncodingSpec::default();
    let grid = GridSpec {
        n_values: vec![6, 9, 12, 18, 24],
        ..GridSpec::default()
    };

    let naive = seasonal_naive(&train, 12)?;
    println!(
        "snaive  MAPE {:.2}%",
        error_metrics(test.values(), &naive)?.mape
    );
    for kind in ModelKind::ALL {
        let tuned = grid_search(&train, &template, kind, &grid)?;
        let forecast = forecast(&train, &tuned.best_config, &tuned.best_spec, None)?;
        let metrics = error_metrics(test.values(), &forecast)?;
        println!(
            "{:<7} MAPE {:.2}%  n = {:>2}  param = {:<5}  cv {:.2}%",
            kind.name(),
            metrics.mape,
            tuned.best_spec.n,
            tuned.best_param,
            tuned.cv_error
        );
    }
    Ok(())
}
