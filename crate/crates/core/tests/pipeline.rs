use psfm::bench::{
    assumption_test, cmd_assumption, evaluate_corpus, summarize, write_outcome, CodingSource,
    EvaluationReport, RunConfig, BASELINE,
};
use psfm::codec::{CodingVariables, EncodingSpec};
use psfm::models::ModelKind;
use psfm::series::{MonthlyLoadSeries, SeriesCollection, YearMonth};
use psfm::synth::{synthetic_series, tiled_series, white_noise_series, SyntheticSpec};
use psfm::tuner::GridSpec;

const SHAPE: [f64; 12] = [
    130.0, 120.0, 110.0, 95.0, 85.0, 80.0, 82.0, 84.0, 90.0, 100.0, 112.0, 125.0,
];

fn small_grid() -> GridSpec {
    GridSpec {
        n_values: vec![6, 12],
        k_values: vec![1, 3, 5],
        a_values: vec![0.02, 0.3],
        b_values: vec![0.15, 1.0],
    }
}

fn quick_config() -> RunConfig {
    RunConfig {
        test_year: 2014,
        grid: small_grid(),
        ..RunConfig::default()
    }
}

fn corpus(series: Vec<MonthlyLoadSeries>) -> SeriesCollection {
    series
        .into_iter()
        .collect::<psfm::Result<SeriesCollection>>()
        .unwrap()
}

fn synthetic(country: &str, seed: u64) -> MonthlyLoadSeries {
    synthetic_series(
        country,
        &SyntheticSpec {
            years: 10,
            start_year: 2005,
            ..SyntheticSpec::default()
        },
        seed,
    )
    .unwrap()
}

#[test]
fn single_country_report_has_baseline_and_every_model() {
    let out = evaluate_corpus(&corpus(vec![synthetic("DE", 1)]), &quick_config()).unwrap();
    let de = &out.report.per_country["DE"];
    assert!(de.models.contains_key(BASELINE));
    for kind in ModelKind::ALL {
        let entry = &de.models[kind.name()];
        assert!(entry.tuning.is_some());
        assert!(entry.metrics.mape.is_finite());
    }
    assert_eq!(de.assumption.as_ref().unwrap().dof, 16);
    assert_eq!(out.forecasts.len(), 6);
    assert_eq!(out.traces.len(), 5);
    assert!(out.report.failures.is_empty());
}

#[test]
fn exact_repetition_gives_zero_error() {
    let out = evaluate_corpus(
        &corpus(vec![tiled_series("RP", 2004, &SHAPE, 11).unwrap()]),
        &quick_config(),
    )
    .unwrap();
    for (name, entry) in &out.report.per_country["RP"].models {
        assert!(entry.metrics.mape < 1e-9, "{name}: {}", entry.metrics.mape);
    }
}

#[test]
fn rerun_is_byte_identical_across_thread_counts() {
    let data = corpus(vec![
        synthetic("AA", 3),
        synthetic("BB", 4),
        synthetic("CC", 5),
    ]);
    let one = evaluate_corpus(
        &data,
        &RunConfig {
            jobs: 1,
            ..quick_config()
        },
    )
    .unwrap();
    let three = evaluate_corpus(
        &data,
        &RunConfig {
            jobs: 3,
            ..quick_config()
        },
    )
    .unwrap();
    assert_eq!(
        one.report.to_json().unwrap(),
        three.report.to_json().unwrap()
    );
    assert_eq!(one.forecasts, three.forecasts);

    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    write_outcome(&one, a.path()).unwrap();
    write_outcome(&three, b.path()).unwrap();
    for file in ["report.json", "forecasts/BB_nwe.csv", "traces/CC_fnm.csv"] {
        assert_eq!(
            std::fs::read(a.path().join(file)).unwrap(),
            std::fs::read(b.path().join(file)).unwrap()
        );
    }
}

#[test]
fn aggregates_survive_json_round_trip() {
    let data = corpus(vec![synthetic("AA", 8), synthetic("BB", 9)]);
    let out = evaluate_corpus(&data, &quick_config()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_outcome(&out, dir.path()).unwrap();
    let loaded = EvaluationReport::load(dir.path().join("report.json")).unwrap();
    assert_eq!(loaded, out.report);
    let (aggregate, ranking) = summarize(&loaded.per_country);
    assert_eq!(aggregate, loaded.aggregate);
    assert_eq!(ranking, loaded.ranking);
}

#[test]
fn failing_country_does_not_stop_the_run() {
    let short =
        MonthlyLoadSeries::new("XX", YearMonth::new(2013, 1).unwrap(), vec![100.0; 24]).unwrap();
    let out = evaluate_corpus(&corpus(vec![synthetic("DE", 1), short]), &quick_config()).unwrap();
    assert!(out.report.per_country.contains_key("DE"));
    assert!(!out.report.per_country.contains_key("XX"));
    assert!(out
        .report
        .failures
        .iter()
        .any(|f| f.country == "XX" && f.stage == "split"));
}

#[test]
fn external_coding_with_true_year_statistics_is_exact() {
    let series = tiled_series("RP", 2004, &SHAPE, 11).unwrap();
    let truth = CodingVariables::of_window(&SHAPE);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("coding.csv");
    std::fs::write(
        &path,
        format!(
            "country,year,mean_mwh,dispersion_mwh\nRP,2014,{},{}\n",
            truth.mean, truth.dispersion
        ),
    )
    .unwrap();
    let config = RunConfig {
        coding: CodingSource::External(path),
        ..quick_config()
    };
    let out = evaluate_corpus(&corpus(vec![series, synthetic("ZZ", 2)]), &config).unwrap();
    let rp = &out.report.per_country["RP"];
    assert!(rp.models["knn+external"].metrics.mape < 1e-9);
    assert!(rp.models["grnn+external"].metrics.mape < 1e-9);
    // no coding row for ZZ: baseline still scored, models reported as failures
    assert!(out.report.per_country["ZZ"].models.contains_key(BASELINE));
    assert!(out
        .report
        .failures
        .iter()
        .any(|f| f.country == "ZZ" && f.stage == "coding"));
}

#[test]
fn drift_coding_tracks_a_linear_trend() {
    // level grows by the same amount every year, the shape stays fixed
    let values: Vec<f64> = (0..132)
        .map(|t| SHAPE[t % 12] + 10.0 * (t / 12) as f64)
        .collect();
    let series = MonthlyLoadSeries::new("LT", YearMonth::new(2004, 1).unwrap(), values).unwrap();
    let config = RunConfig {
        coding: CodingSource::Drift,
        ..quick_config()
    };
    let out = evaluate_corpus(&corpus(vec![series]), &config).unwrap();
    let models = &out.report.per_country["LT"].models;
    assert!(
        models["knn+drift"].metrics.mape < 1e-9,
        "{}",
        models["knn+drift"].metrics.mape
    );
    assert!(models[BASELINE].metrics.mape > 5.0);
}

#[test]
fn tau_two_uses_earlier_query_window() {
    let config = RunConfig {
        encoding: EncodingSpec {
            tau: 2,
            ..EncodingSpec::default()
        },
        coding: CodingSource::Drift,
        ..quick_config()
    };
    let out = evaluate_corpus(
        &corpus(vec![tiled_series("RP", 2004, &SHAPE, 11).unwrap()]),
        &config,
    )
    .unwrap();
    assert!(out.report.failures.is_empty(), "{:?}", out.report.failures);
    assert!(
        out.report.per_country["RP"].models["fnm+drift"]
            .metrics
            .mape
            < 1e-9
    );
}

#[test]
fn seasonal_series_reject_independence() {
    let data = corpus((0..4).map(|s| synthetic(&format!("S{s}"), s)).collect());
    let table = cmd_assumption(&data, &EncodingSpec::default(), 2).unwrap();
    assert_eq!(table.rows.len(), 4);
    for row in &table.rows {
        assert!(row.result.reject_null);
        assert_eq!(row.result.dof, 16);
        assert!((row.result.critical_value - 26.30).abs() < 0.01);
    }
    assert!(table
        .to_csv()
        .starts_with("country,pairs,statistic,dof,critical_value,reject_null\n"));
}

/// Pairs built from overlapping windows are not independent samples, so the
/// test over-rejects on white noise; what holds is that the statistic stays
/// near the critical value instead of the orders of magnitude seen on
/// seasonal data.
#[test]
fn white_noise_statistic_stays_near_critical_value() {
    let spec = EncodingSpec::default();
    let mut stats: Vec<f64> = (0..40)
        .map(|seed| {
            assumption_test(&white_noise_series("W", 1990, 240, seed).unwrap(), &spec)
                .unwrap()
                .1
                .statistic
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let critical = 26.296;
    assert!(stats[20] < 4.0 * critical, "median {}", stats[20]);
    let seasonal = assumption_test(&synthetic("S", 0), &spec)
        .unwrap()
        .1
        .statistic;
    assert!(seasonal > 100.0 * critical);
}
