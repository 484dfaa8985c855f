use super::*;
use crate::ingest::{generate_synthetic, SyntheticSpec};
use proptest::prelude::*;

fn spec(family: Family, mode: Mode) -> ModelSpec {
    ModelSpec::default_for(family, mode, &EngineConfig::default()).unwrap()
}

fn fast_config() -> EngineConfig {
    EngineConfig {
        gbt: GbtParams {
            n_estimators: 40,
            ..GbtParams::default()
        },
        lstm: LstmParams {
            epochs: 3,
            layers: 1,
            hidden_size: 8,
            ..LstmParams::default()
        },
        tune: false,
        ..EngineConfig::default()
    }
}

fn synthetic(name: &str, seed: u64, weeks: usize) -> FeatureFrame {
    let mut s = SyntheticSpec::preset(name, seed).unwrap();
    s.n_weeks = weeks;
    generate_synthetic(&s).unwrap()
}

#[test]
fn select_best_follows_lowest_mse() {
    let arima = spec(Family::Arima, Mode::Univariate);
    let lstm = spec(Family::Lstm, Mode::Univariate);
    assert_eq!(select_best(&[(arima, 0.251), (lstm, 0.556)]).unwrap().family, Family::Arima);
    assert_eq!(select_best(&[(lstm, 0.304), (arima, 0.437)]).unwrap().family, Family::Lstm);
    assert_eq!(select_best(&[(lstm, 1.0)]).unwrap(), lstm);
    assert!(matches!(select_best(&[]), Err(Error::EmptyReport)));
}

#[test]
fn ties_go_to_canonical_family_order() {
    let specs: Vec<(ModelSpec, f64)> = Family::ALL
        .iter()
        .rev()
        .map(|f| (spec(*f, Mode::Univariate), 0.5))
        .collect();
    assert_eq!(select_best(&specs).unwrap().family, Family::Arima);
    let trend = spec(Family::Trend, Mode::Univariate);
    let gbt = spec(Family::Gbt, Mode::Univariate);
    assert_eq!(pick_lowest(&[(gbt, 0.2), (trend, 0.2)]).unwrap(), gbt);
    assert!(Family::Arima < Family::Trend && Family::Trend < Family::Svr);
    assert!(Family::Svr < Family::Gbt && Family::Gbt < Family::Lstm);
}

proptest! {
    #[test]
    fn winner_invariant_under_positive_scaling(
        mses in proptest::collection::vec(0.0f64..10.0, 5),
        k in 1e-3f64..1e3,
    ) {
        let entries: Vec<(ModelSpec, f64)> = Family::ALL
            .iter()
            .zip(&mses)
            .map(|(f, m)| (spec(*f, Mode::Univariate), *m))
            .collect();
        let scaled: Vec<(ModelSpec, f64)> = entries.iter().map(|(s, m)| (*s, m * k)).collect();
        prop_assert_eq!(select_best(&entries).unwrap(), select_best(&scaled).unwrap());
    }
}

#[test]
fn arima_is_univariate_only() {
    assert!(matches!(
        ModelSpec::default_for(Family::Arima, Mode::Multivariate, &EngineConfig::default()),
        Err(Error::UnsupportedMode { .. })
    ));
    for f in [Family::Trend, Family::Svr, Family::Gbt, Family::Lstm] {
        assert!(ModelSpec::default_for(f, Mode::Multivariate, &EngineConfig::default()).is_ok());
    }
    assert_eq!("gbt".parse::<Family>().unwrap(), Family::Gbt);
    assert_eq!("multivariate".parse::<Mode>().unwrap(), Mode::Multivariate);
}

#[test]
fn arima_grid_contains_the_fixed_orders() {
    let frame = preprocess(&synthetic("chicken", 1, 300), MissingPolicy::ForwardFill).unwrap();
    let grid = candidates(Family::Arima, &frame, Mode::Univariate, &EngineConfig::default()).unwrap();
    let orders: Vec<ArimaOrder> = grid
        .iter()
        .map(|s| match s.hyperparameters {
            Hyperparams::Arima(o) => o,
            _ => unreachable!(),
        })
        .collect();
    assert!(orders.contains(&ArimaOrder::new(1, 1, 1).unwrap()));
    assert!(orders.contains(&ArimaOrder::new(2, 1, 1).unwrap()));
    let svr = candidates(Family::Svr, &frame, Mode::Univariate, &EngineConfig::default()).unwrap();
    assert_eq!(svr.len(), 4);
    let untuned = candidates(Family::Svr, &frame, Mode::Univariate, &fast_config()).unwrap();
    assert_eq!(untuned.len(), 1);
}

#[test]
fn tuning_single_candidate_and_determinism() {
    let frame = preprocess(&synthetic("tomato", 2, 260), MissingPolicy::ForwardFill).unwrap();
    let cfg = fast_config();
    let only = tune(Family::Svr, &frame, Mode::Univariate, &cfg).unwrap();
    assert_eq!(only, ModelSpec::default_for(Family::Svr, Mode::Univariate, &cfg).unwrap());
    let tuned_cfg = EngineConfig { tune: true, ..cfg };
    let a = tune(Family::Trend, &frame, Mode::Multivariate, &tuned_cfg).unwrap();
    let b = tune(Family::Trend, &frame, Mode::Multivariate, &tuned_cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn preprocess_clears_missing_cells() {
    let raw = synthetic("chili", 3, 200);
    assert!(raw.base().missing_count() > 0);
    let clean = preprocess(&raw, MissingPolicy::ForwardFill).unwrap();
    assert_eq!(clean.missing_cells(), 0);
    assert_eq!(preprocess(&clean, MissingPolicy::ForwardFill).unwrap(), clean);

    let blank = clean
        .map_columns(|name, cells| {
            Ok(if name == crate::series::CRUDE_OIL {
                vec![None; cells.len()]
            } else {
                cells.to_vec()
            })
        })
        .unwrap();
    assert!(matches!(
        preprocess(&blank, MissingPolicy::ForwardFill),
        Err(Error::AllMissingColumn(c)) if c == "crude_oil"
    ));
}

#[test]
fn every_family_evaluates_and_round_trips() {
    let frame = preprocess(&synthetic("chicken", 4, 260), MissingPolicy::ForwardFill).unwrap();
    let cfg = fast_config();
    let dir = tempfile::tempdir().unwrap();
    for family in Family::ALL {
        let mode = if family == Family::Arima { Mode::Univariate } else { Mode::Multivariate };
        let s = ModelSpec::default_for(family, mode, &cfg).unwrap();
        let ev = train_and_test(&s, &frame, &cfg.split, "chicken").unwrap();
        assert!(ev.mse.is_finite() && ev.mse >= 0.0, "{family}");
        assert_eq!((ev.train_rows, ev.test_rows), (234, 26));

        // MSE is on the price scale
        let parts = split(&frame, &cfg.split).unwrap();
        let fc = ev.artifact.model.forecast(parts[0].train(), 26).unwrap();
        assert_eq!(ev.mse, mse(&parts[0].test().prices().unwrap(), &fc).unwrap());

        let again = train_and_test(&s, &frame, &cfg.split, "chicken").unwrap();
        assert_eq!(again.mse, ev.mse, "{family} not reproducible");

        let path = save_artifact(dir.path(), &ev.artifact).unwrap();
        let loaded = load_artifact(&path).unwrap();
        assert_eq!(loaded, ev.artifact);
        let probe = ev.artifact.forecast(8).unwrap();
        let reloaded = loaded.forecast(8).unwrap();
        assert_eq!(
            probe.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            reloaded.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            "{family}"
        );
        assert_eq!(ev.artifact.fingerprint, fingerprint(parts[0].train()).unwrap());
    }
}

#[test]
fn tampered_or_unknown_artifacts_are_rejected() {
    let frame = preprocess(&synthetic("tomato", 5, 200), MissingPolicy::ForwardFill).unwrap();
    let cfg = fast_config();
    let ev = train_and_test(&spec(Family::Trend, Mode::Univariate), &frame, &cfg.split, "tomato").unwrap();
    let (text, _) = ev.artifact.to_envelope().unwrap();
    assert_eq!(ModelArtifact::from_envelope(&text).unwrap(), ev.artifact);

    let tampered = text.replacen("\"commodity\":\"tomato\"", "\"commodity\":\"tomatx\"", 1);
    assert_ne!(tampered, text);
    assert!(matches!(ModelArtifact::from_envelope(&tampered), Err(Error::CorruptArtifact(_))));

    let future = text.replacen("\"version\":\"1\"", "\"version\":\"99\"", 1);
    assert!(matches!(
        ModelArtifact::from_envelope(&future),
        Err(Error::VersionMismatch { found }) if found == "99"
    ));
    assert!(matches!(ModelArtifact::from_envelope("not json"), Err(Error::CorruptArtifact(_))));
    assert!(matches!(load_artifact("/nonexistent/a.json"), Err(Error::ArtifactNotFound(_))));
}

#[test]
fn experiment_shapes_and_report_rendering() {
    assert!(run_experiment(&[], &[Mode::Univariate], &fast_config()).is_empty());

    let data: Vec<(String, FeatureFrame)> = ["chicken", "chili", "tomato"]
        .iter()
        .map(|n| (n.to_string(), synthetic(n, 6, 220)))
        .collect();
    let cfg = EngineConfig {
        policy: MissingPolicy::SentinelFill,
        ..fast_config()
    };
    let series1 = run_experiment(&data, &[Mode::Univariate], &cfg);
    assert_eq!(series1.len(), 3);
    assert!(series1.iter().all(|r| r.entries.len() == 5));
    let svr = series1[0].entry(Family::Svr, Mode::Univariate).unwrap();
    assert_eq!(svr.warnings.len(), 1);

    let cfg = fast_config();
    let series2 = run_experiment(&data[..1], &[Mode::Univariate, Mode::Multivariate], &cfg);
    assert_eq!(series2[0].entries.len(), 9);
    let winner = series2[0].winner.unwrap();
    let best = series2[0]
        .entries
        .iter()
        .filter_map(|e| e.mse)
        .fold(f64::INFINITY, f64::min);
    assert_eq!(series2[0].entry(winner.family, winner.mode).unwrap().mse, Some(best));

    let csv = report_csv(&series2).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), REPORT_HEADER);
    assert_eq!(lines.count(), 9);
    let table = report_table(&series2);
    assert!(table.contains("multivariate") && table.contains('*'));

    let rerun = run_experiment(&data[..1], &[Mode::Univariate, Mode::Multivariate], &cfg);
    for (a, b) in series2[0].entries.iter().zip(&rerun[0].entries) {
        assert_eq!(a.mse, b.mse, "{} {}", a.family, a.mode);
    }
    let artifact = fit_winner(&series2[0], &data[0].1, &cfg).unwrap();
    assert_eq!(artifact.forecast(52).unwrap().len(), 52);
}

#[test]
fn failing_cells_are_recorded_not_fatal() {
    let short = preprocess(&synthetic("chicken", 7, 60), MissingPolicy::ForwardFill).unwrap();
    let reports = run_experiment(&[("chicken".into(), short)], &[Mode::Univariate], &fast_config());
    let trend = reports[0].entry(Family::Trend, Mode::Univariate).unwrap();
    assert!(trend.error.is_some() && trend.mse.is_none());
    assert!(reports[0].entry(Family::Arima, Mode::Univariate).unwrap().mse.is_some());
}
