//! Experiment configs, runners and the files they write.

use sinebeta_core::error::Error;
use sinebeta_core::experiment::{run, run_collect, Experiment, ExperimentConfig, CSV_SCHEMA_VERSION};

fn config(s: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(s).unwrap()
}

fn config_error(s: &str) -> bool {
    matches!(ExperimentConfig::from_json(s), Err(Error::Config(_)))
}

#[test]
fn defaults_are_filled_in() {
    let c = config(r#"{"kind": "two_point_decay", "beta": 2, "n_samples": 100, "r_grid": [2, 4]}"#);
    match &c.experiment {
        Experiment::TwoPointDecay { window, seed_plan, antithetic, .. } => {
            assert_eq!(*window, 1.0);
            assert_eq!(*seed_plan, sinebeta_core::correlation::SeedPlan::SplitMarginals);
            assert!(*antithetic);
        }
        other => panic!("wrong kind {other:?}"),
    }
    assert_eq!(c.base_seed, 0);
    assert_eq!(c.n_workers, None);
    let i = config(r#"{"kind": "intensity", "beta": 1, "n_samples": 10}"#);
    assert_eq!(i.experiment, Experiment::Intensity { window: std::f64::consts::TAU });
}

#[test]
fn bad_configs_are_config_errors() {
    assert!(config_error(r#"{"kind": "nonsense", "beta": 2, "n_samples": 10}"#));
    assert!(config_error(r#"{"kind": "intensity", "n_samples": 10}"#));
    assert!(config_error(r#"{"kind": "intensity", "beta": -1, "n_samples": 10}"#));
    assert!(config_error(r#"{"kind": "intensity", "beta": 2, "n_samples": 1}"#));
    assert!(config_error(r#"{"kind": "two_point_decay", "beta": 2, "n_samples": 10, "r_grid": [0.5]}"#));
    assert!(config_error(r#"{"kind": "two_point_decay", "beta": 2, "n_samples": 10, "r_grid": []}"#));
    assert!(config_error(
        r#"{"kind": "k_point", "beta": 2, "n_samples": 10, "left": [[-1, 2]], "right": [[0, 1]],
            "r_grid": [1], "estimator": "fully_truncated"}"#
    ));
    assert!(config_error(
        r#"{"kind": "k_point", "beta": 2, "n_samples": 10, "left": [[-1, 1]], "right": [[0, 1]],
            "r_grid": [1], "estimator": "best"}"#
    ));
    assert!(config_error(r#"{"kind": "coupling_tv", "beta": 2, "n_samples": 10, "r": 5, "grid": [0.5, 0.2]}"#));
    assert!(config_error(r#"{"kind": "euler_convergence", "beta": 2, "n_samples": 10, "lambda": 1, "levels": 1}"#));
    assert!(config_error("not json"));
}

#[test]
fn config_round_trips_through_json() {
    let c = config(
        r#"{"kind": "k_point", "beta": 4, "n_samples": 64, "left": [[-1, 1]], "right": [[0, 1], [2, 0.5]],
            "r_grid": [3, 6], "estimator": "partially_truncated", "base_seed": 9}"#,
    );
    let back = ExperimentConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
    assert_eq!(back, c);
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let c = config(r#"{"kind": "intensity", "beta": 2, "n_samples": 600, "window": 3, "base_seed": 5}"#);
    let one = run_collect(&c, 1).unwrap();
    let three = run_collect(&c, 3).unwrap();
    assert_eq!(one.csv().unwrap(), three.csv().unwrap());
    assert_eq!(one.summary, three.summary);
}

#[test]
fn partial_results_are_flushed() {
    // The second distance leaves no room for a unit window in f64.
    let c = config(r#"{"kind": "two_point_decay", "beta": 2, "n_samples": 64, "r_grid": [1, 1e300]}"#);
    let out = run_collect(&c, 1).unwrap();
    assert!(out.incomplete);
    assert!(out.error.is_some());
    assert_eq!(out.rows.len(), 1);

    let dir = tempfile::tempdir().unwrap();
    match run(&c, dir.path(), 1) {
        Err(Error::Incomplete { path, .. }) => assert_eq!(path, dir.path()),
        other => panic!("expected an incomplete run, got {other:?}"),
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["incomplete"], true);
    let csv = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn run_writes_manifest_summary_and_csv() {
    let c = config(r#"{"kind": "overcrowding", "beta": 2, "n_samples": 200, "lambda": 2, "n_max": 4}"#);
    let dir = tempfile::tempdir().unwrap();
    let files = run(&c, dir.path(), 1).unwrap();
    let mut reader = csv::Reader::from_path(&files.results).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, c.experiment.columns());
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    let probs: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(probs.windows(2).all(|w| w[1] <= w[0]));
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&files.manifest).unwrap()).unwrap();
    assert_eq!(manifest["csv_schema"]["version"], CSV_SCHEMA_VERSION);
    assert_eq!(manifest["config"]["kind"], "overcrowding");
    assert_eq!(manifest["incomplete"], false);
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&files.summary).unwrap()).unwrap();
    assert_eq!(summary["tail"].as_array().unwrap().len(), 4);
}

#[test]
fn oscillation_trace_layout() {
    let c = config(r#"{"kind": "oscillation_trace", "beta": 2, "n_samples": 3, "r": 0, "t_end": 2, "n_steps": 40, "stride": 4}"#);
    let out = run_collect(&c, 1).unwrap();
    assert_eq!(out.rows.len(), 3 * 11);
    // No drift at r = 0: the angle never leaves 0.
    for row in &out.rows {
        assert_eq!(row[2].parse::<f64>().unwrap(), 0.0);
        assert_eq!(row[3].parse::<f64>().unwrap(), 1.0);
    }
    let fast = config(r#"{"kind": "oscillation_trace", "beta": 2, "n_samples": 2, "r": 400, "t_end": 1, "n_steps": 2000}"#);
    let out = run_collect(&fast, 1).unwrap();
    let until = out.summary["drift_dominated_until"].as_f64().unwrap();
    assert!((until - (200.0f64).ln() * 2.0).abs() < 1e-12);
    let last: f64 = out.rows[2000][2].parse().unwrap();
    assert!(last > 100.0, "angle should wind quickly, got {last}");
}

#[test]
fn euler_and_coupling_runs_have_one_row_per_entry() {
    let e = config(r#"{"kind": "euler_convergence", "beta": 2, "n_samples": 20, "lambda": 3, "levels": 3}"#);
    let out = run_collect(&e, 1).unwrap();
    assert!(!out.incomplete);
    assert_eq!(out.rows.len(), 3);
    let k = config(r#"{"kind": "coupling_tv", "beta": 4, "n_samples": 50, "r": 30, "grid": [0.1, 0.2, 0.3], "substep": 0.01}"#);
    let out = run_collect(&k, 1).unwrap();
    assert_eq!(out.rows.len(), 2);
    assert!(out.summary["tv_bound"].as_f64().unwrap() >= 0.0);
}
