use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use degreeflow::experiments::{
    load_config, replay, run_pipeline, run_scenario, validate_config, Aggregate, Pipeline,
    RunConfig, TheoryRecord,
};
use serde_json::Value;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn small(dir: &Path) -> RunConfig {
    RunConfig {
        n0: 30,
        horizon: 100,
        replications: 2,
        stride: 10,
        seed: 5,
        out_dir: dir.to_path_buf(),
        ..RunConfig::default()
    }
}

fn csv_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in fs::read_dir(dir).unwrap() {
        let path = e.unwrap().path();
        if path.extension().is_some_and(|x| x == "csv") {
            out.insert(
                path.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&path).unwrap(),
            );
        }
    }
    out
}

#[test]
fn aggregates_are_averages_of_rows() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_scenario("custom", &small(dir.path())).unwrap();
    let text = fs::read_to_string(dir.path().join("replications.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    for (c, name) in header.iter().enumerate().skip(1) {
        let (a, b) = (rows[0][c], rows[1][c]);
        let Aggregate { mean, stderr } = report.aggregates[*name];
        assert!((mean - (a + b) / 2.0).abs() <= 1e-12 * mean.abs().max(1.0), "{name}");
        assert!((stderr - (a - b).abs() / 2.0).abs() <= 1e-12 * stderr.max(1.0), "{name}");
    }
}

#[test]
fn same_seed_gives_identical_csvs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_scenario("custom", &small(a.path())).unwrap();
    run_scenario("custom", &small(b.path())).unwrap();
    let (fa, fb) = (csv_files(a.path()), csv_files(b.path()));
    assert!(!fa.is_empty());
    assert_eq!(fa, fb);
}

#[test]
fn worker_count_does_not_change_results() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut cfg = small(a.path());
    cfg.replications = 4;
    cfg.workers = Some(1);
    run_scenario("custom", &cfg).unwrap();
    cfg.out_dir = b.path().to_path_buf();
    cfg.workers = Some(3);
    run_scenario("custom", &cfg).unwrap();
    assert_eq!(csv_files(a.path()), csv_files(b.path()));
}

#[test]
fn different_seeds_share_a_schema() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut cfg = small(a.path());
    cfg.horizon = 2000;
    run_scenario("custom", &cfg).unwrap();
    cfg.out_dir = b.path().to_path_buf();
    cfg.seed = 6;
    run_scenario("custom", &cfg).unwrap();
    let (fa, fb) = (csv_files(a.path()), csv_files(b.path()));
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    for (name, bytes) in &fa {
        let first = |b: &[u8]| String::from_utf8_lossy(b).lines().next().unwrap().to_string();
        assert_eq!(first(bytes), first(&fb[name]), "{name}");
    }
    assert_ne!(fa["trajectory_0.csv"], fb["trajectory_0.csv"]);
}

#[test]
fn golden_replay() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg: serde_json::Map<String, Value> =
        serde_json::from_str(&fs::read_to_string(data("golden_config.json")).unwrap()).unwrap();
    cfg.insert("out_dir".into(), Value::String(dir.path().to_string_lossy().into_owned()));
    let path = dir.path().join("config.json");
    fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();

    let report = replay(&path, None).unwrap();
    let got = serde_json::to_value(&report.aggregates).unwrap();
    let golden_path = data("golden_summary.json");
    if std::env::var_os("DEGREEFLOW_BLESS").is_some() {
        fs::write(&golden_path, serde_json::to_string_pretty(&got).unwrap() + "\n").unwrap();
    }
    let want: Value = serde_json::from_str(&fs::read_to_string(golden_path).unwrap()).unwrap();
    let want = want.as_object().unwrap();
    assert_eq!(want.len(), report.aggregates.len());
    for (name, agg) in &report.aggregates {
        let w = want[name]["mean"].as_f64().unwrap();
        assert!((agg.mean - w).abs() <= 1e-9 * w.abs().max(1.0), "{name}: {} vs {w}", agg.mean);
    }

    let other = replay(&path, Some(43)).unwrap();
    assert_eq!(other.aggregates.keys().collect::<Vec<_>>(), report.aggregates.keys().collect::<Vec<_>>());
}

#[test]
fn config_precedence_file_over_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    fs::write(&path, r#"{"scenario": "example1", "horizon": 300}"#).unwrap();
    let cfg = load_config(Some(&path), None).unwrap();
    assert_eq!(cfg.horizon, 300);
    assert_eq!(cfg.p, vec![0.5]);
    assert_eq!(cfg.replications, 5);
}

#[test]
fn config_parse_error_has_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    fs::write(&path, "{\n  \"seed\": 1,\n  \"horizon\": x\n}\n").unwrap();
    let err = load_config(Some(&path), None).unwrap_err();
    assert!(err.to_string().contains("line 3"), "{err}");
}

#[test]
fn invalid_config_is_refused_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.p = vec![1.2];
    let err = run_scenario("custom", &cfg).unwrap_err();
    assert!(err.is_config_error());
    assert!(err.to_string().contains("p out of range"));
    assert!(!dir.path().join("replications.csv").exists());
}

#[test]
fn theory_json_has_documented_fields() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        out_dir: dir.path().to_path_buf(),
        write_matrices: true,
        n0: 40,
        ..RunConfig::default()
    };
    run_pipeline(Pipeline::Theory, "theory", &cfg).unwrap();
    let v: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("theory.json")).unwrap()).unwrap();
    for key in ["p", "q", "N0", "D", "g_bar", "d1", "d2", "lambda", "beta_star", "beta", "trace_sigma"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    let rec: TheoryRecord = serde_json::from_value(v).unwrap();
    assert_eq!(rec.d, 39);
    assert_eq!(rec.g_bar.len(), 39);
    assert!(rec.lambda.is_some());
    let l = fs::read_to_string(dir.path().join("L.csv")).unwrap();
    assert!(l.starts_with("# L 39x39\n"));
    assert_eq!(l.lines().count(), 40);
    assert!(dir.path().join("g_bar.plt").exists());
}

#[test]
fn example_configs_validate() {
    for name in ["example1", "example2", "example3", "example4", "custom"] {
        let cfg = RunConfig::for_scenario(name).unwrap();
        assert_eq!(validate_config(&cfg), Vec::<String>::new(), "{name}");
    }
}

#[test]
fn example4_average_degree_rises_with_p() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::for_scenario("example4").unwrap();
    cfg.out_dir = dir.path().to_path_buf();
    cfg.n0 = 60;
    cfg.q_grid = Some(vec![0.05, 0.1]);
    let report = run_scenario("example4", &cfg).unwrap();
    for entry in report.details["per_q"].as_array().unwrap() {
        assert_eq!(entry["d1_inversions_in_p"], 0);
    }
    // the stationary distribution does not depend on q
    let rows = &report.rows;
    let half = rows.len() / 2;
    for k in 0..half {
        let (a, b) = (rows[k].metrics["d1"], rows[k + half].metrics["d1"]);
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
    assert!(dir.path().join("d1_vs_p.dat").exists());
}

#[test]
fn tracking_writes_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::for_scenario("example3").unwrap();
    cfg.out_dir = dir.path().to_path_buf();
    cfg.n0 = 40;
    cfg.horizon = 1200;
    cfg.forced_path.as_mut().unwrap().jumps = vec![(400, 1), (800, 2)];
    cfg.replications = 1;
    let report = run_scenario("example3", &cfg).unwrap();
    let text = fs::read_to_string(dir.path().join("track_0.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "step,theta,g_hat[3],target[3],mse,nu_norm");
    assert_eq!(text.lines().count(), 1 + 1 + 1200 / 10);
    assert!(report.aggregates.contains_key("jump1_steps"));
    assert!(report.aggregates.contains_key("steady_state_mse"));
}

#[test]
fn growing_mode_grows() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::for_scenario("example1").unwrap();
    cfg.out_dir = dir.path().to_path_buf();
    cfg.horizon = 500;
    cfg.replications = 1;
    let report = run_scenario("example1", &cfg).unwrap();
    let nodes = report.metric("nodes").unwrap();
    let deletions = report.metric("deletions").unwrap();
    // single-edge seed, one duplication per step, deletions replaced
    assert_eq!(nodes, 2.0 + 500.0);
    assert!(deletions > 0.0);
    assert!(dir.path().join("degree_counts.plt").exists());
}
