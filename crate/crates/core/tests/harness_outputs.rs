//! Harness runs end to end: output files, determinism, dry runs and config
//! errors.

use std::fs;
use std::path::Path;

use depu::harness::{self, emit_outputs, ExperimentConfig, ExperimentKind, HarnessError, KernelConfig, ResultFile};
use depu::processes::{FiniteMarkovChain, ProcessKind};

fn tail_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Tail, 2024);
    cfg.process = Some(ProcessKind::MarkovChain {
        chain: FiniteMarkovChain::symmetric_two_state(0.3).unwrap(),
        start: None,
    });
    cfg.kernel = Some(KernelConfig::Mean { bound: 1.0 });
    cfg.t_grid = vec![20, 40, 80];
    cfg.x_grid = vec![0.05, 0.1, 0.2];
    cfg.replications = 300;
    cfg
}

fn run_with_threads(cfg: &ExperimentConfig, kind: ExperimentKind, threads: usize) -> harness::RunOutput {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(|| harness::run(cfg, kind))
        .unwrap()
}

fn result_file(dir: &Path) -> ResultFile {
    serde_json::from_str(&fs::read_to_string(dir.join("result.json")).unwrap()).unwrap()
}

#[test]
fn three_lengths_give_three_tail_csvs_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let output = harness::run(&tail_config(), ExperimentKind::Tail).unwrap();
    let written = emit_outputs(&output, dir.path()).unwrap();
    let mut names: Vec<String> = written
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names, ["config.json", "result.json", "tail_T20.csv", "tail_T40.csv", "tail_T80.csv"]);

    let csv = fs::read_to_string(dir.path().join("tail_T40.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x,empirical,stderr,bound"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    for row in &rows {
        assert!((0.0..=1.0).contains(&row[1]));
        assert!(row[3] > 0.0 && row[3] <= 2.0);
    }

    let file = result_file(dir.path());
    assert_eq!(file.seed, 2024);
    let config = ExperimentConfig::from_path(&dir.path().join("config.json")).unwrap();
    assert_eq!(config.experiment, Some(ExperimentKind::Tail));
    assert_eq!(config.t_grid, vec![20, 40, 80]);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let cfg = tail_config();
    let one = run_with_threads(&cfg, ExperimentKind::Tail, 1);
    let four = run_with_threads(&cfg, ExperimentKind::Tail, 4);
    assert_eq!(one.result, four.result);

    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    emit_outputs(&one, a.path()).unwrap();
    emit_outputs(&four, b.path()).unwrap();
    for name in ["config.json", "tail_T20.csv", "tail_T40.csv", "tail_T80.csv"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
    let (ra, rb) = (result_file(a.path()), result_file(b.path()));
    assert_eq!(ra.result, rb.result);
    assert_eq!(ra.checks, rb.checks);
}

#[test]
fn seed_changes_the_draws() {
    let cfg = tail_config();
    let mut other = cfg.clone();
    other.seed += 1;
    let a = harness::run(&cfg, ExperimentKind::Tail).unwrap();
    let b = harness::run(&other, ExperimentKind::Tail).unwrap();
    assert_ne!(a.result, b.result);
}

#[test]
fn dry_run_writes_an_empty_scaffold() {
    let mut cfg = tail_config();
    cfg.replications = 0;
    let output = harness::run(&cfg, ExperimentKind::Tail).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let written = emit_outputs(&output, dir.path()).unwrap();
    assert_eq!(written.len(), 2);
    match result_file(dir.path()).result {
        harness::ExperimentResult::Tail(t) => assert!(t.cells.is_empty()),
        other => panic!("unexpected result {other:?}"),
    }
}

#[test]
fn simulate_writes_one_csv_per_length() {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Simulate, 3);
    cfg.process = Some(ProcessKind::Ar1 {
        coef: 0.5,
        dim: 2,
        innovation_sd: 1.0,
    });
    cfg.t_grid = vec![10, 25];
    cfg.replications = 1;
    let output = harness::run(&cfg, ExperimentKind::Simulate).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_outputs(&output, dir.path()).unwrap();
    for t in [10, 25] {
        let csv = fs::read_to_string(dir.path().join(format!("path_T{t}.csv"))).unwrap();
        assert_eq!(csv.lines().count(), t + 1);
    }
}

#[test]
fn budget_and_config_errors_are_distinguished() {
    let mut cfg = tail_config();
    cfg.budget = 10.0;
    let err = harness::run(&cfg, ExperimentKind::Tail).unwrap_err();
    assert!(err.is_budget(), "{err}");

    let err = ExperimentConfig::from_json(r#"{"schema_version": 1, "seed": 1, "colour": "red"}"#).unwrap_err();
    assert!(matches!(err, HarnessError::Config(_)), "{err}");
    let err = ExperimentConfig::from_json(r#"{"schema_version": 9, "seed": 1}"#).unwrap_err();
    assert!(!err.is_budget());

    let mut no_kernel = tail_config();
    no_kernel.kernel = None;
    assert!(matches!(
        harness::run(&no_kernel, ExperimentKind::Tail),
        Err(HarnessError::Config(_))
    ));
}
