use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_gradcode");

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .output()
        .expect("spawn gradcode")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

// Small problem so every run finishes quickly.
const SMALL: &[&str] = &[
    "--d",
    "1500",
    "--p",
    "10",
    "--iterations",
    "12",
    "--auc-every",
    "4",
];

#[test]
fn build_then_verify_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("frac.json");
    let o = run(&[
        "scheme",
        "build",
        "--kind",
        "frac",
        "--n",
        "6",
        "--s",
        "2",
        "--out",
        p(&file),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(&["scheme", "verify", p(&file)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("b-span: ok (15 survivor sets"), "{text}");
    assert!(text.contains("robust to any 2 straggler(s)"), "{text}");

    let o = run(&["scheme", "inspect", p(&file)]);
    assert!(o.status.success());
    assert_eq!(
        stdout(&o)
            .lines()
            .filter(|l| l.starts_with("worker "))
            .count(),
        6
    );
}

#[test]
fn cyclic_build_prints_to_stdout_and_checks_h() {
    let o = run(&[
        "scheme", "build", "--kind", "cyc", "--n", "5", "--s", "2", "--seed", "4",
    ]);
    assert!(o.status.success());
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("cyc.json");
    fs::write(&file, &o.stdout).unwrap();
    let o = run(&["scheme", "verify", p(&file)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("h mds: ok (10 column sets"));
}

#[test]
fn worked_example_file_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("example.json");
    fs::write(
        &file,
        r#"{"version": 1, "kind": "cyc", "n": 3, "k": 3, "s": 1,
            "B": [[0.5, 1, 0], [0, 1, -1], [0.5, 0, 1]]}"#,
    )
    .unwrap();
    let o = run(&["scheme", "verify", p(&file)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("b-span: ok (3 survivor sets"));
    assert!(stdout(&o).contains("h mds: not checked"));
}

#[test]
fn broken_matrix_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.json");
    // Partition 0 is held by worker 0 only.
    fs::write(
        &file,
        r#"{"version": 1, "kind": "custom", "n": 3, "k": 3, "s": 1,
            "B": [[1, 1, 0], [0, 1, 1], [0, 0, 1]]}"#,
    )
    .unwrap();
    let o = run(&["scheme", "verify", p(&file)]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stdout(&o).contains("b-span: FAILED"));
}

#[test]
fn exit_codes() {
    // non-divisible fractional repetition
    let o = run(&["scheme", "build", "--kind", "frac", "--n", "5", "--s", "1"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).starts_with("error: "));
    // cyclic without a seed
    let o = run(&["scheme", "build", "--kind", "cyc", "--n", "5", "--s", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!stderr(&o).contains("error: error:"));
    let o = run(&["scheme", "verify", "/nonexistent/scheme.json"]);
    assert_eq!(o.status.code(), Some(5));
    let o = run(&[
        "plan", "--n", "4", "--s", "1", "--alpha", "0.5", "--seed", "1",
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn plan_reports_the_split() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plan.json");
    let o = run(&[
        "plan",
        "--n",
        "3",
        "--s",
        "1",
        "--alpha",
        "2",
        "--seed",
        "1",
        "--out",
        p(&file),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("partitions: 9"), "{text}");
    assert!(text.contains("0.444444"), "{text}");
    let plan = gradcode::scheme::import_plan(&fs::read_to_string(&file).unwrap()).unwrap();
    assert_eq!(plan.total_partitions(), 9);
}

#[test]
fn simulate_requires_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--strategy", "cyc", "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("missing seeds"), "{}", stderr(&o));
}

#[test]
fn simulate_writes_run_and_effective_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "simulate",
        "--strategy",
        "ignore",
        "--n",
        "6",
        "--s",
        "2",
        "--seed-all",
        "3",
    ];
    args.extend_from_slice(SMALL);
    args.extend_from_slice(&["--straggler-mode", "random", "--out", p(dir.path())]);
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("total sim time"));

    let csv = fs::read_to_string(dir.path().join("run.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("iteration,sim_time_s,loss,auc,survivors,strategy")
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 12);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r[0], (i + 1).to_string());
        assert_eq!(r[4].split(';').count(), 4);
        assert_eq!(r[5], "ignore-s2");
        assert_eq!(r[3].is_empty(), (i + 1) % 4 != 0);
    }

    // The effective config reproduces the run on its own.
    let again = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    let o = run(&["simulate", "--config", p(&cfg), "--out", p(again.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        csv,
        fs::read_to_string(again.path().join("run.csv")).unwrap()
    );
}

#[test]
fn simulate_matches_the_library() {
    use gradcode_core::learn::OptimizerConfig;
    use gradcode_core::sim::{
        run_training, DataSpec, Jitter, LatencyModel, SeedBundle, StragglerKind, StragglerMode,
        StragglerPolicy, StrategySpec, TrainingConfig,
    };
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "simulate",
        "--strategy",
        "frac",
        "--n",
        "6",
        "--s",
        "1",
        "--method",
        "nag",
        "--eta",
        "0.2",
        "--d",
        "1500",
        "--p",
        "10",
        "--iterations",
        "12",
        "--auc-every",
        "0",
        "--straggler-mode",
        "fixed",
        "--straggler-workers",
        "2",
        "--delay",
        "3",
        "--jitter-sigma",
        "0",
        "--seed-all",
        "11",
        "--out",
        p(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let lib = run_training(&TrainingConfig {
        label: None,
        n: 6,
        strategy: StrategySpec::Coded {
            kind: gradcode_core::CodeKind::FracRep,
            s: 1,
        },
        latency: LatencyModel {
            jitter: Jitter::None,
            ..LatencyModel::default()
        },
        policy: StragglerPolicy {
            mode: StragglerMode::FixedSet(vec![2]),
            kind: StragglerKind::FullDelay(3.0),
        },
        optimizer: OptimizerConfig::nag(0.2),
        data: DataSpec {
            d: 1500,
            p: 10,
            train_fraction: 0.8,
        },
        iterations: 12,
        auc_every: 0,
        seeds: SeedBundle::from_base(11),
        check_exact: false,
        keep_iterates: false,
    })
    .unwrap();
    let csv = fs::read_to_string(dir.path().join("run.csv")).unwrap();
    for (line, t) in csv.lines().skip(1).zip(&lib.traces) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[1].parse::<f64>().unwrap(), t.clock);
        assert_eq!(f[2].parse::<f64>().unwrap(), t.loss);
        assert!(!f[4].contains('2'), "straggler 2 used: {line}");
    }
}

#[test]
fn compare_bundle_aligns_four_series() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "compare",
        "--n",
        "10",
        "--s",
        "1",
        "--seed-all",
        "5",
        "--straggler-mode",
        "random",
    ];
    args.extend_from_slice(SMALL);
    args.extend_from_slice(&["--out", p(dir.path())]);
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));

    let series = fs::read_to_string(dir.path().join("series.csv")).unwrap();
    let mut labels: Vec<String> = series
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().to_string())
        .collect();
    assert_eq!(labels.len(), 4 * 12);
    labels.sort();
    labels.dedup();
    assert_eq!(labels.len(), 4);
    for label in &labels {
        assert!(dir
            .path()
            .join("runs")
            .join(format!("{label}.csv"))
            .exists());
        assert!(dir
            .path()
            .join("configs")
            .join(format!("{label}.json"))
            .exists());
    }
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);
    let grid = fs::read_to_string(dir.path().join("auc_vs_time.csv")).unwrap();
    assert!(grid.starts_with("sim_time_s,label,iterations_done,loss,auc"));
}

#[test]
fn compare_bundle_rejects_per_run_flags() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "compare",
        "--strategy",
        "cyc",
        "--seed-all",
        "1",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn compare_from_config_files_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let shared = r#""n": 6, "s": 2, "d": 1500, "p": 10, "iterations": 10, "straggler_mode": "random",
        "seeds": {"scheme": 1, "data": 2, "latency": 3, "straggler": 4}"#;
    fs::write(
        &a,
        format!(r#"{{"label": "coded", "strategy": "cyc", {shared}}}"#),
    )
    .unwrap();
    fs::write(
        &b,
        format!(r#"{{"label": "partial", "strategy": "partial-cyc", "alpha": 1.5, {shared}}}"#),
    )
    .unwrap();

    let outs: Vec<_> = (0..2)
        .map(|_| {
            let out = tempfile::tempdir().unwrap();
            let o = run(&[
                "compare",
                "--config",
                p(&a),
                "--config",
                p(&b),
                "--out",
                p(out.path()),
            ]);
            assert!(o.status.success(), "{}", stderr(&o));
            out
        })
        .collect();
    for file in [
        "summary.csv",
        "series.csv",
        "auc_vs_time.csv",
        "runs/coded.csv",
        "runs/partial.csv",
        "configs/coded.json",
    ] {
        let x = fs::read(outs[0].path().join(file)).unwrap();
        let y = fs::read(outs[1].path().join(file)).unwrap();
        assert_eq!(x, y, "{file} differs between identical runs");
    }
}

#[test]
fn compare_rejects_mismatched_datasets() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    fs::write(&a, r#"{"strategy": "cyc", "d": 1000, "p": 5, "seeds": {"scheme": 1, "data": 2, "latency": 3, "straggler": 4}}"#).unwrap();
    fs::write(&b, r#"{"strategy": "naive", "d": 1000, "p": 5, "seeds": {"scheme": 1, "data": 9, "latency": 3, "straggler": 4}}"#).unwrap();
    let o = run(&[
        "compare",
        "--config",
        p(&a),
        "--config",
        p(&b),
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}
