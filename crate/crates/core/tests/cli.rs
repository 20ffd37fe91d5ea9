use std::fs;
use std::path::Path;

use trendkit::cli::run_cli;

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> i32 {
    let mut argv: Vec<String> = vec![
        "trendkit".into(),
        cmd.into(),
        "--config".into(),
        config.to_string_lossy().into_owned(),
        "--out-dir".into(),
        out.to_string_lossy().into_owned(),
        "--quiet".into(),
    ];
    argv.extend(extra.iter().map(|s| s.to_string()));
    run_cli(&argv)
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const RATES: &str = r#"{
  "experiment": "rates",
  "scenario": { "trend": { "name": "cosine" }, "x0": 1, "T": 1, "dt": 1e-3 },
  "eps_list": [0.1, 0.05, 0.025],
  "reps": 20, "c": 0.3, "d": 0.7, "n_grid": 5
}"#;

#[test]
fn kernel_check_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = write(dir.path(), "ok.json", r#"{ "kernel": { "builtin": "epanechnikov" }, "k": 1 }"#);
    assert_eq!(run("kernel-check", &ok, &dir.path().join("a"), &[]), 0);
    let csv = fs::read_to_string(dir.path().join("a/kernel_check.csv")).unwrap();
    assert!(csv.starts_with("j,moment,required,pass\n"));
    let bad = write(dir.path(), "bad.json", r#"{ "kernel": { "builtin": "epanechnikov" }, "k": 2 }"#);
    assert_eq!(run("kernel-check", &bad, &dir.path().join("b"), &[]), 3);
    let custom = write(
        dir.path(),
        "custom.json",
        r#"{ "kernel": { "coefficients": [0.75, 0, -0.75], "support": [-1, 1] }, "k": 1 }"#,
    );
    assert_eq!(run("kernel-check", &custom, &dir.path().join("c"), &[]), 0);
}

#[test]
fn rates_are_byte_identical_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "rates.json", RATES);
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    assert_eq!(run("rates", &cfg, &a, &["--seed", "42"]), 0);
    assert_eq!(run("rates", &cfg, &b, &["--seed", "42", "--workers", "3"]), 0);
    assert_eq!(run("rates", &cfg, &c, &["--seed", "43"]), 0);
    let read = |d: &Path| fs::read(d.join("rates.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
    let text = String::from_utf8(read(&a)).unwrap();
    assert!(text.starts_with("eps,phi,sup_mse,ci,reps\n"));
    assert!(!text.contains('\r'));
}

#[test]
fn effective_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "rates.json", RATES);
    let first = dir.path().join("first");
    assert_eq!(run("rates", &cfg, &first, &["--seed", "7"]), 0);
    let echoed = first.join("effective_config.json");
    let second = dir.path().join("second");
    assert_eq!(run("rates", &echoed, &second, &[]), 0);
    for f in ["rates.csv", "rate_fit.csv"] {
        assert_eq!(fs::read(first.join(f)).unwrap(), fs::read(second.join(f)).unwrap(), "{f}");
    }
    let a = fs::read_to_string(&echoed).unwrap();
    let b = fs::read_to_string(second.join("effective_config.json")).unwrap();
    assert_eq!(a.replace("first", "second"), b);
}

#[test]
fn boundary_violation_names_the_window() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "est.json",
        r#"{
  "scenario": { "trend": { "name": "cosine" }, "x0": 1, "T": 1, "dt": 1e-3, "eps": 0.05 },
  "t_list": [0.02]
}"#,
    );
    assert_eq!(run("estimate", &cfg, &dir.path().join("out"), &[]), 1);
    let err = trendkit::estimator::estimate_at(
        &trendkit::simulate_path(&trendkit::Scenario::new(trendkit::TrendSpec::cosine(1.0, 1.0), 1.0, 1.0, 1e-3), 0)
            .unwrap(),
        &trendkit::Kernel::epanechnikov(),
        0.1357,
        0.02,
    )
    .unwrap_err()
    .to_string();
    for needle in ["t = 0.02", "phi = 0.1357", "[A, B] = [-1, 1]", "T = 1"] {
        assert!(err.contains(needle), "{err}");
    }
}

#[test]
fn configuration_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let typo = write(dir.path(), "typo.json", &RATES.replace("\"reps\"", "\"bandwith\": 0.1, \"reps\""));
    assert_eq!(run("rates", &typo, &out, &[]), 1);
    let wrong = write(dir.path(), "wrong.json", RATES);
    assert_eq!(run("coupling", &wrong, &out, &[]), 1);
    assert_eq!(run("rates", &dir.path().join("missing.json"), &out, &[]), 1);
    assert_eq!(run_cli(&["trendkit".into(), "no-such-command".into()]), 1);
}

#[test]
fn divergence_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "blow.json",
        r#"{
  "scenario": {
    "trend": { "name": "constant", "params": { "value": 0 } },
    "volatility": { "kind": "ou", "params": { "theta": 0, "eta": 1e13 } },
    "x0": 0, "T": 1, "dt": 1e-2, "eps": 0.1
  }
}"#,
    );
    assert_eq!(run("simulate", &cfg, &dir.path().join("out"), &[]), 2);
}

#[test]
fn simulate_and_limit_write_their_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sim.json",
        r#"{
  "scenario": { "trend": { "name": "negexp_linear" }, "x0": 1, "T": 1, "dt": 1e-2, "eps": 0.1 },
  "n_paths": 3
}"#,
    );
    let out = dir.path().join("out");
    assert_eq!(run("simulate", &cfg, &out, &[]), 0);
    assert_eq!(run("limit", &cfg, &out, &[]), 0);
    for f in ["path_000000.csv", "path_000002.csv", "limit.csv", "effective_config.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let limit = fs::read_to_string(out.join("limit.csv")).unwrap();
    assert_eq!(limit.lines().count(), 102);
}
