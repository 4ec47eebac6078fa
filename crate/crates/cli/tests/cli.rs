//! Drives the `linpot` binary end to end.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn linpot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_linpot"))
        .args(args)
        .env_remove("LINPOT_WORKERS")
        .output()
        .expect("binary runs")
}

fn config(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn unknown_flag_is_rejected() {
    let o = linpot(&[
        "run-bandit",
        "--config",
        &config("bandit_singleton.toml"),
        "--bogus",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn counterexample_y0_passes() {
    let o = linpot(&["counterexample", "--p", "0.05", "--y1", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("gamma_1            0.031875"));
}

#[test]
fn counterexample_y1_reports_reference_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let o = linpot(&[
        "counterexample",
        "--p",
        "0.05",
        "--y1",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let out = stdout(&o);
    assert!(out.contains("non-monotone: true"), "{out}");
    assert!(out.contains("posterior ratio    1"), "{out}");
    assert!(out.contains("gamma_2            0.0625"), "{out}");
    assert!(out.contains("equals reference 0.25: false"), "{out}");
    assert_eq!(o.status.code(), Some(1));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("counterexample.json")).unwrap())
            .unwrap();
    assert_eq!(json["gamma_2"], 0.0625);
}

#[test]
fn counterexample_rejects_bad_p() {
    assert_eq!(
        linpot(&["counterexample", "--p", "0.3"]).status.code(),
        Some(2)
    );
    assert_eq!(
        linpot(&["counterexample", "--y1", "2"]).status.code(),
        Some(2)
    );
}

#[test]
fn verify_lemmas_small_run_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = linpot(&[
        "verify-lemmas",
        "--instances",
        "30",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let out = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{out}");
    assert!(out.starts_with("lemma"));
    assert!(out.contains("max_violation") && out.contains("tolerance"));
    assert_eq!(out.matches("PASS").count(), 7);
    assert!(dir.path().join("lemmas.json").exists());
}

#[test]
fn verify_lemmas_zero_instances_is_invalid() {
    assert_eq!(
        linpot(&["verify-lemmas", "--instances", "0"]).status.code(),
        Some(2)
    );
}

#[test]
fn run_bandit_singleton_writes_zero_curve() {
    let dir = tempfile::tempdir().unwrap();
    let o = linpot(&[
        "run-bandit",
        "--config",
        &config("bandit_singleton.toml"),
        "--out",
        dir.path().to_str().unwrap(),
        "--workers",
        "2",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("regret_curve.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("t,mean_regret,stderr,eq4_bound,remark33_bound")
    );
    assert!(lines.all(|l| l.split(',').nth(1) == Some("0")));
    let potential = fs::read_to_string(dir.path().join("potential.csv")).unwrap();
    assert!(potential.starts_with("t,mean_gamma_quad,running_sum,thm23_bound\n"));
}

#[test]
fn run_bandit_is_byte_stable() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, workers) in [(&a, "1"), (&b, "3")] {
        let o = linpot(&[
            "run-bandit",
            "--config",
            &config("bandit_bernoulli_d3.toml"),
            "--out",
            dir.path().to_str().unwrap(),
            "--seed",
            "42",
            "--workers",
            workers,
        ]);
        assert_eq!(o.status.code(), Some(0));
    }
    for name in ["summary.json", "regret_curve.csv", "potential.csv"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name} differs"
        );
    }
}

#[test]
fn run_bandit_config_error_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "[prior]\nkind = \"gaussian\"\n").unwrap();
    let o = linpot(&["run-bandit", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));
}

#[test]
fn potential_trace_exact_tree_passes() {
    let o = linpot(&[
        "potential-trace",
        "--config",
        &config("potential_counterexample.toml"),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("exact outcome tree"));
}
