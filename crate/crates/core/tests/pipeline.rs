mod common;

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn elmd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_elmd")).args(args).output().expect("binary runs")
}

fn config(name: &str) -> String {
    common::configs_dir().join(name).to_string_lossy().into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn merton_analyze_reports_closed_form_fraction() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("merton.json");
    let o = elmd(&["analyze", "--config", &config("merton.json"), "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&out);
    assert_eq!(r["viability"]["status"], "viable");
    assert_eq!(r["bounds"]["case"], "P9");
    let p = r["growth"]["p_tilde"].as_f64().unwrap();
    assert!((p - 0.05 / 0.04).abs() < 1e-10, "{p}");
    assert!(r["verification"].is_null());
}

#[test]
fn arbitrage_model_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("arb.json");
    let o = elmd(&["analyze", "--config", &config("arbitrage.json"), "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let r = read_json(&out);
    assert_eq!(r["viability"]["status"], "arbitrage_plus");
    assert_eq!(r["viability"]["strategy"], 1);
    assert!(r["deflator"].is_null());
}

#[test]
fn arbitrage_verify_runs_the_demonstration() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("arb.json");
    let o = elmd(&["verify", "--config", &config("arbitrage.json"), "--out", path_str(&out), "--paths", "2000"]);
    assert_eq!(o.status.code(), Some(2));
    let r = read_json(&out);
    assert_eq!(r["arbitrage"]["pass"], true);
    assert_eq!(r["arbitrage"]["nondecreasing"], true);
}

#[test]
fn invalid_config_exits_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"a": 0.1, "c": -1.0, "horizon": 1.0, "epsilon": 0.2, "kappa": {"type": "atomic", "atoms": []}}"#)
        .unwrap();
    let out = dir.path().join("bad_out.json");
    let o = elmd(&["analyze", "--config", path_str(&cfg), "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains('c'));
    assert!(!out.exists());
}

#[test]
fn unknown_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("typo.json");
    std::fs::write(&cfg, r#"{"a": 0.1, "c": 0.1, "horizn": 1.0, "epsilon": 0.2, "kappa": {"type": "atomic", "atoms": []}}"#)
        .unwrap();
    let o = elmd(&["analyze", "--config", path_str(&cfg), "--out", path_str(&dir.path().join("o.json"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("horizn"));
}

#[test]
fn missing_config_file_exits_with_code_one() {
    let o = elmd(&["analyze", "--config", "/nonexistent/model.json", "--out", "/tmp/never.json"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn compound_poisson_verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cp.json");
    let o = elmd(&["verify", "--config", &config("compound_poisson.json"), "--out", path_str(&out), "--paths", "20000"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&out);
    assert_eq!(r["verification"]["all_pass"], true);
    assert_eq!(r["verification"]["n_paths"], 20000);
}

#[test]
fn negative_control_fails_and_names_the_test() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("neg.json");
    let o = elmd(&["verify", "--config", &config("negative_control.json"), "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("tv_bound"), "{stderr}");
    let r = read_json(&out);
    assert_eq!(r["verification"]["all_pass"], false);
}

#[test]
fn curve_csv_has_header_and_peak_near_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.json");
    let curve = dir.path().join("curve.csv");
    let o = elmd(&["analyze", "--config", &config("merton.json"), "--out", path_str(&out), "--curve", path_str(&curve)]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&curve).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("p,g,dg"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            (v[0], v[1])
        })
        .collect();
    assert!(rows.len() > 100);
    let best = rows.iter().copied().fold((f64::NAN, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    let spacing = rows[1].0 - rows[0].0;
    assert!((best.0 - 1.25).abs() <= spacing, "{best:?}");
}

#[test]
fn dumped_paths_satisfy_z_equals_l_over_x_tilde() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cp.json");
    let o = elmd(&[
        "analyze",
        "--config",
        &config("compound_poisson.json"),
        "--out",
        path_str(&out),
        "--dump-paths",
        "3",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for i in 0..3 {
        let f = dir.path().join(format!("cp_path_{i}.csv"));
        let text = std::fs::read_to_string(&f).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,S,L,X_tilde,Z"));
        let mut n = 0;
        for l in lines {
            let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            assert!((v[4] - v[2] / v[3]).abs() <= 1e-12 * v[4].abs().max(1.0), "{l}");
            n += 1;
        }
        assert!(n >= 17);
    }
}

#[test]
fn overrides_reach_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cp.json");
    let o = elmd(&[
        "verify",
        "--config",
        &config("compound_poisson.json"),
        "--out",
        path_str(&out),
        "--paths",
        "5000",
        "--steps",
        "8",
        "--seed",
        "7",
        "--epsilon",
        "0.4",
        "--threads",
        "2",
    ]);
    assert!(o.status.code().is_some_and(|c| c == 0 || c == 3));
    let r = read_json(&out);
    assert_eq!(r["seed"], 7);
    assert_eq!(r["verification"]["n_steps"], 8);
    assert_eq!(r["deflator"]["epsilon"], 0.4);
}
