use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn harmstrat(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_harmstrat"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const SMALL: [&str; 6] = [
    "--set",
    "cells=32",
    "--set",
    "minkowski_scales=0.0625,0.03125",
    "--set",
    "r=0.0625",
];

#[test]
fn malformed_map_file_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let map = dir.path().join("map.txt");
    fs::write(&map, "# header next\n3 3 1 0.5 1\n0 0 0 1 0 oops\n").unwrap();
    let out = harmstrat(
        &["analyze", "--set", &format!("map_file={}", map.display())],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let diag: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(diag["error"]["line"], 3);
}

#[test]
fn unknown_keys_and_bad_values_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    for set in ["bogus=1", "rho=0.5", "formats=xml", "k=3"] {
        let out = harmstrat(&["analyze", "--set", set], dir.path());
        assert_eq!(out.status.code(), Some(2), "{set}");
    }
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "k = 0\nnot a pair\n").unwrap();
    let out = harmstrat(&["analyze", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let diag: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(diag["error"]["line"], 2);
}

#[test]
fn constant_map_has_empty_strata() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["analyze", "--set", "map=constant"];
    args.extend(SMALL);
    let out = harmstrat(&args, dir.path());
    assert_eq!(out.status.code(), Some(0));
    let strata = fs::read_to_string(dir.path().join("strata.csv")).unwrap();
    assert_eq!(strata.lines().count(), 1);
    let summary = json(&dir.path().join("summary.json"));
    for s in summary["scales"].as_array().unwrap() {
        assert_eq!(s["strata_points"], 0);
        assert_eq!(s["induction"]["final_content"], 0.0);
    }
    assert_eq!(summary["epsilon_source"], "fallback");
}

#[test]
fn config_file_is_echoed_and_overrides_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "map = constant\ncells = 16\nformats = json\n").unwrap();
    let out = harmstrat(
        &[
            "analyze",
            "--config",
            cfg.to_str().unwrap(),
            "--set",
            "cells=32",
            "--set",
            "minkowski_scales=0.0625",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let summary = json(&dir.path().join("summary.json"));
    assert_eq!(summary["config"]["cells"], "32");
    assert_eq!(summary["config"]["map"], "constant");
    assert!(!dir.path().join("strata.csv").exists());
}

#[test]
fn analyze_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        assert_eq!(
            harmstrat(&[&["analyze"][..], &SMALL[..]].concat(), d.path())
                .status
                .code(),
            Some(0)
        );
    }
    for f in ["summary.json", "strata.csv", "minkowski.csv", "covering.txt"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn zero_tolerance_fails_monotonicity() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "verify",
        "--set",
        "verify_suites=monotonicity",
        "--set",
        "tolerance=0",
        "--set",
        "verify_centers=2",
        "--set",
        "verify_cells=32",
        "--set",
        "extension_cells=16",
    ];
    let out = harmstrat(&args, dir.path());
    assert_eq!(out.status.code(), Some(1));
    let report = json(&dir.path().join("verify_report.json"));
    assert_eq!(report["suites"][0]["status"], "fail");
}

#[test]
fn zero_restarts_skips_the_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let out = harmstrat(
        &[
            "verify",
            "--set",
            "verify_suites=beta_oracle",
            "--set",
            "oracle_restarts=0",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let report = json(&dir.path().join("verify_report.json"));
    assert_eq!(report["suites"][0]["status"], "skipped");
}

#[test]
fn cover_output_passes_the_discrete_check() {
    let dir = tempfile::tempdir().unwrap();
    let out = harmstrat(&["cover", "--set", "cells=32", "--set", "r=0.0625"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let covering = dir.path().join("covering.txt");
    let report = json(&dir.path().join("cover_report.json"));
    assert_eq!(report["induction"]["pass"], true);
    let out = harmstrat(
        &["reifenberg", "--set", &format!("covering_file={}", covering.display())],
        &dir.path().join("reif"),
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&dir.path().join("reif/reifenberg_report.json"))["pass"], true);
}

#[test]
fn planar_covering_fails_reifenberg() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("3 1 64\n");
    for i in 0..8 {
        for j in 0..8 {
            text.push_str(&format!(
                "{} {} 0 0.125 r-ball\n",
                (i as f64 - 3.5) / 8.0,
                (j as f64 - 3.5) / 8.0
            ));
        }
    }
    let covering = dir.path().join("plane.txt");
    fs::write(&covering, text).unwrap();
    let out = harmstrat(
        &["reifenberg", "--set", &format!("covering_file={}", covering.display())],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&dir.path().join("reifenberg_report.json"))["pass"], false);
}

#[test]
fn collinear_measure_has_zero_beta() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("3 10\n");
    for i in 0..10 {
        text.push_str(&format!("{} 0 0 1\n", i as f64 / 10.0));
    }
    let measure = dir.path().join("line.txt");
    fs::write(&measure, text).unwrap();
    let out = harmstrat(
        &[
            "beta",
            "--set",
            &format!("measure_file={}", measure.display()),
            "--set",
            "k=1",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("beta_profile.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 10 * 7);
    let max = json(&dir.path().join("summary.json"))["max_beta2"].as_f64().unwrap();
    assert!(max < 1e-24, "{max}");
}
