use std::path::Path;
use std::process::{Command, Output};

use liouville_lab::config::RunConfig;
use liouville_lab::verdict::VerdictFile;

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_liouville-lab")).args(args).env("LIOUVILLE_LAB_THREADS", "1").output().expect("binary runs")
}

fn verdicts(dir: &Path) -> VerdictFile {
    serde_json::from_slice(&std::fs::read(dir.join("verdicts.json")).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn missing_surface_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = lab(&["bubble", "--alpha", "0", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("surface"));
}

#[test]
fn malformed_flags_are_usage_errors() {
    assert_eq!(lab(&["bubble", "--surface", "cube:3"]).status.code(), Some(2));
    assert_eq!(lab(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn help_documents_every_flag() {
    let out = lab(&["scan", "--help"]);
    let text = String::from_utf8_lossy(&out.stdout);
    for flag in ["--config", "--surface", "--alpha", "--lmax", "--rho", "--singular", "--out", "--seed", "--resume", "--jobs"] {
        assert!(text.contains(flag), "{flag} missing from help");
    }
}

#[test]
fn bubble_writes_outputs_and_echoes_config() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("b");
    let out = lab(&["bubble", "--alpha", "0.5", "--lmax", "40", "--surface", "torus:64", "--out", dir.to_str().unwrap()]);
    assert!(out.status.code().is_some());
    for f in ["bubble_scan.csv", "summary.json", "verdicts.json", "config.toml"] {
        assert!(dir.join(f).exists(), "{f} missing");
    }
    let echoed = RunConfig::load(&dir.join("config.toml")).unwrap();
    assert_eq!(echoed.bubble.alphas, vec![0.5]);
    assert_eq!(echoed.bubble.lambda_max, Some(40.0));
    assert_eq!(echoed.surface.unwrap().to_string(), "torus:64x64");
    let v = verdicts(&dir);
    assert_eq!(v.command, "bubble");
    assert_eq!(out.status.code(), Some(if v.all_pass { 0 } else { 1 }));
}

#[test]
fn failed_verdicts_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "mt.toml",
        r#"
surface = "torus:64"

[[mt.families]]
id = "subsharp"
center = [0.5, 0.5]
variant = "closed"
coeff = 0.0716197243913529
expect = { kind = "exceeds", reference = 2.0, margin = 1000.0 }
"#,
    );
    let dir = tmp.path().join("m");
    let out = lab(&["mt", "-c", &cfg, "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!verdicts(&dir).all_pass);
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL mt.subsharp.rise_over_reference"));
    assert!(dir.join("deficit_scan.csv").exists());
}

#[test]
fn echoed_config_reproduces_verdicts() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let out = lab(&["solve", "--surface", "torus:32", "--rho", "6.0", "--singular", "0.5,0.5,0.5", "--out", a.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let echoed = a.join("config.toml");
    assert_eq!(lab(&["solve", "-c", echoed.to_str().unwrap(), "--out", b.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(std::fs::read(a.join("verdicts.json")).unwrap(), std::fs::read(b.join("verdicts.json")).unwrap());
    assert_eq!(std::fs::read(a.join("solution.csv")).unwrap(), std::fs::read(b.join("solution.csv")).unwrap());
}

#[test]
fn several_configs_run_concurrently_into_separate_directories() {
    let tmp = tempfile::tempdir().unwrap();
    let c1 = write(tmp.path(), "one.toml", "surface = \"torus:32\"\nrho = 3.0\n");
    let c2 = write(tmp.path(), "two.toml", "surface = \"sphere:17x34\"\nrho = 5.0\n");
    let dir = tmp.path().join("runs");
    let out = lab(&["solve", "-c", &c1, "-c", &c2, "--jobs", "2", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for run in ["run0", "run1"] {
        assert!(verdicts(&dir.join(run)).all_pass);
    }
}

#[test]
fn conc_writes_report_and_heatmaps() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "conc.toml",
        r#"
surface = "torus:32"
seed = 3

[conc]
pairs = 100

[[conc.densities]]
id = "bump"
density = { kind = "bumps", centers = [[0.25, 0.75]], width = 0.1 }
checks = [{ kind = "beta_near", chart = [0.25, 0.75], cells = 2.0 }]
"#,
    );
    let dir = tmp.path().join("c");
    let out = lab(&["conc", "-c", &cfg, "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    for f in ["report.json", "sigma_bump.csv", "t_bump.csv"] {
        assert!(dir.join(f).exists(), "{f} missing");
    }
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("report.json")).unwrap()).unwrap();
    assert!(report["densities"][0]["tau_source"].is_object() || report["densities"][0]["tau_source"].is_string());
    assert!(report["coverings"]["torus:32x32"]["k"].as_u64().unwrap() > 0);
}

#[test]
fn threshold_failure_is_a_structured_record() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "conc.toml",
        r#"
surface = "torus:16"

[conc]
tau = 0.9
pairs = 0

[[conc.densities]]
id = "flat"
density = { kind = "uniform" }
heatmaps = false
"#,
    );
    let dir = tmp.path().join("t");
    let out = lab(&["conc", "-c", &cfg, "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("report.json")).unwrap()).unwrap();
    assert!(report["densities"][0]["error"].as_str().unwrap().contains("threshold"));
}

#[test]
fn resumed_scan_matches_a_fresh_scan() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "scan.toml",
        r#"
surface = "torus:32"
singular = [{ chart = [0.5, 0.5], alpha = 0.5 }]

[scan]
grid = { kind = "linear", from = 2.0, to = 10.0, count = 5 }
checks = [{ kind = "compactness", window = [3.0, 9.0] }]
"#,
    );
    let fresh = tmp.path().join("fresh");
    assert_eq!(lab(&["scan", "-c", &cfg, "--out", fresh.to_str().unwrap()]).status.code(), Some(0));

    // interrupt after the first two records, then resume
    let partial = tmp.path().join("partial");
    let short = write(tmp.path(), "short.toml", &std::fs::read_to_string(&cfg).unwrap().replace("to = 10.0, count = 5", "to = 4.0, count = 2"));
    assert_eq!(lab(&["scan", "-c", &short, "--out", partial.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(lab(&["scan", "-c", &cfg, "--out", partial.to_str().unwrap(), "--resume"]).status.code(), Some(0));

    let rhos = |dir: &Path| -> Vec<f64> {
        std::fs::read_to_string(dir.join("trace.jsonl"))
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["rho"].as_f64().unwrap())
            .collect()
    };
    assert_eq!(rhos(&fresh), rhos(&partial));
    assert_eq!(std::fs::read(fresh.join("verdicts.json")).unwrap(), std::fs::read(partial.join("verdicts.json")).unwrap());

    // resuming a finished scan changes nothing
    let before = std::fs::read(partial.join("trace.jsonl")).unwrap();
    assert_eq!(lab(&["scan", "-c", &cfg, "--out", partial.to_str().unwrap(), "--resume"]).status.code(), Some(0));
    assert_eq!(before, std::fs::read(partial.join("trace.jsonl")).unwrap());
}

#[test]
fn sphere_nonexistence_is_flagged_qualitative() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "scan.toml",
        r#"
surface = "sphere:1024"
singular = [{ chart = [0.0, 0.0], alpha = 0.5 }]

[scan]
grid = { kind = "list", values = [15.707963267948966] }
continue_after_failure = true
checks = [{ kind = "nonexistence" }]
"#,
    );
    let dir = tmp.path().join("s");
    let out = lab(&["scan", "-c", &cfg, "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let q: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("quantization.json")).unwrap()).unwrap();
    assert_eq!(q["checks"][0]["qualitative"], serde_json::Value::Bool(true));
}
