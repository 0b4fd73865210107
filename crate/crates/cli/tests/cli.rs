use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn spikedec(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spikedec")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout))
    })
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn help_exits_zero() {
    let tmp = TempDir::new().unwrap();
    let out = spikedec(&["--help"], tmp.path());
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["synthesize", "solve", "esprit", "pgd", "certify", "sweep"] {
        assert!(text.contains(sub), "help lists {sub}");
    }
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let out = spikedec(&["solve", "--frobnicate"], tmp.path());
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(code(&spikedec(&["transmogrify"], tmp.path())), 1);
}

#[test]
fn bad_configs_exit_one() {
    let tmp = TempDir::new().unwrap();
    let unknown = write(tmp.path(), "unknown.json", r#"{"sigma": 0.1}"#);
    assert_eq!(code(&spikedec(&["solve", "--config", &unknown], tmp.path())), 1);
    let crowded = write(tmp.path(), "crowded.json", r#"{"r": 8, "delta_min": 0.2}"#);
    assert_eq!(code(&spikedec(&["solve", "--config", &crowded], tmp.path())), 1);
    assert_eq!(code(&spikedec(&["solve", "--config", "missing.json"], tmp.path())), 1);
    // a sweep without a sweep section
    assert_eq!(code(&spikedec(&["sweep"], tmp.path())), 1);
    assert_eq!(code(&spikedec(&["sweep", "--trials", "0"], tmp.path())), 1);
}

#[test]
fn numerical_failure_exits_two() {
    let tmp = TempDir::new().unwrap();
    // band narrower than the sampling grid: the gain matrix has zeros
    let cfg = write(tmp.path(), "sinc.json", r#"{"psf": {"kind": "truncated_sinc", "bandwidth": 10}}"#);
    let out = spikedec(&["esprit", "--config", &cfg], tmp.path());
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn solve_json_has_the_documented_keys() {
    let tmp = TempDir::new().unwrap();
    let out = spikedec(&["solve", "--json", "--seed", "7", "--out", "run"], tmp.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    for key in ["tau_hat", "A_hat", "md", "eta", "trace_path"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    let tau = v["tau_hat"].as_array().unwrap();
    assert_eq!(tau.len(), 3);
    let a = v["A_hat"].as_array().unwrap();
    assert_eq!(a.len(), 3);
    assert_eq!(a[0].as_array().unwrap().len(), 5);
    assert_eq!(a[0][0].as_array().unwrap().len(), 2, "complex numbers are [re, im]");
    let md = v["md"].as_f64().unwrap();
    assert!((0.0..=0.5).contains(&md), "md {md} on a unit torus");

    let trace = fs::read_to_string(tmp.path().join(v["trace_path"].as_str().unwrap())).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("k,loss,grad_norm,eta,precond_cond,halvings"));
    assert!(lines.count() >= 2);
}

#[test]
fn synthesize_then_solve_from_files_matches_direct_solve() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    assert_eq!(code(&spikedec(&["synthesize", "--seed", "11", "--out", "inst"], dir)), 0);

    let csv = fs::read_to_string(dir.join("inst/measurements.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("freq_index,snapshot,re,im"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 31 * 5);
    assert!(rows[0].starts_with("-15,0,"));

    let truth: Value = serde_json::from_str(&fs::read_to_string(dir.join("inst/truth.json")).unwrap()).unwrap();
    for key in ["T", "n", "tau", "amplitudes"] {
        assert!(truth.get(key).is_some(), "truth lacks {key}");
    }

    let direct = stdout_json(&spikedec(&["solve", "--json", "--seed", "11", "--out", "a"], dir));
    let from_files = stdout_json(&spikedec(
        &["solve", "--json", "--input", "inst/measurements.json", "--truth", "inst/truth.json", "--out", "b"],
        dir,
    ));
    assert_eq!(direct["tau_hat"], from_files["tau_hat"]);
    assert_eq!(direct["A_hat"], from_files["A_hat"]);
    assert_eq!(direct["eta"], from_files["eta"]);
}

#[test]
fn pgd_refines_from_a_supplied_start() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let cfg = write(dir, "clean.json", r#"{"psf": {"kind": "gaussian", "sigma": 0.05}, "snr_db": null}"#);
    assert_eq!(code(&spikedec(&["synthesize", "--config", &cfg, "--out", "inst"], dir)), 0);

    let mut start: Value = serde_json::from_str(&fs::read_to_string(dir.join("inst/truth.json")).unwrap()).unwrap();
    for t in start["tau"].as_array_mut().unwrap() {
        *t = Value::from(t.as_f64().unwrap() + 0.004);
    }
    fs::write(dir.join("start.json"), start.to_string()).unwrap();

    let out = spikedec(
        &[
            "pgd", "--config", &cfg, "--input", "inst/measurements.json", "--truth", "inst/truth.json",
            "--init", "start.json", "--out", "run", "--json",
        ],
        dir,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert!(v["md"].as_f64().unwrap() < 1e-9, "md {}", v["md"]);
    assert!(dir.join("run/trace.csv").exists());

    assert_eq!(code(&spikedec(&["pgd", "--config", &cfg], dir)), 1, "--init is required");
}

#[test]
fn certify_reports_n_for_dirac() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "dirac.json", r#"{"psf": {"kind": "dirac"}, "snr_db": null}"#);
    let out = spikedec(&["certify", "--config", &cfg], tmp.path());
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    let line = text.lines().find(|l| l.starts_with("T·E_g")).expect("T·E_g row");
    let value: f64 = line.split_whitespace().last().unwrap().parse().unwrap();
    assert!((value - 31.0).abs() < 1e-9, "{line}");

    let v = stdout_json(&spikedec(&["certify", "--config", &cfg, "--json"], tmp.path()));
    assert!((v["T_E_g"].as_f64().unwrap() - 31.0).abs() < 1e-9);
    assert_eq!(v["metrics"]["rho_g"].as_f64(), Some(0.0));
    assert_eq!(v["theorem1"]["applicable"], Value::Bool(true));
}

#[test]
fn sweep_writes_csv_svg_and_findings() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "sweep.json", r#"{"sweep": {"axis": "sigma", "values": [0.05, 0.1, 0.15]}, "threads": 2}"#);
    let out = spikedec(&["sweep", "--config", &cfg, "--trials", "4", "--seed", "5", "--out", "table"], tmp.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("table");

    let csv = fs::read_to_string(dir.join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("sweep_value,trials,failed,md_esprit_max,md_esprit_median,md_pgd_max,md_pgd_median,eta_final_median,gamma_inf_median")
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.split(',').nth(1) == Some("4")));

    let svg = fs::read_to_string(dir.join("sweep.svg")).unwrap();
    assert!(svg.contains(r#"viewBox="0 0 800 600""#));
    assert!(svg.matches("<polyline").count() >= 2);

    let findings = fs::read_to_string(dir.join("findings.csv")).unwrap();
    assert!(findings.starts_with("seed,kind,measured,bound,detail"));
    assert!(dir.join("trials.csv").exists());

    // same seed, different output directory: identical table
    spikedec(&["sweep", "--config", &cfg, "--trials", "4", "--seed", "5", "--out", "again"], tmp.path());
    assert_eq!(csv, fs::read_to_string(tmp.path().join("again/sweep.csv")).unwrap());
}
