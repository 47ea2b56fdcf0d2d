// Copyright 2026 nrdisp Contributors
// SPDX-License-Identifier: Apache-2.0

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn nrdisp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nrdisp")).args(args).output().expect("spawn nrdisp")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn qubit_ramsey_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = nrdisp(&["simulate", "--protocol", "qubit-ramsey", "--preset", "device-a", "--out", out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("qubit_ramsey.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().contains("phi"));
    assert_eq!(lines.count(), 98);
    assert!(!csv.contains('\r'));
    let meta = read_json(&dir.path().join("qubit_ramsey.meta.json"));
    assert_eq!(meta["command"], "simulate");
    assert_eq!(meta["config"]["protocol"], "qubit-ramsey");
    assert!(meta["config"]["source"]["params"]["kappa"].as_f64().is_some());
    assert_eq!(meta["config"]["protocol_config"]["n0"], 3.0);
}

#[test]
fn every_protocol_runs() {
    for protocol in ["cavity-ramsey", "cavity-t1", "photon-calibration", "measurement-set", "fwm"] {
        let dir = tempfile::tempdir().unwrap();
        let o = nrdisp(&["simulate", "--protocol", protocol, "--preset", "device-b", "--out", dir.path().to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{protocol}: {}", stderr(&o));
        let stem = protocol.replace('-', "_");
        assert!(dir.path().join(format!("{stem}.csv")).exists(), "{protocol}");
        assert!(dir.path().join(format!("{stem}.meta.json")).exists(), "{protocol}");
    }
}

#[test]
fn cw_cross_check_columns_agree() {
    let dir = tempfile::tempdir().unwrap();
    let o = nrdisp(&[
        "simulate", "--protocol", "cw-sweep", "--backend", "oracle", "--cross-check", "--preset", "device-a",
        "--detunings", "-3:3:7", "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("cw_sweep.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |n: &str| header.iter().position(|h| *h == n).unwrap_or_else(|| panic!("no column {n}"));
    let (s, os, g, og) = (col("stark_shift"), col("oracle_stark_shift"), col("dephasing_rate"), col("oracle_dephasing_rate"));
    let mut rows = 0;
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap_or(f64::NAN)).collect();
        assert!((v[s] - v[os]).abs() <= 1e-3 * v[s].abs(), "{line}");
        assert!((v[g] - v[og]).abs() <= 1e-3 * v[g].abs(), "{line}");
        rows += 1;
    }
    assert_eq!(rows, 7);
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = nrdisp(&["simulate", "--protocol", "cw-sweep", "--detunings", "", "--out", out]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("--detunings"), "{}", stderr(&o));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(code(&nrdisp(&["extract", bad.to_str().unwrap(), "--out", out])), 2);
    assert_eq!(code(&nrdisp(&["simulate", "--protocol", "nope", "--out", out])), 2);
    assert_eq!(code(&nrdisp(&["simulate", "--protocol", "qubit-ramsey", "--preset", "device-z", "--out", out])), 2);
    assert_eq!(code(&nrdisp(&["simulate", "--protocol", "qubit-ramsey", "--backend", "quantum", "--out", out])), 2);

    let params = dir.path().join("p.json");
    std::fs::write(&params, r#"{"delta_c":0,"lambda":1,"kappa":-1,"gamma_nr":0,"theta":0,"eta":0}"#).unwrap();
    let o = nrdisp(&["simulate", "--protocol", "qubit-ramsey", "--params", params.to_str().unwrap(), "--out", out]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn truncation_leak_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = nrdisp(&["compare-oracle", "--preset", "device-a", "--n0", "8", "--n-max", "12", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).to_lowercase().contains("trunc"), "{}", stderr(&o));
}

#[test]
fn unphysical_measurements_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let ms = dir.path().join("ms.json");
    // κ_g + κ_e < 0 after removing the sector split is impossible, but a
    // decay ratio much larger than the total width forces κ < 0.
    std::fs::write(
        &ms,
        r#"{"omega_g":1,"omega_e":-1,"kappa_g":0.1,"kappa_e":0.1,"phi":-3.0,"zeta":0.01,"n0":3,"t_f":0.7}"#,
    )
    .unwrap();
    let o = nrdisp(&["extract", ms.to_str().unwrap(), "--mc-samples", "0", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("physical"), "{}", stderr(&o));
}

#[test]
fn round_trip_fixture_recovers_preset() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = nrdisp(&["simulate", "--protocol", "measurement-set", "--preset", "device-b", "--out", out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let ms = dir.path().join("measurements.json");
    let ex = dir.path().join("ex");
    let o = nrdisp(&["extract", ms.to_str().unwrap(), "--mc-samples", "0", "--out", ex.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = read_json(&ex.join("extraction.json"));
    assert!(r["uncertainty"].is_null());
    let want = read_json(&dir.path().join("measurement_set.meta.json"))["config"]["source"]["params"].clone();
    for key in ["lambda", "kappa", "gamma_nr", "theta", "eta"] {
        let (a, b) = (r["params"][key].as_f64().unwrap(), want[key].as_f64().unwrap());
        assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0), "{key}: {a} vs {b}");
    }
    let meta = read_json(&ex.join("extraction.meta.json"));
    assert_eq!(meta["config"]["run"]["mc_samples"], 0);
    assert_eq!(meta["config"]["measurements"]["t_f"], 0.7);
}

#[test]
fn monte_carlo_extraction_writes_histograms() {
    let dir = tempfile::tempdir().unwrap();
    let ms = dir.path().join("ms.json");
    let p = r#"{"omega_g":9.42,"omega_e":5.65,"kappa_g":12.36,"kappa_e":9.0,"phi":-1.2,"zeta":0.5,"n0":3,"t_f":0.7,
        "sigmas":{"omega_g":0.01,"omega_e":0.01,"kappa_g":0.05,"kappa_e":0.05,"phi":0.01,"zeta":0.005,"n0":0.03}}"#;
    std::fs::write(&ms, p).unwrap();
    let out = dir.path().join("mc");
    let o = nrdisp(&["extract", ms.to_str().unwrap(), "--mc-samples", "2000", "--seed", "4", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = read_json(&out.join("extraction.json"));
    assert_eq!(r["uncertainty"].as_array().unwrap().len(), 10);
    assert_eq!(r["diagnostics"]["seed"], 4);
    assert!(out.join("histogram_kappa.csv").exists());

    let o = nrdisp(&["extract", ms.to_str().unwrap(), "--mc-samples", "500", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn compare_oracle_reports_pass() {
    let dir = tempfile::tempdir().unwrap();
    let o = nrdisp(&["compare-oracle", "--preset", "reciprocal", "--points", "41", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS"));
    let r = read_json(&dir.path().join("report.json"));
    assert_eq!(r["pass"], true);
}

#[test]
fn worker_override_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_nrdisp"))
        .args(["simulate", "--protocol", "qubit-ramsey", "--out", dir.path().to_str().unwrap()])
        .env("NRDISP_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}
