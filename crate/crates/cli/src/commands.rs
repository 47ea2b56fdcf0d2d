// Copyright 2026 nrdisp Contributors
// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};

use nrdisp_core::experiments::{
    cavity_ramsey, cavity_ramsey_trace, cavity_t1, cavity_t1_trace, cw_sweep, fwm_experiment,
    measurement_set, photon_calibration, qubit_ramsey, Backend, CwOptions, MeasurementSet,
    ProtocolConfig,
};
use nrdisp_core::extraction::{
    extract, freedman_diaconis_bins, histogram, monte_carlo_samples, summarize_samples,
    MIN_MC_SAMPLES, QUANTITY_NAMES,
};
use nrdisp_core::io::{write_json, CsvTable, VERSION};
use nrdisp_core::oracle::{compare_coherent, gamma_f_for_efficiency, FwmSpec, HilbertSpec, OracleOptions};
use nrdisp_core::{mhz, Error, QubitSector, Result};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{CwConfig, FwmConfig, ResolvedSource};

pub const PROTOCOLS: [&str; 7] = [
    "qubit-ramsey",
    "cavity-ramsey",
    "cavity-t1",
    "photon-calibration",
    "measurement-set",
    "cw-sweep",
    "fwm",
];

/// Everything `simulate` needs after flags and config file are merged.
#[derive(Debug, Clone, Serialize)]
pub struct SimulateRun {
    pub protocol: String,
    pub source: ResolvedSource,
    pub protocol_config: ProtocolConfig,
    pub cross_check: bool,
    pub cw: CwConfig,
    pub fwm: FwmConfig,
    pub out: PathBuf,
}

fn ensure_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::Io(format!("{}: {e}", out.display())))
}

fn sidecar(out: &Path, stem: &str, command: &str, config: Value, results: Value) -> Result<()> {
    let doc = json!({
        "version": VERSION,
        "command": command,
        "config": config,
        "results": results,
    });
    write_json(out.join(format!("{stem}.meta.json")), &doc)
}

fn sector_name(s: QubitSector) -> &'static str {
    match s {
        QubitSector::Up => "g",
        QubitSector::Down => "e",
    }
}

pub fn simulate(run: &SimulateRun) -> Result<Vec<PathBuf>> {
    ensure_dir(&run.out)?;
    let p = &run.source.params;
    let cfg = &run.protocol_config;
    let stem = run.protocol.replace('-', "_");
    let csv = run.out.join(format!("{stem}.csv"));
    let mut written = vec![csv.clone()];
    let results: Value = match run.protocol.as_str() {
        "qubit-ramsey" => {
            let tr = qubit_ramsey(p, cfg)?;
            tr.to_table().write(&csv)?;
            json!({ "points": tr.times.len() })
        }
        "cavity-ramsey" => {
            let mut t = CsvTable::new(["t_us", "signal_g", "signal_e"]);
            let g = cavity_ramsey_trace(p, QubitSector::Up, cfg)?;
            let e = cavity_ramsey_trace(p, QubitSector::Down, cfg)?;
            for i in 0..g.times.len() {
                t.push(vec![g.times[i], g.signal[i], e.signal[i]]);
            }
            t.write(&csv)?;
            let mut fits = serde_json::Map::new();
            for s in QubitSector::BOTH {
                fits.insert(format!("omega_{}", sector_name(s)), serde_json::to_value(cavity_ramsey(p, s, cfg)?)?);
            }
            Value::Object(fits)
        }
        "cavity-t1" => {
            let mut t = CsvTable::new(["t_us", "n_avg_g", "n_avg_e"]);
            let g = cavity_t1_trace(p, QubitSector::Up, cfg, cfg.tau_slide)?;
            let e = cavity_t1_trace(p, QubitSector::Down, cfg, cfg.tau_slide)?;
            for i in 0..g.times.len() {
                t.push(vec![g.times[i], g.signal[i], e.signal[i]]);
            }
            t.write(&csv)?;
            let mut fits = serde_json::Map::new();
            for s in QubitSector::BOTH {
                fits.insert(format!("kappa_{}", sector_name(s)), serde_json::to_value(cavity_t1(p, s, cfg)?)?);
            }
            Value::Object(fits)
        }
        "photon-calibration" => {
            let kg = cavity_t1(p, QubitSector::Up, cfg)?.kappa;
            let cal = photon_calibration(p, cfg, kg)?;
            let mut t = CsvTable::new(["kappa_g", "t_window_us", "n_avg", "n0_est", "correction"]);
            t.push(vec![kg, cfg.t_window, cal.n_avg, cal.n0_est, cal.correction]);
            t.write(&csv)?;
            serde_json::to_value(cal)?
        }
        "measurement-set" => {
            let ms = measurement_set(p, cfg)?;
            let mut t = CsvTable::new(["omega_g", "omega_e", "kappa_g", "kappa_e", "phi", "zeta", "n0", "t_f_us", "omega_r"]);
            t.push(vec![ms.omega_g, ms.omega_e, ms.kappa_g, ms.kappa_e, ms.phi, ms.zeta, ms.n0, ms.t_f, ms.omega_r]);
            t.write(&csv)?;
            let ms_path = run.out.join("measurements.json");
            write_json(&ms_path, &ms)?;
            written.push(ms_path);
            serde_json::to_value(ms)?
        }
        "cw-sweep" => {
            let eps = Complex64::new(mhz(run.cw.epsilon_mhz), 0.0);
            let dds: Vec<f64> = run.cw.detunings_mhz.iter().map(|d| mhz(*d)).collect();
            let opts = CwOptions {
                backend: cfg.backend,
                cross_check: run.cross_check,
                n_max: run.cw.n_max,
            };
            let sweep = cw_sweep(p, eps, &dds, &opts)?;
            sweep.to_table().write(&csv)?;
            let errors: Vec<Value> = sweep
                .points
                .iter()
                .filter_map(|pt| pt.error.as_ref().map(|e| json!({ "delta_d": pt.delta_d, "error": e })))
                .collect();
            let peaks = sweep.peak_detunings();
            json!({
                "points": sweep.points.len(),
                "errors": errors,
                "peak_stark_detuning": peaks.map(|p| p.0),
                "peak_dephasing_detuning": peaks.map(|p| p.1),
            })
        }
        "fwm" => {
            let f = &run.fwm;
            let spec = HilbertSpec {
                n_max: f.n_max,
                qubit_dim: 3,
                leak_threshold: nrdisp_core::oracle::DEFAULT_LEAK_THRESHOLD,
            };
            let omega = mhz(f.omega_rabi_mhz);
            let gamma_f = match f.conversion {
                Some(target) => gamma_f_for_efficiency(p, &spec, omega, target)?,
                None => f.gamma_f,
            };
            let spec_f = FwmSpec {
                omega_rabi: omega,
                gamma_f,
                gamma_e: f.gamma_e,
                f_prep_fidelity: f.prep_fidelity,
            };
            let r = fwm_experiment(p, &spec_f, f.n_max)?;
            let mut t = CsvTable::new(["omega_rabi", "gamma_f", "gamma_e", "prep_fidelity", "phi", "ln_zeta", "ratio"]);
            t.push(vec![omega, gamma_f, f.gamma_e, f.prep_fidelity, r.phi, r.ln_zeta, r.ratio]);
            t.write(&csv)?;
            json!({ "fwm": spec_f, "result": r })
        }
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown protocol '{other}' (available: {})",
                PROTOCOLS.join(", ")
            )));
        }
    };
    sidecar(&run.out, &stem, "simulate", serde_json::to_value(run)?, results)?;
    written.push(run.out.join(format!("{stem}.meta.json")));
    Ok(written)
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtractRun {
    pub measurements: PathBuf,
    pub mc_samples: usize,
    pub seed: u64,
    pub out: PathBuf,
}

pub fn extract_cmd(run: &ExtractRun) -> Result<Vec<PathBuf>> {
    let text = std::fs::read_to_string(&run.measurements)
        .map_err(|e| Error::Io(format!("{}: {e}", run.measurements.display())))?;
    let ms = MeasurementSet::from_json_str(&text)?;
    if run.mc_samples > 0 && run.mc_samples < MIN_MC_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "--mc-samples must be 0 (point estimate) or at least {MIN_MC_SAMPLES}"
        )));
    }
    if run.mc_samples > 0 && ms.sigmas.is_none() {
        return Err(Error::InvalidParameter(
            "measurement set has no sigmas; pass --mc-samples 0 for a point estimate".into(),
        ));
    }
    ensure_dir(&run.out)?;
    let point = extract(&ms)?;
    let mut written = Vec::new();
    let result = if run.mc_samples == 0 {
        point
    } else {
        let set = monte_carlo_samples(&ms, run.mc_samples, run.seed)?;
        let result = summarize_samples(point, &set)?;
        for (i, name) in QUANTITY_NAMES.iter().enumerate() {
            let col = set.column(i);
            // Degenerate columns have no histogram.
            if let Ok(h) = histogram(&col, freedman_diaconis_bins(&col)) {
                let path = run.out.join(format!("histogram_{name}.csv"));
                h.to_table().write(&path)?;
                written.push(path);
            }
        }
        result
    };
    let path = run.out.join("extraction.json");
    write_json(&path, &result)?;
    written.insert(0, path);
    sidecar(
        &run.out,
        "extraction",
        "extract",
        json!({ "run": run, "measurements": ms }),
        json!({ "n_valid": result.diagnostics.n_valid, "n_failed": result.diagnostics.n_failed }),
    )?;
    Ok(written)
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareRun {
    pub source: ResolvedSource,
    pub n0: f64,
    pub n_max: usize,
    pub t_end: f64,
    pub points: usize,
    pub tolerance: f64,
    pub out: PathBuf,
}

pub fn compare_oracle(run: &CompareRun) -> Result<(PathBuf, bool)> {
    ensure_dir(&run.out)?;
    let spec = HilbertSpec::qubit(run.n_max);
    let cmp = compare_coherent(&run.source.params, run.n0, &spec, run.t_end, run.points, &OracleOptions::default())?;
    let pass = cmp.max_relative_error() < run.tolerance;
    let doc = json!({
        "version": VERSION,
        "command": "compare-oracle",
        "config": run,
        "max_relative_error": {
            "sigma_minus_semiclassical_vs_closed_form": cmp.semiclassical_vs_closed_form,
            "sigma_minus_full_vs_semiclassical": cmp.full_vs_semiclassical,
            "sigma_minus_block_vs_semiclassical": cmp.block_vs_semiclassical,
            "sigma_minus_block_vs_full": cmp.block_vs_full,
        },
        "physicality": {
            "trace_error": cmp.trace_error,
            "min_eigenvalue": cmp.min_eigenvalue,
            "sigma_z_drift": cmp.sigma_z_drift,
            "rank1_deviation": cmp.rank1_deviation,
        },
        "pass": pass,
    });
    let path = run.out.join("report.json");
    write_json(&path, &doc)?;
    Ok((path, pass))
}

/// Backend flag parsing shared by the subcommands.
pub fn parse_backend(s: &str) -> Result<Backend> {
    s.parse()
}
