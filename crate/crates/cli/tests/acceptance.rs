// Copyright 2026 nrdisp Contributors
// SPDX-License-Identifier: Apache-2.0

//! Acceptance criteria 1-10. Runs as a plain binary so every criterion prints
//! its own PASS/FAIL line; the process fails if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;
use nrdisp_core::experiments::{
    coherent_state_ratio, cw_sweep, fwm_experiment, measurement_set, CwOptions, MeasurementSigmas,
    ProtocolConfig,
};
use nrdisp_core::extraction::{extract, fit_gaussian, fit_half_gaussians, linearized_sigmas, monte_carlo, QUANTITY_NAMES};
use nrdisp_core::network::{adiabatic_eliminate, flux_loop, onsager_report, LoopSpec, MultimodeNetwork};
use nrdisp_core::oracle::{
    build_liouvillian, coherent_state, compare_coherent, evolve_coherence_block, evolve_density,
    evolve_network_coherence, fock_state, gamma_f_for_efficiency, ConstantDrive, FwmSpec, HilbertSpec,
    OracleOptions,
};
use nrdisp_core::semiclassical::{fock_steady_ratio, free_decay_closed_form, long_time_ratio, simulate, DriveEnvelope};
use nrdisp_core::{mhz, presets::preset, EffectiveParams, Error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const PRESETS: [&str; 3] = ["device-a", "device-b", "reciprocal"];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

/// Worst physicality figures over every Lindblad run in the suite.
#[derive(Default)]
struct Physicality {
    runs: usize,
    trace: f64,
    min_eig: f64,
    sigma_z: f64,
}

impl Physicality {
    fn record(&mut self, trace: f64, min_eig: f64, sigma_z: f64) {
        self.runs += 1;
        self.trace = self.trace.max(trace);
        self.min_eig = self.min_eig.min(min_eig);
        self.sigma_z = self.sigma_z.max(sigma_z);
    }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn c1_oracle_equivalence(phys: &mut Physicality) -> Result<Outcome, Error> {
    let mut worst: f64 = 0.0;
    let mut slowest: f64 = 0.0;
    for name in PRESETS {
        let p = preset(name)?.params;
        let t = Instant::now();
        let c = compare_coherent(&p, 3.0, &HilbertSpec::qubit(30), 2.0, 101, &OracleOptions::default())?;
        slowest = slowest.max(secs(t.elapsed()));
        worst = worst.max(c.max_relative_error());
        phys.record(c.trace_error, c.min_eigenvalue, c.sigma_z_drift);
    }
    Ok(outcome(
        worst < 1e-6 && slowest < 10.0,
        format!("max relative error {worst:.2e} (< 1e-6), slowest comparison {slowest:.2} s (< 10 s)"),
    ))
}

fn random_params(rng: &mut ChaCha8Rng) -> EffectiveParams {
    let sign = |rng: &mut ChaCha8Rng| if rng.random::<bool>() { 1.0 } else { -1.0 };
    let lambda = sign(rng) * mhz(rng.random_range(0.2..1.0));
    EffectiveParams::new(
        mhz(rng.random_range(-1.0..1.0)),
        lambda,
        mhz(rng.random_range(0.5..1.5)),
        mhz(rng.random_range(0.2..1.0)),
        rng.random_range(-3.0..3.0),
        rng.random_range(-0.5..0.5),
    )
    .expect("sampled inside the physical region")
}

fn c2_round_trip() -> Result<Outcome, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = ProtocolConfig::default();
    let (mut worst, mut slowest) = (0.0f64, 0.0f64);
    let sets = 24;
    for _ in 0..sets {
        let p = random_params(&mut rng);
        let t = Instant::now();
        let q = extract(&measurement_set(&p, &cfg)?)?.params;
        slowest = slowest.max(secs(t.elapsed()));
        for (a, b) in [
            (q.delta_c(), p.delta_c()),
            (q.lambda(), p.lambda()),
            (q.kappa(), p.kappa()),
            (q.gamma_nr(), p.gamma_nr()),
            (q.theta(), p.theta()),
            (q.eta(), p.eta()),
        ] {
            worst = worst.max((a - b).abs() / b.abs());
        }
    }
    Ok(outcome(
        worst < 1e-6 && slowest < 1.0,
        format!("{sets} random sets, worst relative error {worst:.2e} (< 1e-6), slowest {slowest:.3} s (< 1 s)"),
    ))
}

fn c3_long_time() -> Result<Outcome, Error> {
    let mut worst: f64 = 0.0;
    for name in PRESETS {
        let p = preset(name)?.params;
        let a = long_time_ratio(&p, 3.0)?;
        let b = free_decay_closed_form(&p, 3.0, 10.0 / p.total_decay())?;
        worst = worst.max((a - b).norm() / a.norm());
    }
    Ok(outcome(worst < 1e-4, format!("worst relative difference {worst:.2e} (< 1e-4)")))
}

/// Complex-hopping network with a weakly lossy cavity (mode 0), lossy other
/// modes and a rank-one correlated loss channel.
fn random_network(rng: &mut ChaCha8Rng) -> MultimodeNetwork {
    let n = rng.random_range(3..5);
    let mut h = DMatrix::<Complex64>::zeros(n, n);
    let mut g = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        let det: f64 = rng.random_range(-40.0..40.0);
        h[(i, i)] = Complex64::new(if i == 0 { det / 20.0 } else { det }, 0.0);
        g[(i, i)] = Complex64::new(if i == 0 { rng.random_range(0.1..2.0) } else { rng.random_range(40.0..300.0) }, 0.0);
    }
    for i in 0..n {
        for j in i + 1..n {
            h[(i, j)] = Complex64::from_polar(rng.random_range(1.0..25.0), rng.random_range(-3.2..3.2));
            h[(j, i)] = h[(i, j)].conj();
        }
    }
    let v: Vec<Complex64> = (0..n)
        .map(|i| if i == 0 { Complex64::new(0.0, 0.0) } else { Complex64::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)) })
        .collect();
    for i in 0..n {
        for j in 0..n {
            g[(i, j)] += v[i] * v[j].conj();
        }
    }
    MultimodeNetwork::new(h, g, 0, 1, rng.random_range(5.0..150.0)).expect("hermitian by construction")
}

fn loop_spec(flux: f64, lambda0: f64) -> LoopSpec {
    LoopSpec {
        cavity_detuning: 0.0,
        cavity_loss: mhz(0.2),
        buffer_detuning: mhz(-1.0),
        buffer_loss: mhz(260.0),
        bath_detuning: mhz(50.0),
        bath_loss: mhz(300.0),
        g_cavity_buffer: mhz(10.0),
        g_cavity_bath: mhz(8.0),
        g_buffer_bath: mhz(30.0),
        flux,
        lambda0,
    }
}

fn c4_onsager() -> Result<Outcome, Error> {
    const TOL: f64 = 1e-10;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut checked, mut skipped, mut worst) = (0, 0, 0.0f64);
    while checked < 12 && checked + skipped < 200 {
        let net = random_network(&mut rng);
        match onsager_report(&net, TOL) {
            Ok(r) => {
                checked += 1;
                for e in &r.symmetric {
                    worst = worst.max(e.difference / e.forward.abs().max(1.0));
                }
            }
            Err(Error::NoPhysicalSolution { .. }) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    let r = onsager_report(&flux_loop(&loop_spec(1.0, mhz(120.0)))?, TOL)?;
    let gs = r
        .informational
        .iter()
        .find(|e| e.name == "gamma_sin_theta")
        .map_or(0.0, |e| e.difference);
    Ok(outcome(
        checked >= 10 && worst < TOL && gs > 10.0 * TOL && r.all_pass(),
        format!(
            "{checked} networks ({skipped} without a physical reduction skipped), worst symmetric mismatch {worst:.1e}; \
             flux loop |Γsinθ(B) - Γsinθ(-B)| = {gs:.3e}"
        ),
    ))
}

fn c5_elimination_validity() -> Result<Outcome, Error> {
    let t = Instant::now();
    let net = flux_loop(&loop_spec(1.0, mhz(5.0)))?;
    let p = adiabatic_eliminate(&net)?;
    let gm = net.gamma_mat();
    let slow_bath = (1..net.n_modes()).map(|l| gm[(l, l)].re).fold(f64::INFINITY, f64::min);
    let separation = slow_bath / (p.kappa() + p.gamma_nr());
    // Transient: three amplitude lifetimes of the slowest eliminated mode.
    let transient = 3.0 / (0.5 * slow_bath);
    let grid: Vec<f64> = (0..=32).map(|i| 0.025 * i as f64).collect();
    let alpha = Complex64::new(1.0, 0.0);
    let full = evolve_network_coherence(&net, &[9, 2, 2], alpha, &grid, &OracleOptions::default(), 1e-5)?;
    let eff = simulate(&p, &DriveEnvelope::none(), alpha, alpha, Complex64::new(1.0, 0.0), &grid)?
        .sigma_minus
        .expect("coherence evolved");
    let worst = grid
        .iter()
        .enumerate()
        .filter(|(_, t)| **t >= transient)
        .map(|(i, _)| (full.sigma_minus[i] - eff[i]).norm() / eff[i].norm())
        .fold(0.0, f64::max);
    let el = secs(t.elapsed());
    Ok(outcome(
        separation >= 100.0 && worst < 0.05 && el < 60.0,
        format!(
            "bath/effective decay ratio {separation:.0} (>= 100), worst relative deviation after {:.0} ns: {worst:.2e} (< 5%), {el:.1} s",
            transient * 1e3
        ),
    ))
}

fn c6_cw(phys: &mut Physicality) -> Result<Outcome, Error> {
    let eps = Complex64::new(mhz(0.5), 0.0);
    let detunings: Vec<f64> = (0..41).map(|i| mhz(-5.0 + 0.25 * i as f64)).collect();
    let step = mhz(0.25);
    let opts = CwOptions { cross_check: true, ..CwOptions::default() };
    let mut worst: f64 = 0.0;
    let mut seps = Vec::new();
    for name in ["device-a", "reciprocal"] {
        let p = preset(name)?.params;
        let sweep = cw_sweep(&p, eps, &detunings, &opts)?;
        for pt in &sweep.points {
            if let Some(e) = &pt.error {
                return Err(Error::IntegratorFailure(format!("{name} at {}: {e}", pt.delta_d)));
            }
            let (s, g) = (pt.stark.unwrap_or(f64::NAN), pt.dephasing.unwrap_or(f64::NAN));
            let (os, og) = (pt.oracle_stark.unwrap_or(f64::NAN), pt.oracle_dephasing.unwrap_or(f64::NAN));
            let e = ((s - os).abs() / s.abs()).max((g - og).abs() / g.abs());
            worst = worst.max(if e.is_nan() { f64::INFINITY } else { e });
        }
        let (ps, pg) = sweep.peak_detunings().ok_or_else(|| Error::FitFailure("no peak".into()))?;
        seps.push((ps - pg).abs());
    }
    // One extra driven full-density run feeds the physicality record.
    let p = preset("device-a")?.params;
    let spec = HilbertSpec::qubit(14);
    let lv = spec.levels();
    let psi = coherent_state(lv, Complex64::new(1.0, 0.5));
    let up_plus_down = DMatrix::from_fn(2 * lv, 2 * lv, |i, j| {
        let q = [[0.6, 0.3], [0.3, 0.4]][i / lv][j / lv];
        psi[i % lv] * psi[j % lv].conj() * q
    });
    let l = build_liouvillian(&p, &spec, Some(ConstantDrive { epsilon: eps, delta_d: mhz(0.5) }))?;
    let grid: Vec<f64> = (0..=20).map(|i| 0.1 * i as f64).collect();
    let ev = evolve_density(&l, &up_plus_down, &grid, &OracleOptions::default())?;
    for i in 0..grid.len() {
        phys.record((ev.trace[i] - 1.0).norm(), ev.min_eigenvalue[i], (ev.sigma_z[i] - ev.sigma_z[0]).abs());
    }
    Ok(outcome(
        worst < 1e-3 && seps[0] > 0.0 && seps[1] <= step,
        format!(
            "41-point sweeps, worst relative mismatch {worst:.2e} (< 1e-3); peak separation {:.2} MHz non-reciprocal, {:.2} MHz reciprocal",
            seps[0] / mhz(1.0),
            seps[1] / mhz(1.0)
        ),
    ))
}

fn c7_fock_fwm() -> Result<Outcome, Error> {
    let mut fock_err: f64 = 0.0;
    for name in ["device-a", "device-b"] {
        let p = preset(name)?.params;
        let spec = HilbertSpec::qubit(6);
        let f1 = fock_state(spec.levels(), 1);
        let be = evolve_coherence_block(
            &p,
            &spec,
            &(&f1 * f1.adjoint()),
            &[0.0, 30.0 / p.total_decay()],
            &OracleOptions::with_tolerances(1e-12, 1e-14),
        )?;
        let want = fock_steady_ratio(&p)?;
        fock_err = fock_err.max((be.sigma_minus[1] - want).norm() / want.norm());
    }
    let device = preset("device-a")?;
    let p = device.params;
    let fock = fock_steady_ratio(&p)?.ln();
    let fock_ratio = fock.re / fock.im;
    let mut fwm_err: f64 = 0.0;
    for f in [0.3, 0.6, 1.2] {
        let r = fwm_experiment(&p, &FwmSpec::ideal(mhz(f)), 4)?;
        fwm_err = fwm_err.max((r.phi - fock.im).abs() / fock.im.abs()).max((r.ln_zeta - fock.re).abs() / fock.re.abs());
    }
    let spec = HilbertSpec { n_max: 4, qubit_dim: 3, leak_threshold: nrdisp_core::oracle::DEFAULT_LEAK_THRESHOLD };
    let omega = mhz(0.6);
    let imperfect = FwmSpec {
        omega_rabi: omega,
        gamma_f: gamma_f_for_efficiency(&p, &spec, omega, 0.89)?,
        gamma_e: device.hardware.map_or(0.0, |h| 1.0 / h.ancilla_t1_us),
        f_prep_fidelity: 0.85,
    };
    let imp = fwm_experiment(&p, &imperfect, 4)?.ratio;
    let coh = coherent_state_ratio(&p)?;
    let toward = imp > fock_ratio && (imp - coh).abs() < (fock_ratio - coh).abs();
    Ok(outcome(
        fock_err < 1e-8 && fwm_err < 1e-3 && toward,
        format!(
            "Fock error {fock_err:.1e} (< 1e-8); ideal FWM error {fwm_err:.1e} (< 1e-3); \
             ln ζ/φ: Fock {fock_ratio:.3}, imperfect FWM {imp:.3}, coherent {coh:.3}"
        ),
    ))
}

fn c8_physicality(phys: &Physicality) -> Outcome {
    outcome(
        phys.trace < 1e-9 && phys.min_eig >= -1e-8 && phys.sigma_z < 1e-9,
        format!(
            "{} Lindblad runs: trace error {:.1e}, min eigenvalue {:.1e}, σz drift {:.1e}",
            phys.runs, phys.trace, phys.min_eig, phys.sigma_z
        ),
    )
}

fn c9_monte_carlo() -> Result<Outcome, Error> {
    let p = preset("device-a")?.params;
    let mut ms = measurement_set(&p, &ProtocolConfig::default())?;
    ms.sigmas = Some(MeasurementSigmas {
        omega_g: 0.005,
        omega_e: 0.005,
        kappa_g: 0.01,
        kappa_e: 0.01,
        phi: 0.001,
        zeta: 0.0005,
        n0: 0.005,
    });
    let lin = linearized_sigmas(&ms)?;
    let t = Instant::now();
    let mc = monte_carlo(&ms, 100_000, 9)?;
    let el = secs(t.elapsed());
    let mut worst: f64 = 0.0;
    for (i, name) in QUANTITY_NAMES.iter().enumerate() {
        let e = mc.estimate(name).expect("all quantities summarised");
        if lin[i] > 0.0 {
            worst = worst.max((0.5 * (e.sigma_low + e.sigma_high) / lin[i] - 1.0).abs());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let normal = Normal::new(2.0, 0.3).expect("positive σ");
    let samples: Vec<f64> = (0..100_000).map(|_| normal.sample(&mut rng)).collect();
    let (g, h) = (fit_gaussian(&samples)?, fit_half_gaussians(&samples)?);
    let split = ((h.sigma_low / g.sigma - 1.0).abs()).max((h.sigma_high / g.sigma - 1.0).abs());
    let workers = rayon::current_num_threads();
    Ok(outcome(
        worst < 0.1 && split < 0.05 && el < 60.0,
        format!(
            "MC vs linear σ worst {:.1}% (< 10%); split vs Gaussian width {:.1}% (< 5%); 1e5 samples in {el:.1} s on {workers} worker(s)",
            100.0 * worst,
            100.0 * split
        ),
    ))
}

fn run_cli(args: &[&str], workers: &str) -> Result<(), Error> {
    let o = Command::new(env!("CARGO_BIN_EXE_nrdisp"))
        .args(args)
        .env("NRDISP_WORKERS", workers)
        .output()
        .map_err(|e| Error::Io(e.to_string()))?;
    if o.status.success() {
        Ok(())
    } else {
        Err(Error::Io(format!("nrdisp {args:?}: {}", String::from_utf8_lossy(&o.stderr))))
    }
}

fn c10_determinism() -> Result<Outcome, Error> {
    let dir = std::env::temp_dir().join(format!("nrdisp-acceptance-{}", std::process::id()));
    let pc = dir.join("protocol.json");
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(&pc, r#"{"noise":{"trace":0.05,"omega":0.01,"kappa":0.02,"phi":0.002,"zeta":0.001,"n0":0.02},"rng_seed":17}"#)
        .map_err(|e| Error::Io(e.to_string()))?;
    let mut compared = 0;
    let mut identical = true;
    let read = |p: &Path| std::fs::read(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())));
    for (run, workers) in [("a", "1"), ("b", "2")] {
        let out = dir.join(run);
        let o = out.to_str().expect("utf-8 temp path");
        for protocol in ["cavity-ramsey", "measurement-set", "cw-sweep"] {
            run_cli(&["simulate", "--protocol", protocol, "--protocol-config", pc.to_str().unwrap(), "--out", o], workers)?;
        }
        let ms = out.join("measurements.json");
        run_cli(&["extract", ms.to_str().unwrap(), "--mc-samples", "5000", "--seed", "3", "--out", o], workers)?;
    }
    for file in ["cavity_ramsey.csv", "measurement_set.csv", "cw_sweep.csv", "histogram_kappa.csv", "histogram_theta.csv"] {
        identical &= read(&dir.join("a").join(file))? == read(&dir.join("b").join(file))?;
        compared += 1;
    }
    let _ = std::fs::remove_dir_all(&dir);
    Ok(outcome(identical, format!("{compared} CSV files byte-identical across two runs (1 and 2 workers)")))
}

fn main() {
    let mut phys = Physicality::default();
    let start = Instant::now();
    let mut results: Vec<(usize, Result<Outcome, Error>)> = vec![
        (1, c1_oracle_equivalence(&mut phys)),
        (2, c2_round_trip()),
        (3, c3_long_time()),
        (4, c4_onsager()),
        (5, c5_elimination_validity()),
        (6, c6_cw(&mut phys)),
        (7, c7_fock_fwm()),
    ];
    results.push((8, Ok(c8_physicality(&phys))));
    results.push((9, c9_monte_carlo()));
    results.push((10, c10_determinism()));
    let mut failed = 0;
    for (n, r) in &results {
        let (pass, detail) = match r {
            Ok(o) => (o.pass, o.detail.clone()),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!("criterion {n:>2}: {}  {detail}", if pass { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {} of {} passed in {:.1} s", results.len() - failed, results.len(), secs(start.elapsed()));
    if failed > 0 {
        std::process::exit(1);
    }
}
