// Copyright 2026 nrdisp Contributors
// SPDX-License-Identifier: Apache-2.0

use num_complex::Complex64;
use nrdisp_core::experiments::{
    measurement_set, photon_calibration, qubit_ramsey, Backend, MeasurementSigmas, NoiseSpec,
    ProtocolConfig,
};
use nrdisp_core::extraction::{extract, fit_time_offset, linearized_sigmas, RamseySeries, MAX_TIME_OFFSET};
use nrdisp_core::semiclassical::{simulate, DriveEnvelope};
use nrdisp_core::{conditional_energy, presets::preset, EffectiveParams, QubitSector};
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rand_chacha::ChaCha8Rng;

const PRESETS: [&str; 3] = ["device-a", "device-b", "reciprocal"];

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-9)
}

fn max_param_error(p: &EffectiveParams, q: &EffectiveParams) -> f64 {
    [
        (q.lambda(), p.lambda()),
        (q.kappa(), p.kappa()),
        (q.gamma_sin_theta(), p.gamma_sin_theta()),
        (q.gamma_sinh_eta(), p.gamma_sinh_eta()),
        (q.gamma_cosh_eta(), p.gamma_cosh_eta()),
    ]
    .iter()
    .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
    .fold(0.0, f64::max)
}

#[test]
fn noiseless_protocols_recover_every_preset() {
    for name in PRESETS {
        let p = preset(name).unwrap().params;
        let ms = measurement_set(&p, &ProtocolConfig::default()).unwrap();
        let q = extract(&ms).unwrap().params;
        assert!(max_param_error(&p, &q) < 1e-6, "{name}: {q:?}");
    }
}

#[test]
fn sector_frequencies_differ_by_lambda() {
    for name in PRESETS {
        let p = preset(name).unwrap().params;
        let ms = measurement_set(&p, &ProtocolConfig::default()).unwrap();
        assert!(rel(ms.omega_g - ms.omega_e, p.lambda()) < 1e-8, "{name}");
        let kg = conditional_energy(&p, QubitSector::Up).photon_decay();
        let ke = conditional_energy(&p, QubitSector::Down).photon_decay();
        assert!(rel(ms.kappa_g, kg) < 1e-8 && rel(ms.kappa_e, ke) < 1e-8, "{name}");
    }
}

#[test]
fn decay_fit_does_not_depend_on_window_length() {
    let p = preset("device-a").unwrap().params;
    let a = measurement_set(&p, &ProtocolConfig::default()).unwrap();
    let b = measurement_set(&p, &ProtocolConfig { tau_slide: 0.05, ..Default::default() }).unwrap();
    assert!(rel(a.kappa_g, b.kappa_g) < 1e-9 && rel(a.kappa_e, b.kappa_e) < 1e-9);
}

#[test]
fn photon_calibration_inverts_the_stark_phase() {
    let p = preset("device-b").unwrap().params;
    let cfg = ProtocolConfig::default();
    let kg = conditional_energy(&p, QubitSector::Up).photon_decay();
    let cal = photon_calibration(&p, &cfg, kg).unwrap();
    // ∫₀ᵗ n0 e^{-κ_g s} ds / t, so the corrected estimate returns n0.
    let want_avg = cfg.n0 * (1.0 - (-kg * cfg.t_window).exp()) / (kg * cfg.t_window);
    assert!(rel(cal.n_avg, want_avg) < 1e-10);
    assert!(rel(cal.n0_est, cfg.n0) < 1e-10);
}

#[test]
fn oracle_backend_ramsey_matches_semiclassical() {
    for name in PRESETS {
        let p = preset(name).unwrap().params;
        let cfg = ProtocolConfig::default();
        let a = qubit_ramsey(&p, &cfg).unwrap();
        let b = qubit_ramsey(&p, &ProtocolConfig { backend: Backend::Oracle, ..cfg }).unwrap();
        for i in 0..a.times.len() {
            assert!((a.phi[i] - b.phi[i]).abs() < 1e-8, "{name} φ at {}", a.times[i]);
            assert!(rel(b.zeta[i], a.zeta[i]) < 1e-8, "{name} ζ at {}", a.times[i]);
        }
    }
}

#[test]
fn intrinsic_dephasing_cancels_in_the_ratio() {
    let p = preset("device-a").unwrap().params;
    let a = qubit_ramsey(&p, &ProtocolConfig::default()).unwrap();
    let b = qubit_ramsey(&p, &ProtocolConfig { intrinsic_dephasing: 2.0, ..Default::default() }).unwrap();
    for i in 0..a.times.len() {
        assert!((a.phi[i] - b.phi[i]).abs() < 1e-12 && rel(b.zeta[i], a.zeta[i]) < 1e-12);
    }
}

#[test]
fn finite_pulse_bias_vanishes_with_width() {
    // The inversion assumes equal sector amplitudes at t = 0; a finite
    // preparation pulse violates that by O(width).
    let p = preset("device-a").unwrap().params;
    let err = |w: f64| {
        let cfg = ProtocolConfig { short_pulse: false, pulse_width: w, ..Default::default() };
        max_param_error(&p, &extract(&measurement_set(&p, &cfg).unwrap()).unwrap().params)
    };
    let (e1, e2, e3) = (err(0.018), err(0.004), err(0.0005));
    assert!(e1 > e2 && e2 > e3, "{e1} {e2} {e3}");
    assert!(e3 < 1e-2, "{e3}");
}

#[test]
fn linearized_uncertainty_scales_with_noise() {
    let p = preset("device-b").unwrap().params;
    let mut ms = measurement_set(&p, &ProtocolConfig::default()).unwrap();
    let base = MeasurementSigmas {
        omega_g: 0.01,
        omega_e: 0.01,
        kappa_g: 0.02,
        kappa_e: 0.02,
        phi: 0.005,
        zeta: 0.002,
        n0: 0.03,
    };
    ms.sigmas = Some(base);
    let s1 = linearized_sigmas(&ms).unwrap();
    let scaled = |k: f64| MeasurementSigmas {
        omega_g: k * base.omega_g,
        omega_e: k * base.omega_e,
        kappa_g: k * base.kappa_g,
        kappa_e: k * base.kappa_e,
        phi: k * base.phi,
        zeta: k * base.zeta,
        n0: k * base.n0,
    };
    ms.sigmas = Some(scaled(3.0));
    let s3 = linearized_sigmas(&ms).unwrap();
    for (a, b) in s1.iter().zip(&s3) {
        if *a > 0.0 {
            assert!(rel(*b, 3.0 * a) < 1e-6, "{a} {b}");
        }
    }
}

#[test]
fn noisy_measurements_scatter_at_the_stated_level() {
    let p = preset("device-a").unwrap().params;
    let clean = measurement_set(&p, &ProtocolConfig::default()).unwrap();
    let noise = NoiseSpec { omega: 0.05, ..Default::default() };
    let diffs: Vec<f64> = (0..200)
        .map(|seed| {
            let cfg = ProtocolConfig { noise, rng_seed: seed, ..Default::default() };
            measurement_set(&p, &cfg).unwrap().omega_g - clean.omega_g
        })
        .collect();
    let sd = (diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64).sqrt();
    assert!(rel(sd, 0.05) < 0.15, "{sd}");
}

fn theory(p: &EffectiveParams) -> nrdisp_core::semiclassical::TrajectoryRecord {
    let a0 = Complex64::new(3f64.sqrt(), 0.0);
    let grid: Vec<f64> = (0..=1200).map(|i| i as f64 * 1e-3).collect();
    simulate(p, &DriveEnvelope::none(), a0, a0, Complex64::new(1.0, 0.0), &grid).unwrap()
}

fn shifted_series(p: &EffectiveParams, shift: f64, noise: f64, seed: u64) -> RamseySeries {
    let a0 = Complex64::new(3f64.sqrt(), 0.0);
    let times: Vec<f64> = (0..=38).map(|i| 0.03 + 0.02 * i as f64).collect();
    // The first grid point is the preparation time; before it the ratio is 1.
    let mut src = vec![0.0];
    src.extend(times.iter().map(|t| t - shift).filter(|t| *t > 0.0));
    let tr = simulate(p, &DriveEnvelope::none(), a0, a0, Complex64::new(1.0, 0.0), &src).unwrap();
    let mut ln = vec![Complex64::new(0.0, 0.0); times.len() + 1 - src.len()];
    ln.extend_from_slice(&tr.ln_ratio.unwrap()[1..]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jitter = |v: f64| {
        let g: f64 = StandardNormal.sample(&mut rng);
        v * (1.0 + noise * g)
    };
    RamseySeries {
        times,
        phi: ln.iter().map(|l| jitter(l.im)).collect(),
        ln_zeta: ln.iter().map(|l| jitter(l.re)).collect(),
    }
}

#[test]
fn time_offset_is_recovered() {
    let p = preset("device-a").unwrap().params;
    let th = theory(&p);
    let fit = fit_time_offset(&th, &shifted_series(&p, 0.033, 0.0, 0)).unwrap();
    assert!((fit.offset - 0.033).abs() < 1e-3, "{fit:?}");
    let zero = fit_time_offset(&th, &shifted_series(&p, 0.0, 0.0, 0)).unwrap();
    assert!(zero.offset < 1e-3, "{zero:?}");
    for seed in 0..5 {
        let noisy = fit_time_offset(&th, &shifted_series(&p, 0.033, 0.02, seed)).unwrap();
        assert!((noisy.offset - 0.033).abs() < 3e-3, "seed {seed}: {noisy:?}");
    }
    assert!(fit.offset <= MAX_TIME_OFFSET);
}
