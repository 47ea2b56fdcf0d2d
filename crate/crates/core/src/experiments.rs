// Copyright 2026 nrdisp Contributors
// SPDX-License-Identifier: Apache-2.0

//! Virtual versions of the measurement protocols: qubit Ramsey with and
//! without cavity photons, cavity Ramsey and cavity T1 through an ancilla
//! proxy, photon-number calibration, CW Stark/dephasing sweeps and the
//! FWM single-photon experiment.
//!
//! Measurement noise is Gaussian and applied to reported observables (and,
//! for the fitted protocols, optionally to the raw traces). Each protocol
//! draws from its own ChaCha stream of `rng_seed`, so adding noise to one
//! observable never changes another.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::{levenberg_marquardt, LmOptions};
use crate::io::CsvTable;
use crate::model::{
    coherence_coefficient, conditional_energy, mhz, EffectiveParams, QubitSector,
};
use crate::oracle::{
    build_coherence_block, coherent_state, cw_oracle_rate, evolve_fwm, ConstantDrive, FwmSpec,
    HilbertSpec, OracleOptions,
};
use crate::semiclassical::{
    adaptive_gauss_kronrod, cw_steady_state, phi1, pulse_prepared_amplitudes, simulate,
    DriveEnvelope,
};

const C0: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Semiclassical,
    Oracle,
}

impl std::str::FromStr for Backend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "semiclassical" => Ok(Self::Semiclassical),
            "oracle" => Ok(Self::Oracle),
            other => Err(Error::InvalidParameter(format!(
                "unknown backend '{other}' (semiclassical | oracle)"
            ))),
        }
    }
}

/// Uniform time grid `start, …, end` with `points` samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn times(&self) -> Vec<f64> {
        let n = self.points;
        (0..n)
            .map(|i| self.start + (self.end - self.start) * i as f64 / (n - 1) as f64)
            .collect()
    }

    fn validate(&self, what: &str) -> Result<()> {
        if self.points < 2 || !(self.start >= 0.0) || !(self.end > self.start) || !self.end.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "{what} grid needs 0 ≤ start < end and at least 2 points"
            )));
        }
        Ok(())
    }
}

/// Standard deviations of the Gaussian noise model; zero disables noise.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    /// Per-sample noise on raw cavity traces (proxy units, photons for T1).
    pub trace: f64,
    pub omega: f64,
    pub kappa: f64,
    pub phi: f64,
    pub zeta: f64,
    pub n0: f64,
}

impl NoiseSpec {
    fn validate(&self) -> Result<()> {
        let all = [self.trace, self.omega, self.kappa, self.phi, self.zeta, self.n0];
        if all.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::InvalidParameter("noise σ must be finite and ≥ 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolConfig {
    pub n0: f64,
    /// Photon-calibration window t (µs).
    pub t_window: f64,
    /// Qubit Ramsey evaluation time for the measurement set (µs).
    pub t_f: f64,
    /// Sliding-window length τ for cavity T1 (µs).
    pub tau_slide: f64,
    /// Ancilla dispersive shift χ_a (rad/µs).
    pub chi_a: f64,
    pub noise: NoiseSpec,
    pub rng_seed: u64,
    pub backend: Backend,
    pub n_max: usize,
    /// Equal initial amplitudes `√n0`; otherwise a finite square pulse
    /// prepares the cavity just before `t = 0`.
    pub short_pulse: bool,
    pub pulse_width: f64,
    pub ramsey_grid: GridSpec,
    pub cavity_grid: GridSpec,
    /// Artificial detuning added to cavity-Ramsey traces (rad/µs) so the
    /// fitted oscillation frequency is positive.
    pub ramsey_offset: f64,
    /// Photon-independent qubit dephasing (1/µs); cancels in the differential
    /// Ramsey measurement.
    pub intrinsic_dephasing: f64,
    /// Reference frequency of the rotating frame (rad/µs).
    pub omega_r: f64,
    /// Largest accepted fit residual RMS relative to the trace amplitude.
    pub fit_residual_threshold: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            n0: 3.0,
            t_window: 0.200,
            t_f: 0.700,
            tau_slide: 0.100,
            chi_a: mhz(1.1),
            noise: NoiseSpec::default(),
            rng_seed: 0,
            backend: Backend::Semiclassical,
            n_max: crate::oracle::DEFAULT_N_MAX,
            short_pulse: true,
            pulse_width: 0.018,
            ramsey_grid: GridSpec {
                start: 0.030,
                end: 1.0,
                points: 98,
            },
            cavity_grid: GridSpec {
                start: 0.0,
                end: 0.4,
                points: 161,
            },
            ramsey_offset: mhz(5.0),
            intrinsic_dephasing: 0.0,
            omega_r: 0.0,
            fit_residual_threshold: 0.2,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        let times = [self.t_window, self.t_f, self.tau_slide, self.pulse_width];
        if times.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::InvalidParameter("protocol times must be positive".into()));
        }
        if !(self.n0.is_finite() && self.n0 >= 0.0) {
            return Err(Error::InvalidParameter(format!("n0 must be ≥ 0, got {}", self.n0)));
        }
        if !(self.chi_a.is_finite() && self.chi_a != 0.0) {
            return Err(Error::InvalidParameter("chi_a must be finite and nonzero".into()));
        }
        if !(self.intrinsic_dephasing >= 0.0) || !self.ramsey_offset.is_finite() || !self.omega_r.is_finite() {
            return Err(Error::InvalidParameter(
                "intrinsic dephasing must be ≥ 0 and offsets finite".into(),
            ));
        }
        if self.n_max < 1 {
            return Err(Error::InvalidParameter("n_max must be at least 1".into()));
        }
        self.noise.validate()?;
        self.ramsey_grid.validate("ramsey")?;
        self.cavity_grid.validate("cavity")
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
        rng.set_stream(stream);
        rng
    }
}

const STREAM_QUBIT_RAMSEY: u64 = 1;
const STREAM_CAVITY_RAMSEY: u64 = 2;
const STREAM_CAVITY_T1: u64 = 4;
const STREAM_OBSERVABLES: u64 = 6;

fn sector_stream(base: u64, s: QubitSector) -> u64 {
    base + matches!(s, QubitSector::Down) as u64
}

fn gaussian(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sigma).expect("σ validated").sample(rng)
}

/// Measured quantities from which the effective model is reconstructed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet {
    pub omega_g: f64,
    pub omega_e: f64,
    pub kappa_g: f64,
    pub kappa_e: f64,
    pub phi: f64,
    pub zeta: f64,
    pub n0: f64,
    pub t_f: f64,
    #[serde(default)]
    pub omega_r: f64,
    #[serde(default)]
    pub sigmas: Option<MeasurementSigmas>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct MeasurementSigmas {
    pub omega_g: f64,
    pub omega_e: f64,
    pub kappa_g: f64,
    pub kappa_e: f64,
    pub phi: f64,
    pub zeta: f64,
    pub n0: f64,
}

impl MeasurementSet {
    pub fn validate(&self) -> Result<()> {
        let vals = [
            self.omega_g,
            self.omega_e,
            self.kappa_g,
            self.kappa_e,
            self.phi,
            self.zeta,
            self.n0,
            self.t_f,
            self.omega_r,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("measurement values must be finite".into()));
        }
        if !(self.zeta > 0.0 && self.zeta <= 1.0) {
            return Err(Error::InvalidParameter(format!("zeta = {} outside (0, 1]", self.zeta)));
        }
        if !(self.kappa_g > 0.0 && self.kappa_e > 0.0) {
            return Err(Error::InvalidParameter("kappa_g and kappa_e must be positive".into()));
        }
        if !(self.n0 > 0.0 && self.t_f > 0.0) {
            return Err(Error::InvalidParameter("n0 and t_f must be positive".into()));
        }
        if let Some(s) = self.sigmas {
            let all = [s.omega_g, s.omega_e, s.kappa_g, s.kappa_e, s.phi, s.zeta, s.n0];
            if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::InvalidParameter("sigmas must be finite and ≥ 0".into()));
            }
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let ms: Self = serde_json::from_str(s)?;
        ms.validate()?;
        Ok(ms)
    }
}

/// Initial conditions shared by the protocols: amplitudes at `t = 0` and the
/// drive that produced them (if any).
struct Preparation {
    a_up: Complex64,
    a_down: Complex64,
    /// Start of the simulation; `-pulse_width` when the pulse is modelled.
    t0: f64,
    drive: DriveEnvelope,
    epsilon: Complex64,
}

fn prepare(p: &EffectiveParams, cfg: &ProtocolConfig) -> Result<Preparation> {
    let root = Complex64::new(cfg.n0.sqrt(), 0.0);
    if cfg.short_pulse || cfg.n0 == 0.0 {
        return Ok(Preparation {
            a_up: root,
            a_down: root,
            t0: 0.0,
            drive: DriveEnvelope::none(),
            epsilon: C0,
        });
    }
    let w = cfg.pulse_width;
    let unit = DriveEnvelope::square(-w, w, Complex64::new(1.0, 0.0), 0.0)?;
    let (u, d) = pulse_prepared_amplitudes(p, &unit, -w, 0.0)?;
    // Scale the drive so the mean of the two conditional photon numbers is n0.
    let scale = (2.0 * cfg.n0 / (u.norm_sqr() + d.norm_sqr())).sqrt();
    let eps = Complex64::new(scale, 0.0);
    Ok(Preparation {
        a_up: u * scale,
        a_down: d * scale,
        t0: -w,
        drive: DriveEnvelope::square(-w, w, eps, 0.0)?,
        epsilon: eps,
    })
}

/// Differential qubit Ramsey trace `⟨σ₋⟩/⟨σ₋⁰⟩ = ζ e^{iφ}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RamseyTrace {
    pub times: Vec<f64>,
    pub phi: Vec<f64>,
    pub zeta: Vec<f64>,
    pub backend: Backend,
}

impl RamseyTrace {
    pub fn ln_zeta(&self) -> Vec<f64> {
        self.zeta.iter().map(|z| z.ln()).collect()
    }

    pub fn to_table(&self) -> CsvTable {
        let mut t = CsvTable::new(["t_us", "phi_rad", "zeta", "ln_zeta"]);
        for i in 0..self.times.len() {
            t.push(vec![self.times[i], self.phi[i], self.zeta[i], self.zeta[i].ln()]);
        }
        t
    }
}

/// Unwraps `arg` to the branch closest to `prev`.
fn unwrap_to(prev: f64, arg: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    arg + two_pi * ((prev - arg) / two_pi).round()
}

/// Noiseless complex log-ratio `ln(⟨σ₋(t)⟩/⟨σ₋⁰(t)⟩)` at the given times.
fn ramsey_log_ratio(p: &EffectiveParams, cfg: &ProtocolConfig, times: &[f64]) -> Result<Vec<Complex64>> {
    if times.is_empty() || times[0] < 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("Ramsey times must be ≥ 0 and increasing".into()));
    }
    let prep = prepare(p, cfg)?;
    let mut grid = Vec::with_capacity(times.len() + 1);
    let prepend = times[0] > prep.t0;
    if prepend {
        grid.push(prep.t0);
    }
    grid.extend_from_slice(times);
    let skip = prepend as usize;
    let with_photons: Vec<Complex64> = match cfg.backend {
        Backend::Semiclassical => {
            let (a0u, a0d) = if prep.t0 < 0.0 { (C0, C0) } else { (prep.a_up, prep.a_down) };
            let tr = simulate(p, &prep.drive, a0u, a0d, Complex64::new(1.0, 0.0), &grid)?;
            tr.ln_ratio.expect("simulate fills ln_ratio")
        }
        Backend::Oracle => {
            let spec = HilbertSpec::qubit(cfg.n_max);
            let lv = spec.levels();
            let opts = OracleOptions::default();
            // Cavity starts in vacuum (pulse) or in |√n0⟩ (short pulse).
            let psi = if prep.t0 < 0.0 {
                coherent_state(lv, C0)
            } else {
                coherent_state(lv, prep.a_up)
            };
            let x0 = &psi * psi.adjoint();
            let free = build_coherence_block(p, &spec, None, QubitSector::Up, QubitSector::Down)?;
            let mut traces = Vec::with_capacity(grid.len());
            let mut x = x0.as_slice().to_vec();
            let mut t_start = grid[0];
            let mut rest: &[f64] = &grid;
            if prep.t0 < 0.0 {
                let driven = build_coherence_block(
                    p,
                    &spec,
                    Some(ConstantDrive {
                        epsilon: prep.epsilon,
                        delta_d: 0.0,
                    }),
                    QubitSector::Up,
                    QubitSector::Down,
                )?;
                let (y, _) = opts.ode.integrate(
                    |_, y, dy| driven.matrix.mul_vec(y, dy),
                    prep.t0,
                    &x,
                    &[prep.t0, 0.0],
                    |k, _, y| {
                        if k == 0 {
                            traces.push((0..lv).map(|i| y[i * lv + i]).sum::<Complex64>());
                        }
                        Ok(())
                    },
                )?;
                x = y;
                t_start = 0.0;
                rest = &grid[1..];
            }
            opts.ode.integrate(
                |_, y, dy| free.matrix.mul_vec(y, dy),
                t_start,
                &x,
                rest,
                |_, _, y| {
                    traces.push((0..lv).map(|i| y[i * lv + i]).sum::<Complex64>());
                    Ok(())
                },
            )?;
            let s0 = traces[0];
            let mut out = Vec::with_capacity(traces.len());
            let mut prev_phase = 0.0;
            for s in traces {
                let r = s / s0;
                prev_phase = unwrap_to(prev_phase, r.arg());
                out.push(Complex64::new(r.norm().ln(), prev_phase));
            }
            out
        }
    };
    // Intrinsic dephasing enters both arms identically and cancels.
    let out = grid
        .iter()
        .zip(with_photons)
        .skip(skip)
        .map(|(&t, l)| {
            let intrinsic = -cfg.intrinsic_dephasing * (t - prep.t0);
            (l + intrinsic) - Complex64::new(intrinsic, 0.0)
        })
        .collect();
    Ok(out)
}

/// Qubit Ramsey with and without cavity photons on `cfg.ramsey_grid`.
pub fn qubit_ramsey(p: &EffectiveParams, cfg: &ProtocolConfig) -> Result<RamseyTrace> {
    qubit_ramsey_at(p, cfg, &cfg.ramsey_grid.times())
}

pub fn qubit_ramsey_at(p: &EffectiveParams, cfg: &ProtocolConfig, times: &[f64]) -> Result<RamseyTrace> {
    cfg.validate()?;
    let ln = ramsey_log_ratio(p, cfg, times)?;
    let mut rng = cfg.rng(STREAM_QUBIT_RAMSEY);
    let mut phi = Vec::with_capacity(ln.len());
    let mut zeta = Vec::with_capacity(ln.len());
    for l in ln {
        phi.push(l.im + gaussian(&mut rng, cfg.noise.phi));
        zeta.push(l.re.exp() + gaussian(&mut rng, cfg.noise.zeta));
    }
    Ok(RamseyTrace {
        times: times.to_vec(),
        phi,
        zeta,
        backend: cfg.backend,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyFit {
    /// Cavity frequency ω_{g|e} including the reference ω_r (rad/µs).
    pub omega: f64,
    pub omega_sigma: f64,
    pub decay: f64,
    pub residual_rms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CavityTrace {
    pub times: Vec<f64>,
    pub signal: Vec<f64>,
}

impl CavityTrace {
    pub fn to_table(&self, column: &str) -> CsvTable {
        let mut t = CsvTable::new(["t_us", column]);
        for (a, b) in self.times.iter().zip(&self.signal) {
            t.push(vec![*a, *b]);
        }
        t
    }
}

fn free_amplitude(p: &EffectiveParams, s: QubitSector, a0: Complex64, t: f64) -> Complex64 {
    a0 * (-I * conditional_energy(p, s).0 * t).exp()
}

fn sector_amplitude(prep: &Preparation, s: QubitSector) -> Complex64 {
    match s {
        QubitSector::Up => prep.a_up,
        QubitSector::Down => prep.a_down,
    }
}

/// Oscillating proxy `Re[ā_σ(t) e^{-iδ_R t}]` with optional trace noise.
pub fn cavity_ramsey_trace(p: &EffectiveParams, s: QubitSector, cfg: &ProtocolConfig) -> Result<CavityTrace> {
    cfg.validate()?;
    let prep = prepare(p, cfg)?;
    let a0 = sector_amplitude(&prep, s);
    let mut rng = cfg.rng(sector_stream(STREAM_CAVITY_RAMSEY, s));
    let times = cfg.cavity_grid.times();
    let signal = times
        .iter()
        .map(|&t| {
            let v = free_amplitude(p, s, a0, t) * (-I * cfg.ramsey_offset * t).exp();
            v.re + gaussian(&mut rng, cfg.noise.trace)
        })
        .collect();
    Ok(CavityTrace { times, signal })
}

/// Fits `A e^{-γt} sin(ωt + φ0) + C` to a trace.
pub fn fit_damped_sinusoid(trace: &CavityTrace, residual_threshold: f64) -> Result<(f64, f64, f64, f64)> {
    let t = &trace.times;
    let y = &trace.signal;
    let m = t.len();
    let span = t[m - 1] - t[0];
    let amp = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if amp == 0.0 {
        return Err(Error::FitFailure("trace is identically zero".into()));
    }
    // Periodogram peak for the starting frequency.
    let mean = y.iter().sum::<f64>() / m as f64;
    let dt = span / (m - 1) as f64;
    let nyquist = std::f64::consts::PI / dt;
    let w_lo = std::f64::consts::PI / span;
    let power = |w: f64| {
        let (mut c, mut s) = (0.0, 0.0);
        for i in 0..m {
            c += (y[i] - mean) * (w * t[i]).cos();
            s += (y[i] - mean) * (w * t[i]).sin();
        }
        c * c + s * s
    };
    let n_scan = 4000;
    let mut best = (w_lo, f64::NEG_INFINITY);
    for k in 0..=n_scan {
        let w = w_lo + (nyquist - w_lo) * k as f64 / n_scan as f64;
        let pw = power(w);
        if pw > best.1 {
            best = (w, pw);
        }
    }
    let w0 = best.0;
    if w0 * span < 2.0 * std::f64::consts::PI {
        return Err(Error::FitFailure(format!(
            "oscillation unresolved: ω·t_span = {:.3} < 2π",
            w0 * span
        )));
    }
    // Envelope decay from the RMS of the two halves.
    let half = m / 2;
    let rms = |a: &[f64]| (a.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / a.len() as f64).sqrt();
    let (r1, r2) = (rms(&y[..half]), rms(&y[half..]));
    let gamma0 = if r1 > 0.0 && r2 > 0.0 && r1 > r2 {
        (r1 / r2).ln() / (t[half] - t[0]).max(dt)
    } else {
        1.0 / span
    };
    // Linear least squares for the phase at fixed (ω0, γ0).
    let (mut scc, mut sss, mut scs, mut syc, mut sys) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..m {
        let e = (-gamma0 * t[i]).exp();
        let (c, s) = ((w0 * t[i]).cos() * e, (w0 * t[i]).sin() * e);
        scc += c * c;
        sss += s * s;
        scs += c * s;
        syc += (y[i] - mean) * c;
        sys += (y[i] - mean) * s;
    }
    let det = scc * sss - scs * scs;
    let (a_c, a_s) = if det.abs() > 0.0 {
        ((syc * sss - sys * scs) / det, (sys * scc - syc * scs) / det)
    } else {
        (amp, 0.0)
    };
    // a_c cos + a_s sin = A sin(ωt + φ0) with A sinφ0 = a_c, A cosφ0 = a_s.
    let a_init = a_c.hypot(a_s);
    let phi_init = a_c.atan2(a_s);
    let model = |q: &[f64], ti: f64| q[0] * (-q[1] * ti).exp() * (q[2] * ti + q[3]).sin() + q[4];
    let res = levenberg_marquardt(
        |q, r| {
            for i in 0..m {
                r[i] = model(q, t[i]) - y[i];
            }
        },
        m,
        &[a_init, gamma0, w0, phi_init, mean],
        &LmOptions::default(),
    )?;
    let q = &res.params;
    if res.residual_rms > residual_threshold * amp {
        return Err(Error::FitFailure(format!(
            "damped-sinusoid residual {:e} exceeds {:e}",
            res.residual_rms,
            residual_threshold * amp
        )));
    }
    // Normalise a negative-ω solution to the positive branch.
    let (omega, sigma) = (q[2], res.stderr(2).unwrap_or(f64::NAN));
    if omega <= 0.0 || omega * span < 2.0 * std::f64::consts::PI {
        return Err(Error::FitFailure(format!("fitted ω = {omega} unresolved over the window")));
    }
    Ok((omega, sigma, q[1], res.residual_rms))
}

/// Cavity Ramsey: fitted conditional cavity frequency `ω_{g|e}`.
pub fn cavity_ramsey(p: &EffectiveParams, s: QubitSector, cfg: &ProtocolConfig) -> Result<FrequencyFit> {
    let trace = cavity_ramsey_trace(p, s, cfg)?;
    let (w, sigma, decay, rms) = fit_damped_sinusoid(&trace, cfg.fit_residual_threshold)?;
    Ok(FrequencyFit {
        omega: w - cfg.ramsey_offset + cfg.omega_r,
        omega_sigma: sigma,
        decay,
        residual_rms: rms,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub kappa: f64,
    pub kappa_sigma: f64,
    pub amplitude: f64,
    pub residual_rms: f64,
}

/// Sliding-window photon number `n̄_avg(t) = φ_a(t)/(τ χ_a)` with
/// `φ_a(t) = χ_a ∫_t^{t+τ} |ā_σ|²`.
pub fn cavity_t1_trace(
    p: &EffectiveParams,
    s: QubitSector,
    cfg: &ProtocolConfig,
    tau: f64,
) -> Result<CavityTrace> {
    cfg.validate()?;
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter("window length must be positive".into()));
    }
    let prep = prepare(p, cfg)?;
    let a0 = sector_amplitude(&prep, s);
    let mut rng = cfg.rng(sector_stream(STREAM_CAVITY_T1, s));
    let times = cfg.cavity_grid.times();
    let signal = times
        .iter()
        .map(|&t| {
            let f = |x: f64| Complex64::new(free_amplitude(p, s, a0, x).norm_sqr(), 0.0);
            let phi_a = cfg.chi_a * adaptive_gauss_kronrod(&f, t, t + tau, 1e-14, 30).re;
            phi_a / (tau * cfg.chi_a) + gaussian(&mut rng, cfg.noise.trace)
        })
        .collect();
    Ok(CavityTrace { times, signal })
}

/// Fits `A e^{-κt}` to a photon-number trace.
pub fn fit_exponential_decay(trace: &CavityTrace) -> Result<DecayFit> {
    let t = &trace.times;
    let y = &trace.signal;
    let m = t.len();
    // Log-linear start from the positive samples.
    let pts: Vec<(f64, f64)> = t.iter().zip(y).filter(|(_, v)| **v > 0.0).map(|(a, b)| (*a, b.ln())).collect();
    if pts.len() < 2 {
        return Err(Error::FitFailure("too few positive samples for an exponential fit".into()));
    }
    let k = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / k, sy / k);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { -1.0 };
    let a0 = (my - slope * mx).exp();
    let res = levenberg_marquardt(
        |q, r| {
            for i in 0..m {
                r[i] = q[0] * (-q[1] * t[i]).exp() - y[i];
            }
        },
        m,
        &[a0, -slope],
        &LmOptions::default(),
    )?;
    let q = &res.params;
    if !(q[1] > 0.0) {
        return Err(Error::FitFailure(format!("fitted decay rate {} is not positive", q[1])));
    }
    Ok(DecayFit {
        kappa: q[1],
        kappa_sigma: res.stderr(1).unwrap_or(f64::NAN),
        amplitude: q[0],
        residual_rms: res.residual_rms,
    })
}

/// Cavity T1 through the ancilla sliding-window phase: fitted `κ_{g|e}`.
pub fn cavity_t1(p: &EffectiveParams, s: QubitSector, cfg: &ProtocolConfig) -> Result<DecayFit> {
    fit_exponential_decay(&cavity_t1_trace(p, s, cfg, cfg.tau_slide)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonCalibration {
    pub n_avg: f64,
    pub n0_est: f64,
    /// `κ_g t/(1 - e^{-κ_g t})`.
    pub correction: f64,
}

/// Decay-correction factor `x/(1 - e^{-x})`, equal to 1 at `x = 0`.
pub fn decay_correction(x: f64) -> f64 {
    1.0 / phi1(Complex64::new(-x, 0.0)).re
}

/// `n̄_avg = φ_a/(χ_a t)` over `[0, t_window]` with the qubit in g, and
/// `n̄₀ = n̄_avg κ_g t/(1 - e^{-κ_g t})`.
pub fn photon_calibration(p: &EffectiveParams, cfg: &ProtocolConfig, kappa_g: f64) -> Result<PhotonCalibration> {
    cfg.validate()?;
    if !(kappa_g >= 0.0 && kappa_g.is_finite()) {
        return Err(Error::InvalidParameter(format!("kappa_g = {kappa_g} must be ≥ 0")));
    }
    let prep = prepare(p, cfg)?;
    let t = cfg.t_window;
    let f = |x: f64| Complex64::new(free_amplitude(p, QubitSector::Up, prep.a_up, x).norm_sqr(), 0.0);
    let phi_a = cfg.chi_a * adaptive_gauss_kronrod(&f, 0.0, t, 1e-14, 30).re;
    let n_avg = phi_a / (cfg.chi_a * t);
    let correction = decay_correction(kappa_g * t);
    Ok(PhotonCalibration {
        n_avg,
        n0_est: n_avg * correction,
        correction,
    })
}

/// Runs the full protocol chain and assembles a [`MeasurementSet`], adding
/// per-observable Gaussian noise from `cfg.noise`.
pub fn measurement_set(p: &EffectiveParams, cfg: &ProtocolConfig) -> Result<MeasurementSet> {
    cfg.validate()?;
    if !(cfg.n0 > 0.0) {
        return Err(Error::InvalidParameter("a measurement set needs n0 > 0".into()));
    }
    let wg = cavity_ramsey(p, QubitSector::Up, cfg)?;
    let we = cavity_ramsey(p, QubitSector::Down, cfg)?;
    let kg = cavity_t1(p, QubitSector::Up, cfg)?;
    let ke = cavity_t1(p, QubitSector::Down, cfg)?;
    let cal = photon_calibration(p, cfg, kg.kappa)?;
    let noiseless = ProtocolConfig {
        noise: NoiseSpec::default(),
        ..*cfg
    };
    let ramsey = qubit_ramsey_at(p, &noiseless, &[cfg.t_f])?;
    let n = &cfg.noise;
    let mut rng = cfg.rng(STREAM_OBSERVABLES);
    let mut g = |s: f64| gaussian(&mut rng, s);
    Ok(MeasurementSet {
        omega_g: wg.omega + g(n.omega),
        omega_e: we.omega + g(n.omega),
        kappa_g: kg.kappa + g(n.kappa),
        kappa_e: ke.kappa + g(n.kappa),
        phi: ramsey.phi[0] + g(n.phi),
        zeta: ramsey.zeta[0] + g(n.zeta),
        n0: cal.n0_est + g(n.n0),
        t_f: cfg.t_f,
        omega_r: cfg.omega_r,
        sigmas: Some(MeasurementSigmas {
            omega_g: n.omega,
            omega_e: n.omega,
            kappa_g: n.kappa,
            kappa_e: n.kappa,
            phi: n.phi,
            zeta: n.zeta,
            n0: n.n0,
        }),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CwPoint {
    pub delta_d: f64,
    pub stark: Option<f64>,
    pub dephasing: Option<f64>,
    pub oracle_stark: Option<f64>,
    pub oracle_dephasing: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CwSweep {
    pub epsilon: Complex64,
    pub points: Vec<CwPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CwOptions {
    pub backend: Backend,
    /// Compute both backends.
    pub cross_check: bool,
    pub n_max: usize,
}

impl Default for CwOptions {
    fn default() -> Self {
        Self {
            backend: Backend::Semiclassical,
            cross_check: false,
            n_max: 14,
        }
    }
}

impl CwSweep {
    /// Detunings of the largest |Δq| and largest Γq, from the formula columns
    /// when present and the oracle columns otherwise.
    pub fn peak_detunings(&self) -> Option<(f64, f64)> {
        let pick = |f: &dyn Fn(&CwPoint) -> Option<f64>| {
            self.points
                .iter()
                .filter_map(|pt| f(pt).map(|v| (pt.delta_d, v)))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(d, _)| d)
        };
        let stark = pick(&|pt| pt.stark.or(pt.oracle_stark).map(f64::abs))?;
        let deph = pick(&|pt| pt.dephasing.or(pt.oracle_dephasing))?;
        Some((stark, deph))
    }

    pub fn to_table(&self) -> CsvTable {
        let has_formula = self.points.iter().any(|p| p.stark.is_some());
        let has_oracle = self.points.iter().any(|p| p.oracle_stark.is_some());
        let mut header = vec!["delta_d"];
        if has_formula {
            header.extend(["stark_shift", "dephasing_rate"]);
        }
        if has_oracle {
            header.extend(["oracle_stark_shift", "oracle_dephasing_rate"]);
        }
        let mut t = CsvTable::new(header);
        for pt in &self.points {
            let mut row = vec![pt.delta_d];
            let v = |x: Option<f64>| x.unwrap_or(f64::NAN);
            if has_formula {
                row.extend([v(pt.stark), v(pt.dephasing)]);
            }
            if has_oracle {
                row.extend([v(pt.oracle_stark), v(pt.oracle_dephasing)]);
            }
            t.push(row);
        }
        t
    }
}

/// Maps the CW steady state over detunings. Per-point failures are recorded
/// and the sweep continues; an empty list is a configuration error.
pub fn cw_sweep(
    p: &EffectiveParams,
    epsilon: Complex64,
    delta_d_list: &[f64],
    opts: &CwOptions,
) -> Result<CwSweep> {
    if delta_d_list.is_empty() {
        return Err(Error::InvalidParameter("detuning list is empty".into()));
    }
    if delta_d_list.iter().any(|d| !d.is_finite()) {
        return Err(Error::InvalidParameter("detunings must be finite".into()));
    }
    let formula = opts.cross_check || opts.backend == Backend::Semiclassical;
    let oracle = opts.cross_check || opts.backend == Backend::Oracle;
    let spec = HilbertSpec::qubit(opts.n_max);
    let oracle_opts = OracleOptions::with_tolerances(1e-10, 1e-14);
    let points = delta_d_list
        .par_iter()
        .map(|&dd| {
            let mut pt = CwPoint {
                delta_d: dd,
                stark: None,
                dephasing: None,
                oracle_stark: None,
                oracle_dephasing: None,
                error: None,
            };
            let mut errs = Vec::new();
            if formula {
                match cw_steady_state(p, epsilon, dd) {
                    Ok((s, g)) => {
                        pt.stark = Some(s);
                        pt.dephasing = Some(g);
                    }
                    Err(e) => errs.push(e.to_string()),
                }
            }
            if oracle {
                let drive = ConstantDrive { epsilon, delta_d: dd };
                match cw_oracle_rate(p, &spec, drive, &oracle_opts) {
                    Ok((s, g)) => {
                        pt.oracle_stark = Some(s);
                        pt.oracle_dephasing = Some(g);
                    }
                    Err(e) => errs.push(e.to_string()),
                }
            }
            if !errs.is_empty() {
                pt.error = Some(errs.join("; "));
            }
            pt
        })
        .collect();
    Ok(CwSweep { epsilon, points })
}

/// Smallest |φ| for which `ln ζ/φ` is reported.
pub const FWM_PHI_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FwmExperiment {
    pub phi: f64,
    pub ln_zeta: f64,
    pub ratio: f64,
}

pub fn fwm_experiment(p: &EffectiveParams, fwm: &FwmSpec, n_max: usize) -> Result<FwmExperiment> {
    let spec = HilbertSpec {
        n_max,
        qubit_dim: 3,
        leak_threshold: crate::oracle::DEFAULT_LEAK_THRESHOLD,
    };
    let r = evolve_fwm(p, &spec, fwm, &OracleOptions::default())?;
    if r.phi.abs() < FWM_PHI_THRESHOLD {
        return Err(Error::RatioUndefined(format!(
            "|φ| = {:e} below {FWM_PHI_THRESHOLD:e}",
            r.phi.abs()
        )));
    }
    Ok(FwmExperiment {
        phi: r.phi,
        ln_zeta: r.ln_zeta,
        ratio: r.ln_zeta / r.phi,
    })
}

/// `ln ζ/φ` for a coherent state in the long-time limit (independent of n0).
pub fn coherent_state_ratio(p: &EffectiveParams) -> Result<f64> {
    let w = crate::semiclassical::long_time_ratio(p, 1.0)?;
    if w.im.abs() < f64::MIN_POSITIVE {
        return Err(Error::RatioUndefined("coherent-state phase vanishes".into()));
    }
    Ok(w.re / w.im)
}

/// Coherence coefficient consistency helper used in reports.
pub fn coefficient(p: &EffectiveParams) -> Complex64 {
    coherence_coefficient(p).0
}
