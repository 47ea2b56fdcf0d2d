// Copyright 2026 nrdisp Contributors
// SPDX-License-Identifier: Apache-2.0

//! Semiclassical dynamics: conditional cavity amplitudes, the qubit-coherence
//! equation of motion and the closed-form results built on them.
//!
//! Each conditional amplitude obeys `i dā_σ/dt = 𝓔_σ ā_σ + ε(t)` with `𝓔_σ`
//! evaluated at detuning `Δc - Δd`, and the coherence obeys
//! `d⟨σ₋⟩/dt = ℭ ā_↑ ā*_↓ ⟨σ₋⟩`. For piecewise-constant drives both are
//! integrated in closed form, so the only error is floating-point rounding.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::CsvTable;
use crate::model::{
    coherence_coefficient, conditional_energy_detuned, EffectiveParams, QubitSector,
};

const C0: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// `φ₁(x) = (eˣ - 1)/x`, accurate near `x = 0`.
pub fn phi1(x: Complex64) -> Complex64 {
    if x.norm() < 0.5 {
        // Taylor series Σ xᵏ/(k+1)!; 20 terms reach rounding for |x| < 0.5.
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for k in 1..20 {
            term = term * x / (k as f64 + 1.0);
            sum += term;
        }
        sum
    } else {
        (x.exp() - 1.0) / x
    }
}

/// One constant-amplitude drive segment on `[t_start, t_end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveSegment {
    pub t_start: f64,
    pub t_end: f64,
    pub epsilon: Complex64,
}

/// Piecewise-constant cavity drive; `ε = 0` outside the segments.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DriveEnvelope {
    pub segments: Vec<DriveSegment>,
    /// Drive detuning from the reference frame (rad/µs).
    pub delta_d: f64,
}

impl DriveEnvelope {
    pub fn new(segments: Vec<DriveSegment>, delta_d: f64) -> Result<Self> {
        let d = Self { segments, delta_d };
        d.validate()?;
        Ok(d)
    }

    pub fn none() -> Self {
        Self::default()
    }

    /// Square pulse of amplitude `epsilon` on `[t_start, t_start + width)`.
    pub fn square(t_start: f64, width: f64, epsilon: Complex64, delta_d: f64) -> Result<Self> {
        Self::new(
            vec![DriveSegment {
                t_start,
                t_end: t_start + width,
                epsilon,
            }],
            delta_d,
        )
    }

    /// Constant drive switched on at `t_start` and never switched off.
    pub fn continuous(t_start: f64, epsilon: Complex64, delta_d: f64) -> Result<Self> {
        Self::new(
            vec![DriveSegment {
                t_start,
                // f64::MAX rather than ∞ keeps the envelope JSON-serialisable.
                t_end: f64::MAX,
                epsilon,
            }],
            delta_d,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !self.delta_d.is_finite() {
            return Err(Error::InvalidParameter("drive detuning must be finite".into()));
        }
        for s in &self.segments {
            if !s.t_start.is_finite()
                || !s.t_end.is_finite()
                || s.t_end <= s.t_start
                || !s.epsilon.re.is_finite()
                || !s.epsilon.im.is_finite()
            {
                return Err(Error::InvalidParameter(format!(
                    "invalid drive segment [{}, {}) with ε = {}",
                    s.t_start, s.t_end, s.epsilon
                )));
            }
        }
        if self.segments.windows(2).any(|w| w[1].t_start < w[0].t_end) {
            return Err(Error::InvalidParameter(
                "drive segments must be ordered and non-overlapping".into(),
            ));
        }
        Ok(())
    }

    /// Drive amplitude in effect on the open interval just after `t`.
    pub fn epsilon_after(&self, t: f64) -> Complex64 {
        self.segments
            .iter()
            .find(|s| s.t_start <= t && t < s.t_end)
            .map_or(C0, |s| s.epsilon)
    }

    /// End of the last segment, or `-∞` when undriven.
    pub fn end(&self) -> f64 {
        self.segments.last().map_or(f64::NEG_INFINITY, |s| s.t_end)
    }

    /// Segment boundaries strictly inside `(a, b)`, sorted.
    fn breakpoints_within(&self, a: f64, b: f64) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .segments
            .iter()
            .flat_map(|s| [s.t_start, s.t_end])
            .filter(|&t| t > a && t < b)
            .collect();
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub method: String,
    /// Number of constant-coefficient sub-intervals propagated.
    pub intervals: usize,
    /// Sub-intervals whose coherence integral fell back to quadrature.
    pub quadrature_intervals: usize,
    pub drive: DriveEnvelope,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub a_up: Vec<Complex64>,
    pub a_down: Vec<Complex64>,
    /// `⟨σ₋(t)⟩`; absent until [`evolve_coherence`] runs.
    pub sigma_minus: Option<Vec<Complex64>>,
    /// `ln(⟨σ₋(t)⟩/σ₀) = ℭ ∫ ā_↑ ā*_↓`, kept separately so that strong
    /// dephasing never underflows.
    pub ln_ratio: Option<Vec<Complex64>>,
    pub meta: TrajectoryMeta,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn to_table(&self) -> CsvTable {
        let mut t = CsvTable::new([
            "t_us",
            "re_a_up",
            "im_a_up",
            "re_a_down",
            "im_a_down",
            "re_sigma_minus",
            "im_sigma_minus",
        ]);
        for i in 0..self.len() {
            let s = self.sigma_minus.as_ref().map_or(Complex64::new(f64::NAN, f64::NAN), |v| v[i]);
            t.push(vec![
                self.times[i],
                self.a_up[i].re,
                self.a_up[i].im,
                self.a_down[i].re,
                self.a_down[i].im,
                s.re,
                s.im,
            ]);
        }
        t
    }

    pub fn to_csv_string(&self) -> String {
        self.to_table().to_csv_string()
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("time grid is empty".into()));
    }
    if grid.iter().any(|t| !t.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "time grid must be finite and strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Exact propagation of `i da/dt = E a + ε` over a duration `h`.
fn propagate(a: Complex64, e: Complex64, eps: Complex64, h: f64) -> Complex64 {
    let x = -I * e * h;
    a * x.exp() - I * eps * h * phi1(x)
}

/// Evolves both conditional amplitudes from their values at `grid[0]`.
pub fn evolve_amplitudes(
    p: &EffectiveParams,
    drive: &DriveEnvelope,
    a0_up: Complex64,
    a0_down: Complex64,
    grid: &[f64],
) -> Result<TrajectoryRecord> {
    check_grid(grid)?;
    drive.validate()?;
    let e_up = conditional_energy_detuned(p, QubitSector::Up, drive.delta_d).0;
    let e_down = conditional_energy_detuned(p, QubitSector::Down, drive.delta_d).0;
    let mut a_up = Vec::with_capacity(grid.len());
    let mut a_down = Vec::with_capacity(grid.len());
    let (mut u, mut d) = (a0_up, a0_down);
    a_up.push(u);
    a_down.push(d);
    let mut intervals = 0;
    for w in grid.windows(2) {
        let mut t = w[0];
        let stops = drive.breakpoints_within(w[0], w[1]);
        for stop in stops.into_iter().chain(std::iter::once(w[1])) {
            let eps = drive.epsilon_after(t);
            u = propagate(u, e_up, eps, stop - t);
            d = propagate(d, e_down, eps, stop - t);
            t = stop;
            intervals += 1;
        }
        a_up.push(u);
        a_down.push(d);
    }
    Ok(TrajectoryRecord {
        times: grid.to_vec(),
        a_up,
        a_down,
        sigma_minus: None,
        ln_ratio: None,
        meta: TrajectoryMeta {
            method: "piecewise-analytic".into(),
            intervals,
            quadrature_intervals: 0,
            drive: drive.clone(),
        },
    })
}

/// `∫₀ʰ ā_↑(τ) ā*_↓(τ) dτ` over one constant-drive interval.
///
/// Uses the decomposition `ā_σ(τ) = c_σ e^{-i𝓔_σ τ} + d_σ` with the
/// stationary value `d_σ = -ε/𝓔_σ`. When `d_σ` would dominate `c_σ` by many
/// orders of magnitude the cancellation is avoided by quadrature.
fn interval_product_integral(
    u0: Complex64,
    d0: Complex64,
    e_up: Complex64,
    e_down: Complex64,
    eps: Complex64,
    h: f64,
) -> (Complex64, bool) {
    if eps == C0 {
        let w = -I * (e_up - e_down.conj());
        return (u0 * d0.conj() * h * phi1(w * h), false);
    }
    let scale = u0.norm() + d0.norm() + eps.norm() * h + f64::MIN_POSITIVE;
    let ill = |e: Complex64| e == C0 || eps.norm() / e.norm() > 1e6 * scale;
    if ill(e_up) || ill(e_down) {
        let f = |tau: f64| propagate(u0, e_up, eps, tau) * propagate(d0, e_down, eps, tau).conj();
        return (adaptive_gauss_kronrod(&f, 0.0, h, 1e-14, 40), true);
    }
    let su = -eps / e_up;
    let sd = -eps / e_down;
    let cu = u0 - su;
    let cd = d0 - sd;
    let int_exp = |w: Complex64| h * phi1(w * h);
    let val = cu * cd.conj() * int_exp(-I * (e_up - e_down.conj()))
        + cu * sd.conj() * int_exp(-I * e_up)
        + su * cd.conj() * int_exp(I * e_down.conj())
        + su * sd.conj() * h;
    (val, false)
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const G_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let mut k = C0;
    let mut g = C0;
    for (i, (&x, &w)) in GK_NODES.iter().zip(GK_WEIGHTS.iter()).enumerate() {
        let v = if x == 0.0 { f(c) } else { f(c - r * x) + f(c + r * x) };
        k += v * w;
        // Gauss points are the odd-indexed Kronrod nodes.
        if i % 2 == 1 {
            g += v * G_WEIGHTS[i / 2];
        }
    }
    (k * r, ((k - g) * r).norm())
}

/// Adaptive Gauss-Kronrod (7-15) quadrature of a complex integrand.
pub fn adaptive_gauss_kronrod<F: Fn(f64) -> Complex64>(
    f: &F,
    a: f64,
    b: f64,
    rtol: f64,
    max_depth: usize,
) -> Complex64 {
    fn recurse<F: Fn(f64) -> Complex64>(
        f: &F,
        a: f64,
        b: f64,
        whole: (Complex64, f64),
        tol: f64,
        depth: usize,
    ) -> Complex64 {
        let (val, err) = whole;
        if err <= tol || depth == 0 {
            return val;
        }
        let m = 0.5 * (a + b);
        let left = gk15(f, a, m);
        let right = gk15(f, m, b);
        recurse(f, a, m, left, 0.5 * tol, depth - 1) + recurse(f, m, b, right, 0.5 * tol, depth - 1)
    }
    let whole = gk15(f, a, b);
    let tol = rtol * whole.0.norm().max(f64::MIN_POSITIVE);
    recurse(f, a, b, whole, tol, max_depth)
}

/// Adds `⟨σ₋(t)⟩ = σ₀ exp(ℭ ∫ ā_↑ ā*_↓)` to an amplitude trajectory, with
/// `σ₀` taken at the first grid time.
pub fn evolve_coherence(
    p: &EffectiveParams,
    traj: &TrajectoryRecord,
    sigma0: Complex64,
) -> Result<TrajectoryRecord> {
    if traj.is_empty() || traj.a_up.len() != traj.len() || traj.a_down.len() != traj.len() {
        return Err(Error::InvalidParameter(
            "trajectory has no amplitudes or mismatched arrays".into(),
        ));
    }
    let drive = &traj.meta.drive;
    let e_up = conditional_energy_detuned(p, QubitSector::Up, drive.delta_d).0;
    let e_down = conditional_energy_detuned(p, QubitSector::Down, drive.delta_d).0;
    let coeff = coherence_coefficient(p).0;
    let mut integral = C0;
    let mut ln_ratio = Vec::with_capacity(traj.len());
    let mut sigma = Vec::with_capacity(traj.len());
    ln_ratio.push(C0);
    sigma.push(sigma0);
    let mut quad = 0;
    for i in 1..traj.len() {
        let (t0, t1) = (traj.times[i - 1], traj.times[i]);
        let (mut u, mut d) = (traj.a_up[i - 1], traj.a_down[i - 1]);
        let mut t = t0;
        let stops = drive.breakpoints_within(t0, t1);
        for stop in stops.into_iter().chain(std::iter::once(t1)) {
            let eps = drive.epsilon_after(t);
            let h = stop - t;
            let (val, used_quad) = interval_product_integral(u, d, e_up, e_down, eps, h);
            integral += val;
            quad += used_quad as usize;
            u = propagate(u, e_up, eps, h);
            d = propagate(d, e_down, eps, h);
            t = stop;
        }
        let l = coeff * integral;
        ln_ratio.push(l);
        sigma.push(sigma0 * l.exp());
    }
    let mut out = traj.clone();
    out.sigma_minus = Some(sigma);
    out.ln_ratio = Some(ln_ratio);
    out.meta.quadrature_intervals = quad;
    Ok(out)
}

/// Convenience: amplitudes and coherence in one call.
pub fn simulate(
    p: &EffectiveParams,
    drive: &DriveEnvelope,
    a0_up: Complex64,
    a0_down: Complex64,
    sigma0: Complex64,
    grid: &[f64],
) -> Result<TrajectoryRecord> {
    evolve_coherence(p, &evolve_amplitudes(p, drive, a0_up, a0_down, grid)?, sigma0)
}

/// Conditional amplitudes left in the cavity by `drive`, evaluated at `t_end`
/// starting from vacuum at `t_start`. Used when the short-pulse limit is off.
pub fn pulse_prepared_amplitudes(
    p: &EffectiveParams,
    drive: &DriveEnvelope,
    t_start: f64,
    t_end: f64,
) -> Result<(Complex64, Complex64)> {
    let tr = evolve_amplitudes(p, drive, C0, C0, &[t_start, t_end])?;
    Ok((tr.a_up[1], tr.a_down[1]))
}

fn decay_exponent(p: &EffectiveParams) -> Complex64 {
    Complex64::new(p.total_decay(), p.lambda())
}

/// `ln(⟨σ₋(t_f)⟩/⟨σ₋(0)⟩)` for free decay from equal amplitudes `√n0`:
/// `n0 ℭ (1 - e^{-z t_f})/z` with `z = iλ + κ + Γ cosh η`.
/// Imaginary part is the phase φ, real part is `ln ζ`.
pub fn free_decay_closed_form(p: &EffectiveParams, n0: f64, t_f: f64) -> Result<Complex64> {
    if !(n0 >= 0.0) || !n0.is_finite() || !t_f.is_finite() || t_f < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "need finite n0 ≥ 0 and t_f ≥ 0, got n0 = {n0}, t_f = {t_f}"
        )));
    }
    let z = decay_exponent(p);
    if z == C0 {
        return Err(Error::DegenerateDecay("iλ + κ + Γ cosh η = 0".into()));
    }
    Ok(coherence_coefficient(p).0 * n0 * t_f * phi1(-z * t_f))
}

/// `t → ∞` limit of [`free_decay_closed_form`]: `n0 ℭ/z`.
pub fn long_time_ratio(p: &EffectiveParams, n0: f64) -> Result<Complex64> {
    if !(n0 >= 0.0) || !n0.is_finite() {
        return Err(Error::InvalidParameter(format!("need finite n0 ≥ 0, got {n0}")));
    }
    if !(p.total_decay() > 0.0) {
        return Err(Error::DegenerateDecay("κ + Γ cosh η must be positive".into()));
    }
    Ok(coherence_coefficient(p).0 * n0 / decay_exponent(p))
}

/// Qubit Stark shift and dephasing rate `(Δq, Γq)` under a constant drive,
/// from `iΔq - Γq = ℭ|ε|²/(𝓔_↑ 𝓔*_↓)`.
pub fn cw_steady_state(p: &EffectiveParams, epsilon: Complex64, delta_d: f64) -> Result<(f64, f64)> {
    let e_up = conditional_energy_detuned(p, QubitSector::Up, delta_d).0;
    let e_down = conditional_energy_detuned(p, QubitSector::Down, delta_d).0;
    if e_up == C0 || e_down == C0 {
        return Err(Error::DegenerateDecay("a conditional energy vanishes".into()));
    }
    let x = coherence_coefficient(p).0 * epsilon.norm_sqr() / (e_up * e_down.conj());
    Ok((x.im, -x.re))
}

/// Steady coherence ratio after a single photon has leaked out:
/// `(κ + Γ e^{iθ})/(iλ + κ + Γ cosh η)`.
pub fn fock_steady_ratio(p: &EffectiveParams) -> Result<Complex64> {
    if !(p.total_decay() > 0.0) {
        return Err(Error::DegenerateDecay("κ + Γ cosh η must be positive".into()));
    }
    let num = Complex64::new(p.kappa(), 0.0) + Complex64::from_polar(p.gamma_nr(), p.theta());
    Ok(num / decay_exponent(p))
}

/// Splits a complex log-ratio into `(ln ζ, φ)`.
pub fn zeta_phi(ln_ratio: Complex64) -> (f64, f64) {
    (ln_ratio.re, ln_ratio.im)
}
