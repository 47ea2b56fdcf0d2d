// Copyright 2026 nrdisp Contributors
// SPDX-License-Identifier: Apache-2.0

//! Effective qubit-cavity model.
//!
//! The master equation acting on the qubit and the cavity mode `a` is
//!
//! ```text
//! dρ/dt = -i[Δc a†a + (λ/2) σz a†a, ρ] + κ D[a]ρ + Γ D[exp((iθ + η) σz / 2) a]ρ
//! ```
//!
//! written in the rotating frame of the qubit and of a fixed cavity reference
//! frequency. All angular frequencies are in rad/µs and all times in µs.
//!
//! Sign convention: `QubitSector::Up` is the qubit ground state |g⟩ with
//! σz = +1, `QubitSector::Down` is |e⟩ with σz = -1. With this choice the
//! cavity frequency pull is `ω_g - ω_e = λ`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Wraps an angle into (-π, π].
pub fn normalize_angle(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Converts a cyclic frequency in MHz into an angular frequency in rad/µs.
pub fn mhz(f: f64) -> f64 {
    2.0 * PI * f
}

/// Converts an angular frequency in rad/µs into cyclic MHz.
pub fn to_mhz(w: f64) -> f64 {
    w / (2.0 * PI)
}

/// The six real parameters of the effective non-reciprocal master equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct EffectiveParams {
    delta_c: f64,
    lambda: f64,
    kappa: f64,
    gamma_nr: f64,
    theta: f64,
    eta: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    delta_c: f64,
    lambda: f64,
    kappa: f64,
    gamma_nr: f64,
    theta: f64,
    eta: f64,
}

impl TryFrom<RawParams> for EffectiveParams {
    type Error = Error;

    fn try_from(r: RawParams) -> Result<Self> {
        EffectiveParams::new(r.delta_c, r.lambda, r.kappa, r.gamma_nr, r.theta, r.eta)
    }
}

impl From<EffectiveParams> for RawParams {
    fn from(p: EffectiveParams) -> Self {
        RawParams {
            delta_c: p.delta_c,
            lambda: p.lambda,
            kappa: p.kappa,
            gamma_nr: p.gamma_nr,
            theta: p.theta,
            eta: p.eta,
        }
    }
}

impl EffectiveParams {
    /// Builds a validated parameter set. `theta` is wrapped into (-π, π].
    pub fn new(
        delta_c: f64,
        lambda: f64,
        kappa: f64,
        gamma_nr: f64,
        theta: f64,
        eta: f64,
    ) -> Result<Self> {
        let fields = [
            ("delta_c", delta_c),
            ("lambda", lambda),
            ("kappa", kappa),
            ("gamma_nr", gamma_nr),
            ("theta", theta),
            ("eta", eta),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} is not finite ({v})")));
            }
        }
        if kappa < 0.0 {
            return Err(Error::InvalidParameter(format!("kappa must be >= 0, got {kappa}")));
        }
        if gamma_nr < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "gamma_nr must be >= 0, got {gamma_nr}"
            )));
        }
        Ok(Self {
            delta_c,
            lambda,
            kappa,
            gamma_nr,
            theta: normalize_angle(theta),
            eta,
        })
    }

    /// Reciprocal dispersive model: `Γ = 0`.
    pub fn reciprocal(delta_c: f64, lambda: f64, kappa: f64) -> Result<Self> {
        Self::new(delta_c, lambda, kappa, 0.0, 0.0, 0.0)
    }

    pub fn delta_c(&self) -> f64 {
        self.delta_c
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Rate of the non-reciprocal dissipator, Γ.
    pub fn gamma_nr(&self) -> f64 {
        self.gamma_nr
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Returns a copy with a different cavity detuning.
    pub fn with_delta_c(&self, delta_c: f64) -> Result<Self> {
        Self::new(delta_c, self.lambda, self.kappa, self.gamma_nr, self.theta, self.eta)
    }

    pub fn gamma_sin_theta(&self) -> f64 {
        self.gamma_nr * self.theta.sin()
    }

    pub fn gamma_cos_theta(&self) -> f64 {
        self.gamma_nr * self.theta.cos()
    }

    pub fn gamma_sinh_eta(&self) -> f64 {
        self.gamma_nr * self.eta.sinh()
    }

    pub fn gamma_cosh_eta(&self) -> f64 {
        self.gamma_nr * self.eta.cosh()
    }

    /// `κ + Γ cosh η`, the sector-averaged photon decay rate.
    pub fn total_decay(&self) -> f64 {
        self.kappa + self.gamma_cosh_eta()
    }

    /// Photon-number decay rate of the cavity with the qubit in `s`:
    /// `κ + Γ exp(η σz)`.
    pub fn sector_decay(&self, s: QubitSector) -> f64 {
        self.kappa + self.gamma_nr * (self.eta * s.sign()).exp()
    }

    /// `iλ + κ + Γ cosh η`, the rate at which `ā_↑ ā*_↓` relaxes in free decay.
    pub fn coherence_decay(&self) -> Complex64 {
        Complex64::new(self.total_decay(), self.lambda)
    }
}

/// Qubit eigenstate of σz.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QubitSector {
    /// |g⟩, σz = +1.
    Up,
    /// |e⟩, σz = -1.
    Down,
}

impl QubitSector {
    pub fn sign(self) -> f64 {
        match self {
            QubitSector::Up => 1.0,
            QubitSector::Down => -1.0,
        }
    }

    pub const BOTH: [QubitSector; 2] = [QubitSector::Up, QubitSector::Down];
}

/// Complex frequency of the cavity conditioned on a qubit sector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConditionalEnergy(pub Complex64);

impl ConditionalEnergy {
    pub fn value(&self) -> Complex64 {
        self.0
    }

    /// Oscillation frequency, `Re 𝓔`.
    pub fn frequency(&self) -> f64 {
        self.0.re
    }

    /// Photon-number decay rate, `-2 Im 𝓔`.
    pub fn photon_decay(&self) -> f64 {
        -2.0 * self.0.im
    }
}

/// Coefficient `ℭ = -iλ + Γ(e^{iθ} - cosh η)` multiplying `ā_↑ ā*_↓` in the
/// qubit-coherence equation of motion. The Langevin coefficient is `Λ = iℭ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CoherenceCoefficient(pub Complex64);

impl CoherenceCoefficient {
    pub fn value(&self) -> Complex64 {
        self.0
    }

    /// `Λ = iℭ`.
    pub fn langevin(&self) -> Complex64 {
        I * self.0
    }

    pub fn from_langevin(lambda_coeff: Complex64) -> Self {
        Self(-I * lambda_coeff)
    }
}

/// `𝓔_σz = Δc + (λ/2)σz - i(κ + Γ e^{ησz})/2`.
pub fn conditional_energy(p: &EffectiveParams, s: QubitSector) -> ConditionalEnergy {
    conditional_energy_detuned(p, s, 0.0)
}

/// Conditional energy in the frame of a drive detuned by `delta_d` from the
/// reference, i.e. with `Δc` replaced by `Δc - Δd`.
pub fn conditional_energy_detuned(
    p: &EffectiveParams,
    s: QubitSector,
    delta_d: f64,
) -> ConditionalEnergy {
    let re = p.delta_c - delta_d + 0.5 * p.lambda * s.sign();
    let im = -0.5 * p.sector_decay(s);
    ConditionalEnergy(Complex64::new(re, im))
}

pub fn coherence_coefficient(p: &EffectiveParams) -> CoherenceCoefficient {
    let kick = Complex64::from_polar(p.gamma_nr, p.theta);
    CoherenceCoefficient(Complex64::new(-p.gamma_cosh_eta(), -p.lambda) + kick)
}

/// Inverts the forward maps `(conditional_energy × 2, coherence_coefficient)`.
///
/// With `A = Γ sinh η`, `B = κ + Γ cosh η`, `C = Γ sin θ` and
/// `D = Γ(cosh η - cos θ)`, the unknown `x = Γ cosh η` solves
/// `x = (A² + C² + D²) / (2D)`; the rest follows directly.
pub fn params_from_energies(
    e_up: ConditionalEnergy,
    e_down: ConditionalEnergy,
    coeff: CoherenceCoefficient,
) -> Result<EffectiveParams> {
    let (eu, ed, c) = (e_up.0, e_down.0, coeff.0);
    for (name, z) in [("e_up", eu), ("e_down", ed), ("coefficient", c)] {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::InvalidParameter(format!("{name} is not finite")));
        }
    }
    let delta_c = 0.5 * (eu.re + ed.re);
    let lambda = eu.re - ed.re;
    let a = -(eu.im - ed.im);
    let b = -(eu.im + ed.im);
    let cc = c.im + lambda;
    let d = -c.re;

    let scale = a.abs().max(b.abs()).max(cc.abs()).max(lambda.abs()).max(f64::MIN_POSITIVE);
    let tiny = 1e-12 * scale;
    if d.abs() <= tiny && a.abs() <= tiny && cc.abs() <= tiny {
        // Reciprocal limit: the Γ channel is indistinguishable from κ, θ and η
        // are indeterminate and reported as zero.
        return finish(delta_c, lambda, b, 0.0, 0.0, 0.0, b);
    }
    if d <= tiny {
        return Err(Error::NoPhysicalSolution {
            constraint: format!(
                "photon-induced dephasing Γ(cosh η - cos θ) = {d:e} must be positive \
                 when Γ sinh η = {a:e} or Γ sin θ = {cc:e} is nonzero"
            ),
        });
    }
    let x = (a * a + cc * cc + d * d) / (2.0 * d);
    let gamma_cos = x - d;
    let gamma = cc.hypot(gamma_cos);
    let eta = (a / gamma).asinh();
    let theta = cc.atan2(gamma_cos);
    finish(delta_c, lambda, b - x, gamma, theta, eta, b)
}

fn finish(
    delta_c: f64,
    lambda: f64,
    kappa: f64,
    gamma: f64,
    theta: f64,
    eta: f64,
    b: f64,
) -> Result<EffectiveParams> {
    let kappa = if kappa < 0.0 {
        if kappa >= -1e-9 * (b.abs() + 1.0) {
            0.0
        } else {
            return Err(Error::NoPhysicalSolution {
                constraint: format!("kappa = {kappa:e} < 0 (κ + Γ cosh η = {b:e})"),
            });
        }
    } else {
        kappa
    };
    if b < 0.0 {
        return Err(Error::NoPhysicalSolution {
            constraint: format!("κ + Γ cosh η = {b:e} < 0 (cavity gain)"),
        });
    }
    EffectiveParams::new(delta_c, lambda, kappa, gamma, theta, eta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> EffectiveParams {
        EffectiveParams::new(1.0, 0.4, 0.2, 0.1, 0.7, 0.3).unwrap()
    }

    #[test]
    fn theta_is_wrapped() {
        let p = EffectiveParams::new(0.0, 0.0, 0.1, 0.1, 3.0 * PI, 0.0).unwrap();
        assert!((p.theta() - PI).abs() < 1e-12);
        let p = EffectiveParams::new(0.0, 0.0, 0.1, 0.1, -PI, 0.0).unwrap();
        assert!((p.theta() - PI).abs() < 1e-12);
        let p = EffectiveParams::new(0.0, 0.0, 0.1, 0.1, -3.0, 0.0).unwrap();
        assert!((p.theta() + 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_negative_rates_and_nan() {
        assert!(EffectiveParams::new(0.0, 0.0, -0.1, 0.0, 0.0, 0.0).is_err());
        assert!(EffectiveParams::new(0.0, 0.0, 0.1, -1e-3, 0.0, 0.0).is_err());
        assert!(EffectiveParams::new(f64::NAN, 0.0, 0.1, 0.0, 0.0, 0.0).is_err());
        assert!(EffectiveParams::new(0.0, 0.0, 0.1, 0.0, 0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn conditional_energy_eta_zero() {
        let p = EffectiveParams::new(0.0, 0.0, 0.2, 0.1, 0.7, 0.0).unwrap();
        let e = conditional_energy(&p, QubitSector::Up).value();
        assert!(e.re.abs() < 1e-15);
        assert!((e.im + 0.15).abs() < 1e-15);
    }

    #[test]
    fn conditional_energy_generic() {
        // 1.0 + 0.2 and -(0.2 + 0.1 e^0.3)/2 evaluated independently.
        let e = conditional_energy(&sample(), QubitSector::Up).value();
        assert!((e.re - 1.2).abs() < 1e-15);
        assert!((e.im - (-0.167_492_940_378_800_16)).abs() < 1e-15);
    }

    #[test]
    fn sector_difference_identity() {
        let p = sample();
        let d = conditional_energy(&p, QubitSector::Up).value()
            - conditional_energy(&p, QubitSector::Down).value();
        assert!((d.re - p.lambda()).abs() < 1e-15);
        assert!((d.im + p.gamma_sinh_eta()).abs() < 1e-15);
    }

    #[test]
    fn coherence_coefficient_limits() {
        let p = EffectiveParams::new(0.3, 0.0, 0.2, 0.0, 0.5, 0.4).unwrap();
        assert_eq!(coherence_coefficient(&p).value(), Complex64::new(0.0, 0.0));
        let p = EffectiveParams::new(0.3, 0.0, 0.2, 5.0, 0.0, 0.0).unwrap();
        assert!(coherence_coefficient(&p).value().norm() < 1e-15);
    }

    #[test]
    fn coherence_coefficient_generic() {
        // -0.4i + 0.1 (cos 0.7 + i sin 0.7 - cosh 0.3), evaluated independently.
        let c = coherence_coefficient(&sample()).value();
        assert!((c.re - (-0.028_049_632_684_437_206)).abs() < 1e-15);
        assert!((c.im - (-0.335_578_231_276_230_9)).abs() < 1e-15);
        assert!((coherence_coefficient(&sample()).langevin() - I * c).norm() < 1e-16);
    }

    #[test]
    fn reciprocal_inversion_reports_zero_gamma() {
        let p = EffectiveParams::reciprocal(0.5, 0.3, 1.2).unwrap();
        let q = params_from_energies(
            conditional_energy(&p, QubitSector::Up),
            conditional_energy(&p, QubitSector::Down),
            coherence_coefficient(&p),
        )
        .unwrap();
        assert_eq!(q.gamma_nr(), 0.0);
        assert_eq!(q.theta(), 0.0);
        assert_eq!(q.eta(), 0.0);
        assert!((q.kappa() - 1.2).abs() < 1e-14);
    }

    #[test]
    fn inversion_reports_negative_kappa() {
        let p = sample();
        let mut eu = conditional_energy(&p, QubitSector::Up);
        let mut ed = conditional_energy(&p, QubitSector::Down);
        // Remove more total decay than κ provides.
        eu.0.im += 0.15;
        ed.0.im += 0.15;
        let err = params_from_energies(eu, ed, coherence_coefficient(&p)).unwrap_err();
        match err {
            Error::NoPhysicalSolution { constraint } => assert!(constraint.contains("kappa")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn inversion_rejects_negative_dephasing() {
        let p = sample();
        let mut c = coherence_coefficient(&p);
        c.0.re = 0.01;
        assert!(matches!(
            params_from_energies(
                conditional_energy(&p, QubitSector::Up),
                conditional_energy(&p, QubitSector::Down),
                c
            ),
            Err(Error::NoPhysicalSolution { .. })
        ));
    }

    #[test]
    fn serde_validates() {
        let p = sample();
        let s = serde_json::to_string(&p).unwrap();
        let q: EffectiveParams = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
        let bad = s.replace("\"kappa\":0.2", "\"kappa\":-0.2");
        assert!(serde_json::from_str::<EffectiveParams>(&bad).is_err());
    }
}
