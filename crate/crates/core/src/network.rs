// Copyright 2026 nrdisp Contributors
// SPDX-License-Identifier: Apache-2.0

//! Coupled linear-mode bath and its reduction to [`EffectiveParams`].
//!
//! The network is described by a Hermitian hopping matrix `H` (rad/µs) and a
//! Hermitian positive-semidefinite dissipator matrix `Γ` (1/µs):
//!
//! ```text
//! H0 = Σ h_lm c_l† c_m,   L_diss ρ = Σ Γ_lm (c_m ρ c_l† - ½{c_l† c_m, ρ})
//! ```
//!
//! The qubit couples dispersively, `(λ0/2) σz c_q† c_q`, to exactly one mode
//! `c_q`. Matrices are expected in the rotating frame where the zero-frequency
//! response is the relevant one.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    params_from_energies, CoherenceCoefficient, ConditionalEnergy, EffectiveParams,
};

pub type CMatrix = DMatrix<Complex64>;

const C0: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Microscopic Jaynes-Cummings data for the qubit-coupled mode, used to check
/// that the dispersive description is valid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JcCoupling {
    /// Detuning between the qubit-coupled mode and the qubit (rad/µs).
    pub delta_jc: f64,
    /// Jaynes-Cummings coupling (rad/µs).
    pub g: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultimodeNetwork {
    h_mat: CMatrix,
    gamma_mat: CMatrix,
    cavity_index: usize,
    qubit_mode_index: usize,
    lambda0: f64,
    jc: Option<JcCoupling>,
}

impl MultimodeNetwork {
    pub fn new(
        h_mat: CMatrix,
        gamma_mat: CMatrix,
        cavity_index: usize,
        qubit_mode_index: usize,
        lambda0: f64,
    ) -> Result<Self> {
        let n = h_mat.nrows();
        if n < 2 {
            return Err(Error::InvalidNetwork(format!("need at least 2 modes, got {n}")));
        }
        if h_mat.ncols() != n || gamma_mat.nrows() != n || gamma_mat.ncols() != n {
            return Err(Error::InvalidNetwork("H and Γ must both be N×N".into()));
        }
        if cavity_index >= n || qubit_mode_index >= n {
            return Err(Error::InvalidNetwork(format!(
                "mode indices ({cavity_index}, {qubit_mode_index}) out of range for N = {n}"
            )));
        }
        if cavity_index == qubit_mode_index {
            return Err(Error::InvalidNetwork(
                "cavity and qubit-coupled mode must differ".into(),
            ));
        }
        if !lambda0.is_finite() {
            return Err(Error::InvalidNetwork("lambda0 must be finite".into()));
        }
        if h_mat.iter().chain(gamma_mat.iter()).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidNetwork("matrix entries must be finite".into()));
        }
        let h_dev = hermitian_deviation(&h_mat);
        if h_dev > 1e-12 * max_abs(&h_mat).max(1.0) {
            return Err(Error::InvalidNetwork(format!(
                "H is not Hermitian (max |H - H†| = {h_dev:e})"
            )));
        }
        let g_dev = hermitian_deviation(&gamma_mat);
        if g_dev > 1e-12 * max_abs(&gamma_mat).max(1.0) {
            return Err(Error::InvalidNetwork(format!(
                "Γ is not Hermitian (max |Γ - Γ†| = {g_dev:e})"
            )));
        }
        let min_eig = min_hermitian_eigenvalue(&gamma_mat);
        if min_eig < -1e-10 {
            return Err(Error::InvalidNetwork(format!(
                "Γ is not positive semidefinite (min eigenvalue {min_eig:e})"
            )));
        }
        Ok(Self {
            h_mat,
            gamma_mat,
            cavity_index,
            qubit_mode_index,
            lambda0,
            jc: None,
        })
    }

    pub fn with_jc(mut self, jc: JcCoupling) -> Self {
        self.jc = Some(jc);
        self
    }

    pub fn with_lambda0(&self, lambda0: f64) -> Self {
        let mut out = self.clone();
        out.lambda0 = lambda0;
        out
    }

    pub fn n_modes(&self) -> usize {
        self.h_mat.nrows()
    }

    pub fn h_mat(&self) -> &CMatrix {
        &self.h_mat
    }

    pub fn gamma_mat(&self) -> &CMatrix {
        &self.gamma_mat
    }

    pub fn cavity_index(&self) -> usize {
        self.cavity_index
    }

    pub fn qubit_mode_index(&self) -> usize {
        self.qubit_mode_index
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn jc(&self) -> Option<JcCoupling> {
        self.jc
    }

    /// Non-Hermitian dynamical matrix `M = H - iΓ/2`; amplitudes obey
    /// `i dc/dt = M c`.
    pub fn dynamical_matrix(&self) -> CMatrix {
        &self.h_mat - self.gamma_mat.map(|z| z * I * 0.5)
    }

    /// Loads a network from JSON; see [`NetworkFile`].
    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: NetworkFile = serde_json::from_str(s)?;
        file.into_network()
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&NetworkFile::from_network(self))?)
    }
}

/// On-disk network description. Complex entries are `[re, im]` pairs; matrices
/// are row-major lists of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkFile {
    /// `"rad_per_us"` (default) or `"mhz"` for cyclic MHz.
    #[serde(default)]
    pub units: Option<String>,
    pub h: Vec<Vec<[f64; 2]>>,
    pub gamma: Vec<Vec<[f64; 2]>>,
    pub cavity_index: usize,
    pub qubit_mode_index: usize,
    pub lambda0: f64,
    #[serde(default)]
    pub jc: Option<JcCoupling>,
}

impl NetworkFile {
    pub fn into_network(self) -> Result<MultimodeNetwork> {
        let scale = match self.units.as_deref() {
            None | Some("rad_per_us") => 1.0,
            Some("mhz") => 2.0 * std::f64::consts::PI,
            Some(other) => {
                return Err(Error::InvalidNetwork(format!("unknown units '{other}'")));
            }
        };
        let h = rows_to_matrix(&self.h, scale)?;
        let g = rows_to_matrix(&self.gamma, scale)?;
        let mut net = MultimodeNetwork::new(
            h,
            g,
            self.cavity_index,
            self.qubit_mode_index,
            self.lambda0 * scale,
        )?;
        if let Some(jc) = self.jc {
            net = net.with_jc(JcCoupling {
                delta_jc: jc.delta_jc * scale,
                g: jc.g * scale,
            });
        }
        Ok(net)
    }

    pub fn from_network(net: &MultimodeNetwork) -> Self {
        let rows = |m: &CMatrix| {
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
                .collect()
        };
        Self {
            units: Some("rad_per_us".into()),
            h: rows(&net.h_mat),
            gamma: rows(&net.gamma_mat),
            cavity_index: net.cavity_index,
            qubit_mode_index: net.qubit_mode_index,
            lambda0: net.lambda0,
            jc: net.jc,
        }
    }
}

fn rows_to_matrix(rows: &[Vec<[f64; 2]>], scale: f64) -> Result<CMatrix> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidNetwork("matrix must be square".into()));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| {
        Complex64::new(rows[i][j][0], rows[i][j][1]) * scale
    }))
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.norm()))
}

fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

pub(crate) fn min_hermitian_eigenvalue(m: &CMatrix) -> f64 {
    let sym = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    sym.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Linear response `χ(ω) = (ω - H + iΓ/2)^{-1}` of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct SusceptibilityMatrix {
    pub omega: f64,
    pub chi: CMatrix,
}

impl SusceptibilityMatrix {
    pub fn get(&self, l: usize, m: usize) -> Complex64 {
        self.chi[(l, m)]
    }
}

/// Largest condition number accepted before a frequency is declared singular.
pub const MAX_CONDITION: f64 = 1e14;

pub fn susceptibility(net: &MultimodeNetwork, omega: f64) -> Result<SusceptibilityMatrix> {
    let n = net.n_modes();
    let resolvent_inv =
        CMatrix::identity(n, n) * Complex64::new(omega, 0.0) - net.dynamical_matrix();
    let sv = resolvent_inv.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularAtFrequency { omega, condition });
    }
    let chi = resolvent_inv
        .lu()
        .try_inverse()
        .ok_or(Error::SingularAtFrequency { omega, condition })?;
    Ok(SusceptibilityMatrix { omega, chi })
}

/// Effective conditional energies and coherence coefficient obtained from the
/// zero-frequency susceptibility, before inversion to model parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EliminatedCoefficients {
    pub e_up: ConditionalEnergy,
    pub e_down: ConditionalEnergy,
    pub coefficient: CoherenceCoefficient,
    /// `χ⁰_qc` (qubit-mode row, cavity column).
    pub chi_qc: Complex64,
    /// `χ⁰_cq`.
    pub chi_cq: Complex64,
}

/// Evaluates `𝓔_σz` and `Λ` from the zero-frequency susceptibility restricted
/// to the cavity (1) and qubit-coupled mode (2):
///
/// ```text
/// 𝓔_σz = -(1 - (λ0/2) χ22 σz) / (χ11 - (λ0/2) σz det χ)
/// Λ    = λ0 |χ21|² / [(χ11 - (λ0/2) det χ)(χ11* + (λ0/2) det χ*)]
/// ```
pub fn eliminated_coefficients(net: &MultimodeNetwork) -> Result<EliminatedCoefficients> {
    let chi = susceptibility(net, 0.0)?;
    let (c, q) = (net.cavity_index, net.qubit_mode_index);
    let chi11 = chi.get(c, c);
    let chi22 = chi.get(q, q);
    let chi12 = chi.get(c, q);
    let chi21 = chi.get(q, c);
    let det = chi11 * chi22 - chi12 * chi21;
    let half = 0.5 * net.lambda0;
    let energy = |sign: f64| -(1.0 - chi22 * (half * sign)) / (chi11 - det * (half * sign));
    let e_up = energy(1.0);
    let e_down = energy(-1.0);
    let denom = (chi11 - det * half) * (chi11.conj() + det.conj() * half);
    if denom == C0 || !e_up.re.is_finite() || !e_down.re.is_finite() {
        return Err(Error::SingularAtFrequency {
            omega: 0.0,
            condition: f64::INFINITY,
        });
    }
    let langevin = chi21.norm_sqr() * net.lambda0 / denom;
    Ok(EliminatedCoefficients {
        e_up: ConditionalEnergy(e_up),
        e_down: ConditionalEnergy(e_down),
        coefficient: CoherenceCoefficient::from_langevin(langevin),
        chi_qc: chi21,
        chi_cq: chi12,
    })
}

/// How [`adiabatic_eliminate_with`] treats the dispersive-validity hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HierarchyMode {
    /// Fail when the network carries JC data that violates the hierarchy.
    #[default]
    Strict,
    /// Report the check but continue.
    Warn,
    Skip,
}

/// Reduces the network to the effective model; see [`adiabatic_eliminate_with`].
pub fn adiabatic_eliminate(net: &MultimodeNetwork) -> Result<EffectiveParams> {
    adiabatic_eliminate_with(net, HierarchyMode::Strict).map(|(p, _)| p)
}

/// Reduces the network to the effective model. When the network carries
/// Jaynes-Cummings data the hierarchy `|Δ_JC| ≥ 10 max(g, Γ_qq)` is checked
/// according to `mode`; the check result is returned alongside the parameters.
pub fn adiabatic_eliminate_with(
    net: &MultimodeNetwork,
    mode: HierarchyMode,
) -> Result<(EffectiveParams, Option<ValidationResult>)> {
    let check = match (mode, net.jc) {
        (HierarchyMode::Skip, _) | (_, None) => None,
        (_, Some(jc)) => {
            let q = net.qubit_mode_index;
            let res = validate_hierarchy(
                jc.delta_jc,
                jc.g,
                net.gamma_mat[(q, q)].re,
                DEFAULT_HIERARCHY_MARGIN,
            );
            if mode == HierarchyMode::Strict && !res.pass {
                return Err(Error::InvalidNetwork(format!(
                    "dispersive hierarchy violated: |Δ_JC| = {} < {} × max(g, Γ_qq) = {}",
                    res.detuning, res.margin, res.required
                )));
            }
            Some(res)
        }
    };
    let co = eliminated_coefficients(net)?;
    let p = params_from_energies(co.e_up, co.e_down, co.coefficient)?;
    Ok((p, check))
}

/// The B → -B image of the network under micro-reversibility: `H → Hᵀ`,
/// `Γ → Γᵀ`.
pub fn field_reverse(net: &MultimodeNetwork) -> MultimodeNetwork {
    let mut out = net.clone();
    out.h_mat = net.h_mat.transpose();
    out.gamma_mat = net.gamma_mat.transpose();
    out
}

/// One line of a [`SymmetryReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryEntry {
    pub name: String,
    pub forward: f64,
    pub reversed: f64,
    pub difference: f64,
    /// `None` for combinations that are not required to be symmetric.
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub tolerance: f64,
    /// Δc, λ, Γ sinh η and κ + Γ cosh η: required to be symmetric.
    pub symmetric: Vec<SymmetryEntry>,
    /// Γ sin θ and Γ cos θ: generally asymmetric.
    pub informational: Vec<SymmetryEntry>,
    pub forward: EffectiveParams,
    pub reversed: EffectiveParams,
}

impl SymmetryReport {
    pub fn all_pass(&self) -> bool {
        self.symmetric.iter().all(|e| e.pass == Some(true))
    }
}

pub fn onsager_report(net: &MultimodeNetwork, tol: f64) -> Result<SymmetryReport> {
    let fwd = adiabatic_eliminate_with(net, HierarchyMode::Skip)?.0;
    let rev = adiabatic_eliminate_with(&field_reverse(net), HierarchyMode::Skip)?.0;
    let entry = |name: &str, a: f64, b: f64, required: bool| {
        let difference = (a - b).abs();
        SymmetryEntry {
            name: name.to_string(),
            forward: a,
            reversed: b,
            difference,
            pass: required.then_some(difference <= tol),
        }
    };
    Ok(SymmetryReport {
        tolerance: tol,
        symmetric: vec![
            entry("delta_c", fwd.delta_c(), rev.delta_c(), true),
            entry("lambda", fwd.lambda(), rev.lambda(), true),
            entry("gamma_sinh_eta", fwd.gamma_sinh_eta(), rev.gamma_sinh_eta(), true),
            entry("kappa_plus_gamma_cosh_eta", fwd.total_decay(), rev.total_decay(), true),
        ],
        informational: vec![
            entry("gamma_sin_theta", fwd.gamma_sin_theta(), rev.gamma_sin_theta(), false),
            entry("gamma_cos_theta", fwd.gamma_cos_theta(), rev.gamma_cos_theta(), false),
        ],
        forward: fwd,
        reversed: rev,
    })
}

pub const DEFAULT_HIERARCHY_MARGIN: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationResult {
    pub pass: bool,
    pub detuning: f64,
    pub required: f64,
    pub margin: f64,
}

/// Dispersive validity `|Δ_JC| ≥ margin · max(g, Γ22)`; the boundary passes.
pub fn validate_hierarchy(delta_jc: f64, g: f64, gamma22: f64, margin: f64) -> ValidationResult {
    let required = margin * g.abs().max(gamma22.abs());
    ValidationResult {
        pass: delta_jc.abs() >= required,
        detuning: delta_jc.abs(),
        required,
        margin,
    }
}

/// Parameters of a three-mode loop: cavity, qubit-coupled buffer mode and one
/// extra bath mode, with a synthetic flux threading the loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopSpec {
    pub cavity_detuning: f64,
    pub cavity_loss: f64,
    pub buffer_detuning: f64,
    pub buffer_loss: f64,
    pub bath_detuning: f64,
    pub bath_loss: f64,
    pub g_cavity_buffer: f64,
    pub g_cavity_bath: f64,
    pub g_buffer_bath: f64,
    /// Total phase around the loop cavity → buffer → bath → cavity.
    pub flux: f64,
    pub lambda0: f64,
}

/// Builds the three-mode loop (mode 0 cavity, 1 buffer, 2 bath) with the
/// flux placed on the buffer-bath hop.
pub fn flux_loop(spec: &LoopSpec) -> Result<MultimodeNetwork> {
    let mut h = CMatrix::zeros(3, 3);
    h[(0, 0)] = spec.cavity_detuning.into();
    h[(1, 1)] = spec.buffer_detuning.into();
    h[(2, 2)] = spec.bath_detuning.into();
    let set = |h: &mut CMatrix, i: usize, j: usize, z: Complex64| {
        h[(i, j)] = z;
        h[(j, i)] = z.conj();
    };
    set(&mut h, 0, 1, spec.g_cavity_buffer.into());
    set(&mut h, 0, 2, spec.g_cavity_bath.into());
    set(&mut h, 2, 1, Complex64::from_polar(spec.g_buffer_bath, spec.flux));
    let g = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
        spec.cavity_loss.into(),
        spec.buffer_loss.into(),
        spec.bath_loss.into(),
    ]));
    MultimodeNetwork::new(h, g, 0, 1, spec.lambda0)
}
