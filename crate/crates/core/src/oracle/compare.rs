// Copyright 2026 nrdisp Contributors
// SPDX-License-Identifier: Apache-2.0

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::evolve::{coherent_state, evolve_coherence_block, evolve_density, OracleOptions};
use super::liouvillian::build_liouvillian;
use super::HilbertSpec;
use crate::error::{Error, Result};
use crate::model::EffectiveParams;
use crate::semiclassical::{free_decay_closed_form, simulate, DriveEnvelope};

/// Largest pointwise relative error of each `⟨σ₋⟩` pair, plus physicality
/// of the full Lindblad run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub n0: f64,
    pub n_max: usize,
    pub t_end: f64,
    pub points: usize,
    pub semiclassical_vs_closed_form: f64,
    pub full_vs_semiclassical: f64,
    pub block_vs_semiclassical: f64,
    pub block_vs_full: f64,
    /// Largest `|tr ρ - 1|`.
    pub trace_error: f64,
    pub min_eigenvalue: f64,
    /// Largest `|⟨σz⟩(t) - ⟨σz⟩(0)|`.
    pub sigma_z_drift: f64,
    /// Largest `s₂/s₁` of the evolved coherence block.
    pub rank1_deviation: f64,
}

impl OracleComparison {
    pub fn max_relative_error(&self) -> f64 {
        self.semiclassical_vs_closed_form
            .max(self.full_vs_semiclassical)
            .max(self.block_vs_semiclassical)
            .max(self.block_vs_full)
    }
}

fn max_rel(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm() / y.norm().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

/// Coherent-state free decay from `(|↑⟩ + |↓⟩)/√2 ⊗ |√n0⟩` on a uniform grid
/// over `[0, t_end]`, evaluated by the closed form, the semiclassical
/// integrator, the full Lindblad oracle and the coherence-block oracle.
pub fn compare_coherent(
    p: &EffectiveParams,
    n0: f64,
    spec: &HilbertSpec,
    t_end: f64,
    points: usize,
    opts: &OracleOptions,
) -> Result<OracleComparison> {
    if !(n0 >= 0.0 && n0.is_finite()) || !(t_end > 0.0 && t_end.is_finite()) || points < 2 {
        return Err(Error::InvalidParameter(
            "need n0 ≥ 0, t_end > 0 and at least 2 points".into(),
        ));
    }
    spec.validate()?;
    let grid: Vec<f64> = (0..points).map(|i| t_end * i as f64 / (points - 1) as f64).collect();
    let alpha = Complex64::new(n0.sqrt(), 0.0);
    let half = Complex64::new(0.5, 0.0);

    let closed: Vec<Complex64> = grid
        .iter()
        .map(|&t| free_decay_closed_form(p, n0, t).map(|l| half * l.exp()))
        .collect::<Result<_>>()?;
    let semi = simulate(p, &DriveEnvelope::none(), alpha, alpha, half, &grid)?
        .sigma_minus
        .expect("simulate fills sigma_minus");

    let lv = spec.levels();
    let psi = coherent_state(lv, alpha);
    let plus = DVector::from_element(2, Complex64::new(0.5f64.sqrt(), 0.0));
    let full_state = plus.kronecker(&psi);
    let rho0 = &full_state * full_state.adjoint();
    let l = build_liouvillian(p, spec, None)?;
    let full = evolve_density(&l, &rho0, &grid, opts)?;

    let block_opts = OracleOptions {
        rank_check: true,
        ..*opts
    };
    let x0 = &psi * psi.adjoint() * half;
    let block = evolve_coherence_block(p, spec, &x0, &grid, &block_opts)?;

    let sz0 = full.sigma_z[0];
    Ok(OracleComparison {
        n0,
        n_max: spec.n_max,
        t_end,
        points,
        semiclassical_vs_closed_form: max_rel(&semi, &closed),
        full_vs_semiclassical: max_rel(&full.sigma_minus, &semi),
        block_vs_semiclassical: max_rel(&block.sigma_minus, &semi),
        block_vs_full: max_rel(&block.sigma_minus, &full.sigma_minus),
        trace_error: full.trace.iter().map(|t| (t - 1.0).norm()).fold(0.0, f64::max),
        min_eigenvalue: full.min_eigenvalue.iter().copied().fold(f64::INFINITY, f64::min),
        sigma_z_drift: full.sigma_z.iter().map(|s| (s - sz0).abs()).fold(0.0, f64::max),
        rank1_deviation: block
            .rank1_deviation
            .as_ref()
            .map_or(0.0, |r| r.iter().copied().fold(0.0, f64::max)),
    })
}
