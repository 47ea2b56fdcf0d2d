// Copyright 2026 nrdisp Contributors
// SPDX-License-Identifier: Apache-2.0

//! Exact reference dynamics: the qubit-cavity master equation in a truncated
//! Fock space, integrated as a sparse linear ODE on the vectorised density
//! matrix.
//!
//! Layout conventions: qubit ⊗ cavity with flat index `q (n_max + 1) + n`,
//! `q = 0` for ↑ (σz = +1). `vec` is column-stacking, matching nalgebra's
//! storage. `⟨σ₋⟩ = tr ρ_↑↓`, the ket-↑ bra-↓ block.

mod compare;
mod evolve;
mod liouvillian;
mod sparse;

pub use compare::{compare_coherent, OracleComparison};
pub use evolve::{
    coherent_state, cw_oracle_rate, evolve_coherence_block, evolve_density,
    evolve_network_coherence, evolve_fwm, fock_state, fwm_conversion_efficiency,
    gamma_f_for_efficiency, BlockEvolution, DensityEvolution, FwmResult, OracleOptions,
};
pub use liouvillian::{
    build_coherence_block, build_fwm_block, build_liouvillian, build_network_block,
    ConstantDrive, Liouvillian, LiouvillianKind,
};
pub use sparse::CsrMatrix;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_N_MAX: usize = 30;
pub const DEFAULT_LEAK_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HilbertSpec {
    /// Highest retained photon number.
    pub n_max: usize,
    /// 2 for the probe qubit, 3 for the g/e/f ancilla.
    pub qubit_dim: usize,
    /// Largest tolerated population in the top Fock level.
    pub leak_threshold: f64,
}

impl Default for HilbertSpec {
    fn default() -> Self {
        Self {
            n_max: DEFAULT_N_MAX,
            qubit_dim: 2,
            leak_threshold: DEFAULT_LEAK_THRESHOLD,
        }
    }
}

impl HilbertSpec {
    pub fn qubit(n_max: usize) -> Self {
        Self {
            n_max,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_max < 1 {
            return Err(Error::InvalidParameter("n_max must be at least 1".into()));
        }
        if !(self.qubit_dim == 2 || self.qubit_dim == 3) {
            return Err(Error::InvalidParameter(format!(
                "qubit_dim must be 2 or 3, got {}",
                self.qubit_dim
            )));
        }
        if !(self.leak_threshold > 0.0) {
            return Err(Error::InvalidParameter("leak threshold must be positive".into()));
        }
        Ok(())
    }

    pub fn levels(&self) -> usize {
        self.n_max + 1
    }
}

/// Four-wave-mixing single-photon source attached to an ancilla transmon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FwmSpec {
    /// `|f0⟩ ↔ |g1⟩` Rabi frequency Ω (rad/µs).
    pub omega_rabi: f64,
    /// `|f⟩ → |e⟩` decay (1/µs).
    pub gamma_f: f64,
    /// `|e⟩ → |g⟩` decay (1/µs).
    pub gamma_e: f64,
    /// Initial `|f⟩` population.
    pub f_prep_fidelity: f64,
}

impl FwmSpec {
    pub fn ideal(omega_rabi: f64) -> Self {
        Self {
            omega_rabi,
            gamma_f: 0.0,
            gamma_e: 0.0,
            f_prep_fidelity: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [self.omega_rabi, self.gamma_f, self.gamma_e];
        if rates.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "FWM rates must be finite and non-negative: {self:?}"
            )));
        }
        if !(0.0..=1.0).contains(&self.f_prep_fidelity) {
            return Err(Error::InvalidParameter(format!(
                "f preparation fidelity {} outside [0, 1]",
                self.f_prep_fidelity
            )));
        }
        Ok(())
    }
}
