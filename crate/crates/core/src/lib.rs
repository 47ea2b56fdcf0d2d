// Copyright 2026 nrdisp Contributors
// SPDX-License-Identifier: Apache-2.0

//! Simulation and parameter estimation for non-reciprocal dispersive
//! qubit-cavity interactions.
//!
//! Units: angular frequencies and rates in rad/µs (1/µs), times in µs.

// `!(x > 0.0)` is deliberate throughout: NaN must fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod extraction;
pub mod fitting;
pub mod model;
pub mod io;
pub mod network;
pub mod ode;
pub mod oracle;
pub mod presets;
pub mod semiclassical;

pub use error::{Error, Result};
pub use model::{
    coherence_coefficient, conditional_energy, conditional_energy_detuned, mhz,
    params_from_energies, to_mhz, CoherenceCoefficient, ConditionalEnergy, EffectiveParams,
    QubitSector,
};
