// Copyright 2026 nrdisp Contributors
// SPDX-License-Identifier: Apache-2.0

//! Named device presets.
//!
//! Hardware entries are the measured device properties. The effective
//! master-equation parameters are representative values chosen so that the
//! mean cavity linewidth `(κ_g + κ_e)/2 = κ + Γ cosh η` equals the measured
//! cavity linewidth; they are fixtures, not fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{mhz, EffectiveParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardwareTable {
    pub qubit_frequency_ghz: f64,
    pub qubit_t1_us: f64,
    pub qubit_t2_us: f64,
    pub qubit_t2e_us: f64,
    pub buffer_frequency_ghz: f64,
    /// Lower bound on the buffer linewidth.
    pub buffer_linewidth_min_mhz: f64,
    pub buffer_chi_mhz: f64,
    pub cavity_frequency_ghz: f64,
    pub cavity_linewidth_mhz: f64,
    pub ancilla_frequency_ghz: f64,
    pub ancilla_t1_us: f64,
    pub ancilla_t2_us: f64,
    pub ancilla_t2e_us: f64,
    pub ancilla_chi_mhz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DevicePreset {
    pub name: String,
    pub params: EffectiveParams,
    pub hardware: Option<HardwareTable>,
}

impl DevicePreset {
    /// Ancilla dispersive shift in rad/µs (1.1 MHz when no hardware table).
    pub fn chi_a(&self) -> f64 {
        mhz(self.hardware.map_or(1.1, |h| h.ancilla_chi_mhz))
    }

    /// Intrinsic qubit dephasing `1/T2` in 1/µs, zero when unknown.
    pub fn intrinsic_dephasing(&self) -> f64 {
        self.hardware.map_or(0.0, |h| 1.0 / h.qubit_t2_us)
    }
}

pub const PRESET_NAMES: [&str; 3] = ["device-a", "device-b", "reciprocal"];

const DEVICE_A: HardwareTable = HardwareTable {
    qubit_frequency_ghz: 9.141,
    qubit_t1_us: 5.3,
    qubit_t2_us: 2.2,
    qubit_t2e_us: 2.7,
    buffer_frequency_ghz: 10.808,
    buffer_linewidth_min_mhz: 5.0,
    buffer_chi_mhz: 5.0,
    cavity_frequency_ghz: 10.809,
    cavity_linewidth_mhz: 1.7,
    ancilla_frequency_ghz: 8.277,
    ancilla_t1_us: 10.2,
    ancilla_t2_us: 2.9,
    ancilla_t2e_us: 3.7,
    ancilla_chi_mhz: 1.1,
};

const DEVICE_B: HardwareTable = HardwareTable {
    qubit_frequency_ghz: 8.305,
    qubit_t1_us: 12.7,
    qubit_t2_us: 5.5,
    qubit_t2e_us: 10.1,
    buffer_frequency_ghz: 10.812,
    buffer_linewidth_min_mhz: 5.0,
    buffer_chi_mhz: 0.7,
    cavity_frequency_ghz: 10.814,
    cavity_linewidth_mhz: 1.8,
    ancilla_frequency_ghz: 9.173,
    ancilla_t1_us: 0.6,
    ancilla_t2_us: 0.8,
    ancilla_t2e_us: 0.8,
    ancilla_chi_mhz: 1.1,
};

/// Builds parameters with `κ` fixed by the total linewidth.
fn with_linewidth(
    delta_c_mhz: f64,
    lambda_mhz: f64,
    linewidth_mhz: f64,
    gamma_mhz: f64,
    theta: f64,
    eta: f64,
) -> EffectiveParams {
    let kappa = mhz(linewidth_mhz) - mhz(gamma_mhz) * eta.cosh();
    EffectiveParams::new(mhz(delta_c_mhz), mhz(lambda_mhz), kappa, mhz(gamma_mhz), theta, eta)
        .expect("preset parameters are physical")
}

pub fn preset(name: &str) -> Result<DevicePreset> {
    let p = match name {
        "device-a" => DevicePreset {
            name: name.into(),
            params: with_linewidth(0.0, 0.6, DEVICE_A.cavity_linewidth_mhz, 0.75, 0.7, 0.35),
            hardware: Some(DEVICE_A),
        },
        "device-b" => DevicePreset {
            name: name.into(),
            params: with_linewidth(0.0, 0.25, DEVICE_B.cavity_linewidth_mhz, 0.55, -0.5, 0.2),
            hardware: Some(DEVICE_B),
        },
        "reciprocal" => DevicePreset {
            name: name.into(),
            params: EffectiveParams::reciprocal(0.0, mhz(0.6), mhz(1.7))
                .expect("preset parameters are physical"),
            hardware: None,
        },
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown preset '{other}' (available: {})",
                PRESET_NAMES.join(", ")
            )));
        }
    };
    Ok(p)
}
