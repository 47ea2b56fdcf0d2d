// Copyright 2026 nrdisp Contributors
// SPDX-License-Identifier: Apache-2.0

//! Python bindings. Rates are rad/µs and times µs, as in the Rust API.
//! Structured results cross the boundary as JSON strings or dicts of lists.

use num_complex::Complex64;
use nrdisp_core::experiments::{self, MeasurementSet, ProtocolConfig};
use nrdisp_core::oracle::{compare_coherent, HilbertSpec, OracleOptions};
use nrdisp_core::{extraction, network, presets, semiclassical, Error, QubitSector};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter(_) | Error::InvalidNetwork(_) | Error::Io(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn sector(s: &str) -> PyResult<QubitSector> {
    match s {
        "up" | "g" => Ok(QubitSector::Up),
        "down" | "e" => Ok(QubitSector::Down),
        _ => Err(PyValueError::new_err(format!("sector must be 'up'/'g' or 'down'/'e', got '{s}'"))),
    }
}

fn protocol_config(json: Option<&str>) -> PyResult<ProtocolConfig> {
    match json {
        Some(s) => serde_json::from_str(s).map_err(|e| PyValueError::new_err(e.to_string())),
        None => Ok(ProtocolConfig::default()),
    }
}

/// Effective non-reciprocal model parameters.
#[pyclass(name = "EffectiveParams", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyParams(nrdisp_core::EffectiveParams);

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (delta_c, lambda_, kappa, gamma, theta, eta))]
    fn new(delta_c: f64, lambda_: f64, kappa: f64, gamma: f64, theta: f64, eta: f64) -> PyResult<Self> {
        nrdisp_core::EffectiveParams::new(delta_c, lambda_, kappa, gamma, theta, eta)
            .map(Self)
            .map_err(to_py)
    }

    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        presets::preset(name).map(|p| Self(p.params)).map_err(to_py)
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        serde_json::from_str(s).map(Self).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[allow(clippy::wrong_self_convention)]
    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    #[getter]
    fn delta_c(&self) -> f64 {
        self.0.delta_c()
    }
    #[getter]
    fn lambda_(&self) -> f64 {
        self.0.lambda()
    }
    #[getter]
    fn kappa(&self) -> f64 {
        self.0.kappa()
    }
    #[getter]
    fn gamma(&self) -> f64 {
        self.0.gamma_nr()
    }
    #[getter]
    fn theta(&self) -> f64 {
        self.0.theta()
    }
    #[getter]
    fn eta(&self) -> f64 {
        self.0.eta()
    }
    #[getter]
    fn total_decay(&self) -> f64 {
        self.0.total_decay()
    }

    fn __repr__(&self) -> String {
        let p = &self.0;
        format!(
            "EffectiveParams(delta_c={}, lambda_={}, kappa={}, gamma={}, theta={}, eta={})",
            p.delta_c(),
            p.lambda(),
            p.kappa(),
            p.gamma_nr(),
            p.theta(),
            p.eta()
        )
    }
}

#[pyfunction]
fn conditional_energy(p: &PyParams, sector_name: &str) -> PyResult<Complex64> {
    Ok(nrdisp_core::conditional_energy(&p.0, sector(sector_name)?).0)
}

#[pyfunction]
fn coherence_coefficient(p: &PyParams) -> Complex64 {
    nrdisp_core::coherence_coefficient(&p.0).0
}

#[pyfunction]
fn free_decay_closed_form(p: &PyParams, n0: f64, t_f: f64) -> PyResult<Complex64> {
    semiclassical::free_decay_closed_form(&p.0, n0, t_f).map_err(to_py)
}

#[pyfunction]
fn long_time_ratio(p: &PyParams, n0: f64) -> PyResult<Complex64> {
    semiclassical::long_time_ratio(&p.0, n0).map_err(to_py)
}

#[pyfunction]
fn fock_steady_ratio(p: &PyParams) -> PyResult<Complex64> {
    semiclassical::fock_steady_ratio(&p.0).map_err(to_py)
}

/// Returns `(stark_shift, dephasing_rate)`.
#[pyfunction]
fn cw_steady_state(p: &PyParams, epsilon: Complex64, delta_d: f64) -> PyResult<(f64, f64)> {
    semiclassical::cw_steady_state(&p.0, epsilon, delta_d).map_err(to_py)
}

/// Free evolution from amplitudes `a0_up`, `a0_down`; returns a dict of lists.
#[pyfunction]
#[pyo3(signature = (p, a0_up, a0_down, times, sigma0 = Complex64::new(1.0, 0.0)))]
fn simulate<'py>(
    py: Python<'py>,
    p: &PyParams,
    a0_up: Complex64,
    a0_down: Complex64,
    times: Vec<f64>,
    sigma0: Complex64,
) -> PyResult<Bound<'py, PyDict>> {
    let tr = semiclassical::simulate(&p.0, &semiclassical::DriveEnvelope::none(), a0_up, a0_down, sigma0, &times)
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("times", tr.times)?;
    d.set_item("a_up", tr.a_up)?;
    d.set_item("a_down", tr.a_down)?;
    d.set_item("sigma_minus", tr.sigma_minus)?;
    d.set_item("ln_ratio", tr.ln_ratio)?;
    Ok(d)
}

/// Differential qubit Ramsey; `config` is a ProtocolConfig JSON string.
#[pyfunction]
#[pyo3(signature = (p, config = None))]
fn qubit_ramsey<'py>(py: Python<'py>, p: &PyParams, config: Option<&str>) -> PyResult<Bound<'py, PyDict>> {
    let tr = experiments::qubit_ramsey(&p.0, &protocol_config(config)?).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("times", tr.times)?;
    d.set_item("phi", tr.phi)?;
    d.set_item("zeta", tr.zeta)?;
    Ok(d)
}

/// Full protocol chain; returns MeasurementSet JSON.
#[pyfunction]
#[pyo3(signature = (p, config = None))]
fn measurement_set(p: &PyParams, config: Option<&str>) -> PyResult<String> {
    let ms = experiments::measurement_set(&p.0, &protocol_config(config)?).map_err(to_py)?;
    serde_json::to_string(&ms).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Point estimate from MeasurementSet JSON; returns ExtractionResult JSON.
#[pyfunction]
fn extract(measurements: &str) -> PyResult<String> {
    let ms = MeasurementSet::from_json_str(measurements).map_err(to_py)?;
    extraction::extract(&ms).and_then(|r| r.to_json_string()).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (measurements, n_samples = extraction::DEFAULT_MC_SAMPLES, seed = 0))]
fn monte_carlo(py: Python<'_>, measurements: &str, n_samples: usize, seed: u64) -> PyResult<String> {
    let ms = MeasurementSet::from_json_str(measurements).map_err(to_py)?;
    py.detach(|| extraction::monte_carlo(&ms, n_samples, seed).and_then(|r| r.to_json_string()))
        .map_err(to_py)
}

/// Adiabatic elimination of a network JSON document.
#[pyfunction]
fn adiabatic_eliminate(network_json: &str) -> PyResult<PyParams> {
    let net = network::MultimodeNetwork::from_json_str(network_json).map_err(to_py)?;
    network::adiabatic_eliminate(&net).map(PyParams).map_err(to_py)
}

/// Semiclassical vs Lindblad comparison; returns a dict of error metrics.
#[pyfunction]
#[pyo3(signature = (p, n0 = 3.0, n_max = 30, t_end = 2.0, points = 101))]
fn compare_oracle<'py>(
    py: Python<'py>,
    p: &PyParams,
    n0: f64,
    n_max: usize,
    t_end: f64,
    points: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let params = p.0;
    let c = py
        .detach(|| compare_coherent(&params, n0, &HilbertSpec::qubit(n_max), t_end, points, &OracleOptions::default()))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("semiclassical_vs_closed_form", c.semiclassical_vs_closed_form)?;
    d.set_item("full_vs_semiclassical", c.full_vs_semiclassical)?;
    d.set_item("block_vs_semiclassical", c.block_vs_semiclassical)?;
    d.set_item("block_vs_full", c.block_vs_full)?;
    d.set_item("trace_error", c.trace_error)?;
    d.set_item("min_eigenvalue", c.min_eigenvalue)?;
    d.set_item("sigma_z_drift", c.sigma_z_drift)?;
    Ok(d)
}

#[pymodule]
fn nrdisp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", nrdisp_core::io::VERSION)?;
    m.add_class::<PyParams>()?;
    m.add_function(wrap_pyfunction!(conditional_energy, m)?)?;
    m.add_function(wrap_pyfunction!(coherence_coefficient, m)?)?;
    m.add_function(wrap_pyfunction!(free_decay_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(long_time_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(fock_steady_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(cw_steady_state, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(qubit_ramsey, m)?)?;
    m.add_function(wrap_pyfunction!(measurement_set, m)?)?;
    m.add_function(wrap_pyfunction!(extract, m)?)?;
    m.add_function(wrap_pyfunction!(monte_carlo, m)?)?;
    m.add_function(wrap_pyfunction!(adiabatic_eliminate, m)?)?;
    m.add_function(wrap_pyfunction!(compare_oracle, m)?)?;
    Ok(())
}
