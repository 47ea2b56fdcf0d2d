// Copyright 2026 nrdisp Contributors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no physical solution: {constraint}")]
    NoPhysicalSolution { constraint: String },

    #[error("susceptibility is singular at omega = {omega} (condition number {condition:e})")]
    SingularAtFrequency { omega: f64, condition: f64 },

    #[error("degenerate decay: {0}")]
    DegenerateDecay(String),

    #[error("Fock truncation leak: population {population:e} at n_max = {n_max} exceeds {threshold:e} (t = {time})")]
    TruncationLeak {
        n_max: usize,
        population: f64,
        threshold: f64,
        time: f64,
    },

    #[error("integrator failure: {0}")]
    IntegratorFailure(String),

    #[error("fit failure: {0}")]
    FitFailure(String),

    #[error("too few valid samples: {valid} of {total} gave a physical solution")]
    TooFewValidSamples { valid: usize, total: usize },

    #[error("ratio undefined: {0}")]
    RatioUndefined(String),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
