// Copyright 2026 nrdisp Contributors
// SPDX-License-Identifier: Apache-2.0

//! Run configuration: parameter source, protocol settings and output
//! location, merged from an optional JSON file and command-line flags
//! (flags win).

use std::path::{Path, PathBuf};

use nrdisp_core::experiments::{Backend, ProtocolConfig};
use nrdisp_core::network::{adiabatic_eliminate, MultimodeNetwork, NetworkFile};
use nrdisp_core::presets::preset;
use nrdisp_core::{mhz, EffectiveParams, Error, Result};
use serde::{Deserialize, Serialize};

/// Effective parameters as written by users. Rates are in rad/µs unless
/// `units` is `"mhz"` (cyclic); θ and η are dimensionless.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    #[serde(default)]
    pub units: Option<Units>,
    pub delta_c: f64,
    pub lambda: f64,
    pub kappa: f64,
    #[serde(alias = "gamma")]
    pub gamma_nr: f64,
    pub theta: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    RadPerUs,
    Mhz,
}

impl ParamsFile {
    pub fn to_params(self) -> Result<EffectiveParams> {
        let s = match self.units.unwrap_or(Units::RadPerUs) {
            Units::RadPerUs => 1.0,
            Units::Mhz => mhz(1.0),
        };
        EffectiveParams::new(
            s * self.delta_c,
            s * self.lambda,
            s * self.kappa,
            s * self.gamma_nr,
            self.theta,
            self.eta,
        )
    }
}

/// Where the effective parameters come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamSource {
    Preset(String),
    Params(ParamsFile),
    Network(NetworkFile),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedSource {
    pub source: ParamSource,
    pub params: EffectiveParams,
    /// Present for presets with measured hardware values.
    #[serde(skip)]
    pub chi_a: Option<f64>,
}

impl ParamSource {
    /// Reads a `--params` file: a network when it carries an `h` matrix,
    /// effective parameters otherwise.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        if value.get("h").is_some() {
            Ok(Self::Network(serde_json::from_value(value)?))
        } else {
            Ok(Self::Params(serde_json::from_value(value)?))
        }
    }

    pub fn resolve(&self) -> Result<ResolvedSource> {
        let (params, chi_a) = match self {
            Self::Preset(name) => {
                let p = preset(name)?;
                (p.params, Some(p.chi_a()))
            }
            Self::Params(f) => (f.to_params()?, None),
            Self::Network(f) => {
                let net: MultimodeNetwork = f.clone().into_network()?;
                (adiabatic_eliminate(&net)?, None)
            }
        };
        Ok(ResolvedSource {
            source: self.clone(),
            params,
            chi_a,
        })
    }
}

/// CW sweep settings. Amplitude and detunings in cyclic MHz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CwConfig {
    pub epsilon_mhz: f64,
    pub detunings_mhz: Vec<f64>,
    pub n_max: usize,
}

impl Default for CwConfig {
    fn default() -> Self {
        Self {
            epsilon_mhz: 0.5,
            detunings_mhz: linspace(-5.0, 5.0, 41),
            n_max: 14,
        }
    }
}

/// FWM settings. Rabi rate in cyclic MHz, decay rates in 1/µs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FwmConfig {
    pub omega_rabi_mhz: f64,
    pub prep_fidelity: f64,
    /// Target conversion efficiency; sets `gamma_f` when present.
    pub conversion: Option<f64>,
    pub gamma_f: f64,
    pub gamma_e: f64,
    pub n_max: usize,
}

impl Default for FwmConfig {
    fn default() -> Self {
        Self {
            omega_rabi_mhz: 0.6,
            prep_fidelity: 1.0,
            conversion: None,
            gamma_f: 0.0,
            gamma_e: 0.0,
            n_max: 4,
        }
    }
}

/// Optional JSON run file; every field may be overridden by a flag.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub params: Option<ParamsFile>,
    pub network: Option<NetworkFile>,
    pub protocol: Option<String>,
    pub protocol_config: Option<ProtocolConfig>,
    pub backend: Option<Backend>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub cw: Option<CwConfig>,
    pub fwm: Option<FwmConfig>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// The single parameter source named by the file, if any.
    pub fn source(&self) -> Result<Option<ParamSource>> {
        let mut found = Vec::new();
        if let Some(p) = &self.preset {
            found.push(ParamSource::Preset(p.clone()));
        }
        if let Some(p) = self.params {
            found.push(ParamSource::Params(p));
        }
        if let Some(n) = &self.network {
            found.push(ParamSource::Network(n.clone()));
        }
        match found.len() {
            0 => Ok(None),
            1 => Ok(found.pop()),
            _ => Err(Error::InvalidParameter(
                "config names more than one parameter source (preset, params, network)".into(),
            )),
        }
    }
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Parses `START:STOP:COUNT` or a comma-separated list.
pub fn parse_detunings(s: &str) -> Result<Vec<f64>> {
    let hint = "use --detunings START:STOP:COUNT or a comma-separated list (cyclic MHz)";
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::InvalidParameter(format!("detuning list is empty; {hint}")));
    }
    let bad = |t: &str| Error::InvalidParameter(format!("cannot parse '{t}'; {hint}"));
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(bad(s));
        }
        let a: f64 = parts[0].trim().parse().map_err(|_| bad(parts[0]))?;
        let b: f64 = parts[1].trim().parse().map_err(|_| bad(parts[1]))?;
        let n: usize = parts[2].trim().parse().map_err(|_| bad(parts[2]))?;
        if n == 0 {
            return Err(Error::InvalidParameter(format!("detuning list is empty; {hint}")));
        }
        return Ok(linspace(a, b, n));
    }
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| bad(t)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detunings() {
        assert_eq!(parse_detunings("-1:1:3").unwrap(), vec![-1.0, 0.0, 1.0]);
        assert_eq!(parse_detunings("0.5, 2").unwrap(), vec![0.5, 2.0]);
        assert!(parse_detunings("").is_err());
        assert!(parse_detunings("0:1:0").is_err());
        assert!(parse_detunings("a,b").is_err());
    }

    #[test]
    fn mhz_params_convert() {
        let f: ParamsFile = serde_json::from_str(
            r#"{"units":"mhz","delta_c":0,"lambda":1,"kappa":1,"gamma":0.5,"theta":0.2,"eta":0.1}"#,
        )
        .unwrap();
        let p = f.to_params().unwrap();
        assert!((p.lambda() - mhz(1.0)).abs() < 1e-12);
        assert!((p.gamma_nr() - mhz(0.5)).abs() < 1e-12);
    }

    #[test]
    fn two_sources_rejected() {
        let c: RunConfig = serde_json::from_str(
            r#"{"preset":"device-a","params":{"delta_c":0,"lambda":1,"kappa":1,"gamma_nr":0,"theta":0,"eta":0}}"#,
        )
        .unwrap();
        assert!(c.source().is_err());
    }
}
