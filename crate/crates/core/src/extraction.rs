// Copyright 2026 nrdisp Contributors
// SPDX-License-Identifier: Apache-2.0

//! Inversion of a [`MeasurementSet`] to effective parameters, Monte-Carlo
//! uncertainty propagation with Gaussian or split-Gaussian summaries, and
//! the empirical time-offset fit.
//!
//! Observables are treated as independent Gaussians; correlated input noise
//! is not supported. Near `ζ = 1` the logarithm amplifies noise and the
//! reported σ grows accordingly, with no regularisation.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::MeasurementSet;
use crate::fitting::{levenberg_marquardt, LmOptions};
use crate::io::CsvTable;
use crate::model::{params_from_energies, CoherenceCoefficient, ConditionalEnergy, EffectiveParams};
use crate::semiclassical::{phi1, TrajectoryRecord};

/// Reported quantities, in the order used by samples and summaries.
pub const QUANTITY_NAMES: [&str; 10] = [
    "delta_c",
    "lambda",
    "kappa",
    "gamma",
    "theta",
    "eta",
    "gamma_sin_theta",
    "gamma_sinh_eta",
    "gamma_cosh_eta",
    "total_decay",
];

/// Measured observables, in sampling order.
pub const OBSERVABLE_NAMES: [&str; 7] = ["omega_g", "omega_e", "kappa_g", "kappa_e", "phi", "zeta", "n0"];

pub const DEFAULT_MC_SAMPLES: usize = 100_000;
pub const MIN_MC_SAMPLES: usize = 1000;
pub const MIN_HISTOGRAM_SAMPLES: usize = 100;
/// Smallest R² for which a symmetric Gaussian summary is accepted.
pub const GAUSSIAN_R2_THRESHOLD: f64 = 0.98;
/// Accepted `σ_high/σ_low` band for a symmetric summary.
pub const SYMMETRY_BAND: (f64, f64) = (0.8, 1.25);
/// Upper end of the time-offset search (µs).
pub const MAX_TIME_OFFSET: f64 = 0.1;

fn quantities(p: &EffectiveParams) -> [f64; 10] {
    [
        p.delta_c(),
        p.lambda(),
        p.kappa(),
        p.gamma_nr(),
        p.theta(),
        p.eta(),
        p.gamma_sin_theta(),
        p.gamma_sinh_eta(),
        p.gamma_cosh_eta(),
        p.total_decay(),
    ]
}

fn observables(ms: &MeasurementSet) -> [f64; 7] {
    [ms.omega_g, ms.omega_e, ms.kappa_g, ms.kappa_e, ms.phi, ms.zeta, ms.n0]
}

fn observable_sigmas(ms: &MeasurementSet) -> Option<[f64; 7]> {
    ms.sigmas
        .map(|s| [s.omega_g, s.omega_e, s.kappa_g, s.kappa_e, s.phi, s.zeta, s.n0])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    pub gamma_sin_theta: f64,
    pub gamma_sinh_eta: f64,
    pub gamma_cosh_eta: f64,
    pub total_decay: f64,
}

impl Derived {
    pub fn of(p: &EffectiveParams) -> Self {
        Self {
            gamma_sin_theta: p.gamma_sin_theta(),
            gamma_sinh_eta: p.gamma_sinh_eta(),
            gamma_cosh_eta: p.gamma_cosh_eta(),
            total_decay: p.total_decay(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SummaryMethod {
    Gaussian,
    HalfGaussian,
    /// All samples equal; σ = 0.
    Degenerate,
    /// Combined from repeated extractions.
    Aggregate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantityEstimate {
    pub name: String,
    pub center: f64,
    pub sigma_low: f64,
    pub sigma_high: f64,
    pub method: SummaryMethod,
    /// R² of the histogram fit; 1 for degenerate and aggregate summaries.
    pub goodness: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub n_samples: usize,
    pub n_valid: usize,
    pub n_failed: usize,
    /// Set whenever any sample hit a non-physical solution.
    pub nonphysical_samples: bool,
    /// First few failure messages, in sample order.
    pub failure_examples: Vec<String>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub params: EffectiveParams,
    pub derived: Derived,
    /// Present after Monte Carlo or aggregation; one entry per
    /// [`QUANTITY_NAMES`] item.
    pub uncertainty: Option<Vec<QuantityEstimate>>,
    pub diagnostics: Diagnostics,
}

impl ExtractionResult {
    pub fn estimate(&self, name: &str) -> Option<&QuantityEstimate> {
        self.uncertainty.as_ref()?.iter().find(|q| q.name == name)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Inverts one set of observables.
///
/// `E_↑ = ω_g - ω_r - iκ_g/2`, `E_↓ = ω_e - ω_r - iκ_e/2`, and the coherence
/// coefficient follows from the finite-window relation
/// `ln ζ + iφ = n0 ℭ t_f φ₁(-z t_f)` with `z = iλ + (κ_g + κ_e)/2`.
fn invert(obs: &[f64; 7], t_f: f64, omega_r: f64) -> Result<EffectiveParams> {
    let [wg, we, kg, ke, phi, zeta, n0] = *obs;
    if !obs.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidParameter("observables must be finite".into()));
    }
    if !(kg > 0.0) {
        return Err(Error::NoPhysicalSolution {
            constraint: format!("kappa_g = {kg:e} must be positive"),
        });
    }
    if !(ke > 0.0) {
        return Err(Error::NoPhysicalSolution {
            constraint: format!("kappa_e = {ke:e} must be positive"),
        });
    }
    if !(zeta > 0.0) {
        return Err(Error::NoPhysicalSolution {
            constraint: format!("zeta = {zeta:e} must be positive"),
        });
    }
    if !(n0 > 0.0) {
        return Err(Error::NoPhysicalSolution {
            constraint: format!("n0 = {n0:e} must be positive"),
        });
    }
    let e_up = Complex64::new(wg - omega_r, -0.5 * kg);
    let e_down = Complex64::new(we - omega_r, -0.5 * ke);
    let z = Complex64::new(0.5 * (kg + ke), wg - we);
    let window = n0 * t_f * phi1(-z * t_f);
    let coeff = Complex64::new(zeta.ln(), phi) / window;
    params_from_energies(ConditionalEnergy(e_up), ConditionalEnergy(e_down), CoherenceCoefficient(coeff))
}

/// Point estimate.
pub fn extract(ms: &MeasurementSet) -> Result<ExtractionResult> {
    ms.validate()?;
    let params = invert(&observables(ms), ms.t_f, ms.omega_r)?;
    Ok(ExtractionResult {
        params,
        derived: Derived::of(&params),
        uncertainty: None,
        diagnostics: Diagnostics::default(),
    })
}

/// First-order propagation `σ_q² = Σ_k (∂q/∂o_k)² σ_k²` with central
/// differences; the reference for small-σ Monte Carlo.
pub fn linearized_sigmas(ms: &MeasurementSet) -> Result<[f64; 10]> {
    ms.validate()?;
    let sig = observable_sigmas(ms)
        .ok_or_else(|| Error::InvalidParameter("measurement set carries no sigmas".into()))?;
    let base = observables(ms);
    let mut var = [0.0; 10];
    for k in 0..7 {
        if sig[k] == 0.0 {
            continue;
        }
        let h = 1e-4 * sig[k];
        let mut plus = base;
        let mut minus = base;
        plus[k] += h;
        minus[k] -= h;
        let qp = quantities(&invert(&plus, ms.t_f, ms.omega_r)?);
        let qm = quantities(&invert(&minus, ms.t_f, ms.omega_r)?);
        for i in 0..10 {
            let d = (qp[i] - qm[i]) / (2.0 * h);
            var[i] += (d * sig[k]).powi(2);
        }
    }
    Ok(var.map(f64::sqrt))
}

/// Raw Monte-Carlo output: one row per valid sample, in sample order.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub values: Vec<[f64; 10]>,
    pub diagnostics: Diagnostics,
}

impl SampleSet {
    pub fn column(&self, i: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[i]).collect()
    }
}

/// Draws `n_samples` perturbed measurement sets and inverts each one.
/// Sample `i` uses stream `i` of the ChaCha generator seeded by `seed`, so
/// results do not depend on thread count.
pub fn monte_carlo_samples(ms: &MeasurementSet, n_samples: usize, seed: u64) -> Result<SampleSet> {
    ms.validate()?;
    let sig = observable_sigmas(ms)
        .ok_or_else(|| Error::InvalidParameter("monte carlo needs sigmas".into()))?;
    let base = observables(ms);
    let outcomes: Vec<std::result::Result<[f64; 10], Error>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut obs = base;
            for k in 0..7 {
                let g: f64 = StandardNormal.sample(&mut rng);
                obs[k] += sig[k] * g;
            }
            invert(&obs, ms.t_f, ms.omega_r).map(|p| quantities(&p))
        })
        .collect();
    let mut values = Vec::with_capacity(n_samples);
    let mut diag = Diagnostics {
        n_samples,
        seed: Some(seed),
        ..Diagnostics::default()
    };
    for o in outcomes {
        match o {
            Ok(v) => values.push(v),
            Err(e) => {
                diag.n_failed += 1;
                if matches!(e, Error::NoPhysicalSolution { .. }) {
                    diag.nonphysical_samples = true;
                }
                if diag.failure_examples.len() < 5 {
                    diag.failure_examples.push(e.to_string());
                }
            }
        }
    }
    diag.n_valid = values.len();
    Ok(SampleSet { values, diagnostics: diag })
}

/// Point estimate plus per-quantity uncertainties from `n_samples` draws.
pub fn monte_carlo(ms: &MeasurementSet, n_samples: usize, seed: u64) -> Result<ExtractionResult> {
    if n_samples < MIN_MC_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "monte carlo needs at least {MIN_MC_SAMPLES} samples, got {n_samples}"
        )));
    }
    let point = extract(ms)?;
    let set = monte_carlo_samples(ms, n_samples, seed)?;
    summarize_samples(point, &set)
}

/// Turns a [`SampleSet`] into per-quantity summaries attached to `point`.
pub fn summarize_samples(point: ExtractionResult, set: &SampleSet) -> Result<ExtractionResult> {
    let d = &set.diagnostics;
    if 2 * d.n_valid < d.n_samples {
        return Err(Error::TooFewValidSamples {
            valid: d.n_valid,
            total: d.n_samples,
        });
    }
    let mut estimates = Vec::with_capacity(10);
    for (i, name) in QUANTITY_NAMES.iter().enumerate() {
        let mut est = summarize(&set.column(i))?;
        est.name = (*name).into();
        estimates.push(est);
    }
    Ok(ExtractionResult {
        uncertainty: Some(estimates),
        diagnostics: d.clone(),
        ..point
    })
}

/// Chooses the Gaussian summary when the fit is good and the two halves are
/// balanced; otherwise the split-Gaussian one.
pub fn summarize(samples: &[f64]) -> Result<QuantityEstimate> {
    let g = fit_gaussian(samples)?;
    if g.degenerate {
        return Ok(QuantityEstimate {
            name: String::new(),
            center: g.center,
            sigma_low: 0.0,
            sigma_high: 0.0,
            method: SummaryMethod::Degenerate,
            goodness: 1.0,
        });
    }
    let h = fit_half_gaussians(samples)?;
    let ratio = h.sigma_high / h.sigma_low;
    if g.r_squared >= GAUSSIAN_R2_THRESHOLD && ratio >= SYMMETRY_BAND.0 && ratio <= SYMMETRY_BAND.1 {
        Ok(QuantityEstimate {
            name: String::new(),
            center: g.center,
            sigma_low: g.sigma,
            sigma_high: g.sigma,
            method: SummaryMethod::Gaussian,
            goodness: g.r_squared,
        })
    } else {
        Ok(QuantityEstimate {
            name: String::new(),
            center: h.center,
            sigma_low: h.sigma_low,
            sigma_high: h.sigma_high,
            method: SummaryMethod::HalfGaussian,
            goodness: h.r_squared,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Samples outside `[edges[0], edges[last]]`.
    pub outside: u64,
}

impl Histogram {
    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Probability density per bin, normalised by the total sample count.
    pub fn density(&self) -> Vec<f64> {
        let total = self.counts.iter().sum::<u64>() + self.outside;
        self.edges
            .windows(2)
            .zip(&self.counts)
            .map(|(w, c)| *c as f64 / (total as f64 * (w[1] - w[0])))
            .collect()
    }

    pub fn to_table(&self) -> CsvTable {
        let mut t = CsvTable::new(["bin_low", "bin_high", "center", "count", "density"]);
        let dens = self.density();
        for (i, c) in self.counts.iter().enumerate() {
            let (lo, hi) = (self.edges[i], self.edges[i + 1]);
            t.push(vec![lo, hi, 0.5 * (lo + hi), *c as f64, dens[i]]);
        }
        t
    }
}

fn sorted(samples: &[f64]) -> Vec<f64> {
    let mut s: Vec<f64> = samples.iter().copied().filter(|v| v.is_finite()).collect();
    s.sort_by(f64::total_cmp);
    s
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Freedman–Diaconis bin count over the central 99.9% of the data,
/// clamped to `[10, 2000]`.
pub fn freedman_diaconis_bins(samples: &[f64]) -> usize {
    let s = sorted(samples);
    if s.len() < 2 {
        return 10;
    }
    let (lo, hi) = (quantile(&s, 0.0005), quantile(&s, 0.9995));
    let iqr = quantile(&s, 0.75) - quantile(&s, 0.25);
    let width = 2.0 * iqr / (s.len() as f64).cbrt();
    if !(width > 0.0) || !(hi > lo) {
        return 10;
    }
    (((hi - lo) / width).ceil() as usize).clamp(10, 2000)
}

/// Equal-width histogram over the central 99.9% of the data.
pub fn histogram(samples: &[f64], bins: usize) -> Result<Histogram> {
    let s = sorted(samples);
    if s.len() < 2 || bins == 0 {
        return Err(Error::FitFailure("histogram needs at least two finite samples".into()));
    }
    let (lo, hi) = (quantile(&s, 0.0005), quantile(&s, 0.9995));
    if !(hi > lo) {
        return Err(Error::FitFailure("samples have zero spread".into()));
    }
    let w = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| lo + w * i as f64).collect();
    let mut counts = vec![0u64; bins];
    let mut outside = 0;
    for &x in &s {
        if x < lo || x > hi {
            outside += 1;
            continue;
        }
        let k = (((x - lo) / w) as usize).min(bins - 1);
        counts[k] += 1;
    }
    Ok(Histogram { edges, counts, outside })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub center: f64,
    pub sigma: f64,
    pub r_squared: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfGaussianFit {
    pub center: f64,
    pub sigma_low: f64,
    pub sigma_high: f64,
    pub r_squared: f64,
}

fn check_samples(samples: &[f64]) -> Result<Vec<f64>> {
    let s = sorted(samples);
    if s.len() < MIN_HISTOGRAM_SAMPLES {
        return Err(Error::FitFailure(format!(
            "histogram fit needs at least {MIN_HISTOGRAM_SAMPLES} finite samples, got {}",
            s.len()
        )));
    }
    Ok(s)
}

fn r_squared(y: &[f64], ssr: f64) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if sst > 0.0 {
        1.0 - ssr / sst
    } else {
        0.0
    }
}

/// Robust starting spread `IQR/1.349`, falling back to the sample SD.
fn robust_sigma(s: &[f64]) -> f64 {
    let iqr = quantile(s, 0.75) - quantile(s, 0.25);
    if iqr > 0.0 {
        iqr / 1.349
    } else {
        let m = s.iter().sum::<f64>() / s.len() as f64;
        (s.iter().map(|v| (v - m).powi(2)).sum::<f64>() / s.len() as f64).sqrt()
    }
}

/// Least-squares Gaussian fit to a Freedman–Diaconis histogram.
pub fn fit_gaussian(samples: &[f64]) -> Result<GaussianFit> {
    fit_gaussian_bins(samples, freedman_diaconis_bins(samples))
}

pub fn fit_gaussian_bins(samples: &[f64], bins: usize) -> Result<GaussianFit> {
    let s = check_samples(samples)?;
    if s[0] == s[s.len() - 1] {
        return Ok(GaussianFit {
            center: s[0],
            sigma: 0.0,
            r_squared: 1.0,
            degenerate: true,
        });
    }
    let h = histogram(&s, bins)?;
    let (x, y) = (h.centers(), h.density());
    let sig0 = robust_sigma(&s).max(1e-300);
    let mu0 = quantile(&s, 0.5);
    let a0 = y.iter().fold(0.0f64, |a, v| a.max(*v));
    let res = levenberg_marquardt(
        |q, r| {
            for i in 0..x.len() {
                r[i] = q[0] * (-0.5 * ((x[i] - q[1]) / q[2]).powi(2)).exp() - y[i];
            }
        },
        x.len(),
        &[a0, mu0, sig0],
        &LmOptions::default(),
    )?;
    let q = &res.params;
    if !(q[2].is_finite() && q[2] != 0.0 && q[1].is_finite()) {
        return Err(Error::FitFailure("gaussian fit diverged".into()));
    }
    Ok(GaussianFit {
        center: q[1],
        sigma: q[2].abs(),
        r_squared: r_squared(&y, res.ssr),
        degenerate: false,
    })
}

/// Joint split-normal fit: one amplitude and mode, separate widths on each
/// side of the mode.
pub fn fit_half_gaussians(samples: &[f64]) -> Result<HalfGaussianFit> {
    fit_half_gaussians_bins(samples, freedman_diaconis_bins(samples))
}

pub fn fit_half_gaussians_bins(samples: &[f64], bins: usize) -> Result<HalfGaussianFit> {
    let s = check_samples(samples)?;
    if s[0] == s[s.len() - 1] {
        return Ok(HalfGaussianFit {
            center: s[0],
            sigma_low: 0.0,
            sigma_high: 0.0,
            r_squared: 1.0,
        });
    }
    let h = histogram(&s, bins)?;
    let (x, y) = (h.centers(), h.density());
    // Mode from a 5-bin moving average.
    let n = y.len();
    let smooth = |i: usize| {
        let (a, b) = (i.saturating_sub(2), (i + 3).min(n));
        y[a..b].iter().sum::<f64>() / (b - a) as f64
    };
    let k = (0..n).max_by(|a, b| smooth(*a).total_cmp(&smooth(*b))).unwrap_or(0);
    let mode0 = x[k];
    let below: Vec<f64> = s.iter().filter(|v| **v <= mode0).map(|v| mode0 - v).collect();
    let above: Vec<f64> = s.iter().filter(|v| **v > mode0).map(|v| v - mode0).collect();
    let rms = |d: &[f64]| {
        if d.is_empty() {
            robust_sigma(&s)
        } else {
            (d.iter().map(|v| v * v).sum::<f64>() / d.len() as f64).sqrt()
        }
    };
    let a0 = smooth(k);
    let model = |q: &[f64], xi: f64| {
        let w = if xi < q[1] { q[2] } else { q[3] };
        q[0] * (-0.5 * ((xi - q[1]) / w).powi(2)).exp()
    };
    let res = levenberg_marquardt(
        |q, r| {
            for i in 0..n {
                r[i] = model(q, x[i]) - y[i];
            }
        },
        n,
        &[a0, mode0, rms(&below).max(1e-300), rms(&above).max(1e-300)],
        &LmOptions::default(),
    )?;
    let q = &res.params;
    if !(q[1].is_finite() && q[2].is_finite() && q[3].is_finite() && q[2] != 0.0 && q[3] != 0.0) {
        return Err(Error::FitFailure("split-gaussian fit diverged".into()));
    }
    Ok(HalfGaussianFit {
        center: q[1],
        sigma_low: q[2].abs(),
        sigma_high: q[3].abs(),
        r_squared: r_squared(&y, res.ssr),
    })
}

/// Averages repeated extractions. Each uncertainty side is the larger of the
/// mean intrinsic σ and the sample scatter of the centers.
pub fn aggregate_repeats(results: &[ExtractionResult]) -> Result<ExtractionResult> {
    match results {
        [] => Err(Error::InvalidParameter("no results to aggregate".into())),
        [one] => Ok(one.clone()),
        _ => {
            let n = results.len() as f64;
            let mean = |f: &dyn Fn(&ExtractionResult) -> f64| results.iter().map(f).sum::<f64>() / n;
            let scatter = |f: &dyn Fn(&ExtractionResult) -> f64| {
                let m = mean(f);
                (results.iter().map(|r| (f(r) - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            };
            let params = EffectiveParams::new(
                mean(&|r| r.params.delta_c()),
                mean(&|r| r.params.lambda()),
                mean(&|r| r.params.kappa()),
                mean(&|r| r.params.gamma_nr()),
                mean(&|r| r.params.theta()),
                mean(&|r| r.params.eta()),
            )?;
            let derived = Derived {
                gamma_sin_theta: mean(&|r| r.derived.gamma_sin_theta),
                gamma_sinh_eta: mean(&|r| r.derived.gamma_sinh_eta),
                gamma_cosh_eta: mean(&|r| r.derived.gamma_cosh_eta),
                total_decay: mean(&|r| r.derived.total_decay),
            };
            let mut estimates = Vec::with_capacity(10);
            for (i, name) in QUANTITY_NAMES.iter().enumerate() {
                let center_of = |r: &ExtractionResult| {
                    r.estimate(name).map_or_else(|| quantities(&r.params)[i], |e| e.center)
                };
                let lo = mean(&|r| r.estimate(name).map_or(0.0, |e| e.sigma_low));
                let hi = mean(&|r| r.estimate(name).map_or(0.0, |e| e.sigma_high));
                let sc = scatter(&center_of);
                estimates.push(QuantityEstimate {
                    name: (*name).into(),
                    center: mean(&center_of),
                    sigma_low: lo.max(sc),
                    sigma_high: hi.max(sc),
                    method: SummaryMethod::Aggregate,
                    goodness: 1.0,
                });
            }
            let mut diagnostics = Diagnostics::default();
            for r in results {
                let d = &r.diagnostics;
                diagnostics.n_samples += d.n_samples;
                diagnostics.n_valid += d.n_valid;
                diagnostics.n_failed += d.n_failed;
                diagnostics.nonphysical_samples |= d.nonphysical_samples;
            }
            Ok(ExtractionResult {
                params,
                derived,
                uncertainty: Some(estimates),
                diagnostics,
            })
        }
    }
}

/// Measured differential Ramsey series for the offset fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RamseySeries {
    pub times: Vec<f64>,
    pub phi: Vec<f64>,
    pub ln_zeta: Vec<f64>,
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let k = xs.partition_point(|v| *v <= x).clamp(1, xs.len() - 1);
    let (x0, x1) = (xs[k - 1], xs[k]);
    ys[k - 1] + (ys[k] - ys[k - 1]) * (x - x0) / (x1 - x0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeOffsetFit {
    pub offset: f64,
    pub cost: f64,
    /// Number of data points compared.
    pub points: usize,
}

/// Fits the shift `s ∈ [0, 0.1 µs]` with `data(t) ≈ theory(t - s)`.
///
/// Residuals on φ and ln ζ are weighted by the inverse RMS of each data
/// series. The shifted theory holds its initial value before the theory
/// start, so early data points stay in the comparison. A minimum at `s = 0`
/// is accepted; one at the upper end is not.
pub fn fit_time_offset(theory: &TrajectoryRecord, data: &RamseySeries) -> Result<TimeOffsetFit> {
    let ln = theory
        .ln_ratio
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("theory trajectory has no coherence ratio".into()))?;
    let tt = &theory.times;
    if tt.len() < 2 || data.times.len() != data.phi.len() || data.times.len() != data.ln_zeta.len() {
        return Err(Error::InvalidParameter("series lengths are inconsistent".into()));
    }
    let th_phi: Vec<f64> = ln.iter().map(|l| l.im).collect();
    let th_lnz: Vec<f64> = ln.iter().map(|l| l.re).collect();
    let (t_lo, t_hi) = (tt[0], tt[tt.len() - 1]);
    let idx: Vec<usize> = (0..data.times.len())
        .filter(|&i| {
            let t = data.times[i];
            t >= t_lo && t <= t_hi
        })
        .collect();
    if idx.len() < 3 {
        return Err(Error::FitFailure("theory and data time ranges do not overlap".into()));
    }
    let rms = |v: &[f64]| {
        let r = (idx.iter().map(|&i| v[i] * v[i]).sum::<f64>() / idx.len() as f64).sqrt();
        if r > 0.0 {
            r
        } else {
            1.0
        }
    };
    let (w_phi, w_lnz) = (1.0 / rms(&data.phi), 1.0 / rms(&data.ln_zeta));
    let cost = |s: f64| {
        idx.iter()
            .map(|&i| {
                let t = (data.times[i] - s).max(t_lo);
                let dp = (data.phi[i] - interp(tt, &th_phi, t)) * w_phi;
                let dz = (data.ln_zeta[i] - interp(tt, &th_lnz, t)) * w_lnz;
                dp * dp + dz * dz
            })
            .sum::<f64>()
    };
    let n_grid = 200;
    let step = MAX_TIME_OFFSET / n_grid as f64;
    let (k_best, _) = (0..=n_grid)
        .map(|k| (k, cost(k as f64 * step)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty grid");
    if k_best == n_grid {
        return Err(Error::FitFailure(format!(
            "residual decreases up to the search limit {MAX_TIME_OFFSET} µs"
        )));
    }
    // Golden-section refinement inside the bracketing grid cells.
    let (mut a, mut b) = ((k_best.max(1) - 1) as f64 * step, (k_best + 1) as f64 * step);
    if k_best == 0 {
        a = 0.0;
    }
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fd) = (cost(c), cost(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = cost(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = cost(d);
        }
    }
    let mut s = 0.5 * (a + b);
    if k_best == 0 && cost(0.0) <= cost(s) {
        s = 0.0;
    }
    Ok(TimeOffsetFit {
        offset: s,
        cost: cost(s),
        points: idx.len(),
    })
}
