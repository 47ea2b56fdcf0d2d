// Copyright 2026 nrdisp Contributors
// SPDX-License-Identifier: Apache-2.0

//! Levenberg-Marquardt least squares with a central-difference Jacobian.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Stop when the relative cost decrease falls below this.
    pub ftol: f64,
    /// Stop when the relative step falls below this.
    pub xtol: f64,
    pub mu0: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            ftol: 1e-15,
            xtol: 1e-14,
            mu0: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmResult {
    pub params: Vec<f64>,
    /// `s² (JᵀJ)⁻¹` with `s² = SSR/(m - n)`; `None` when singular.
    pub covariance: Option<DMatrix<f64>>,
    pub ssr: f64,
    pub residual_rms: f64,
    pub iterations: usize,
}

impl LmResult {
    pub fn stderr(&self, i: usize) -> Option<f64> {
        self.covariance.as_ref().map(|c| c[(i, i)].max(0.0).sqrt())
    }
}

fn jacobian<F>(f: &F, x: &[f64], r0: &[f64], m: usize) -> DMatrix<f64>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = x.len();
    let mut j = DMatrix::zeros(m, n);
    let mut xp = x.to_vec();
    let mut rp = vec![0.0; m];
    let mut rm = vec![0.0; m];
    for k in 0..n {
        let h = 1e-6 * x[k].abs().max(1e-6);
        xp[k] = x[k] + h;
        f(&xp, &mut rp);
        xp[k] = x[k] - h;
        f(&xp, &mut rm);
        xp[k] = x[k];
        let ok = rp.iter().chain(rm.iter()).all(|v| v.is_finite());
        for i in 0..m {
            j[(i, k)] = if ok {
                (rp[i] - rm[i]) / (2.0 * h)
            } else {
                // One-sided fallback near a domain edge.
                (rp[i] - r0[i]) / h
            };
        }
    }
    j
}

/// Minimises `Σ r_i(x)²`; `residuals(x, r)` fills `r` (length `m`).
pub fn levenberg_marquardt<F>(residuals: F, m: usize, x0: &[f64], opts: &LmOptions) -> Result<LmResult>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = x0.len();
    if m < n {
        return Err(Error::FitFailure(format!("{m} residuals cannot fix {n} parameters")));
    }
    let mut x = x0.to_vec();
    let mut r = vec![0.0; m];
    residuals(&x, &mut r);
    let mut cost: f64 = r.iter().map(|v| v * v).sum();
    if !cost.is_finite() {
        return Err(Error::FitFailure("non-finite residuals at the initial guess".into()));
    }
    let mut mu = opts.mu0;
    let mut iterations = 0;
    let mut r_try = vec![0.0; m];
    for it in 0..opts.max_iter {
        iterations = it + 1;
        let j = jacobian(&residuals, &x, &r, m);
        let jt = j.transpose();
        let jtj = &jt * &j;
        let g = &jt * DVector::from_column_slice(&r);
        if g.amax() == 0.0 || cost == 0.0 {
            break;
        }
        let mut accepted = false;
        let mut small_step = false;
        for _ in 0..60 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += mu * jtj[(k, k)].max(1e-300);
            }
            let Some(chol) = a.cholesky() else {
                mu *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&g));
            let x_try: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            residuals(&x_try, &mut r_try);
            let c_try: f64 = r_try.iter().map(|v| v * v).sum();
            if c_try.is_finite() && c_try <= cost {
                let rel_dec = (cost - c_try) / cost.max(f64::MIN_POSITIVE);
                let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                small_step = step.norm() <= opts.xtol * (xnorm + opts.xtol) || rel_dec < opts.ftol;
                x = x_try;
                std::mem::swap(&mut r, &mut r_try);
                cost = c_try;
                mu = (mu / 3.0).max(1e-15);
                accepted = true;
                break;
            }
            mu *= 4.0;
        }
        if !accepted || small_step {
            break;
        }
    }
    let j = jacobian(&residuals, &x, &r, m);
    let jtj = j.transpose() * &j;
    let dof = (m - n).max(1) as f64;
    let covariance = jtj.try_inverse().map(|inv| inv * (cost / dof));
    Ok(LmResult {
        params: x,
        covariance,
        ssr: cost,
        residual_rms: (cost / m as f64).sqrt(),
        iterations,
    })
}
