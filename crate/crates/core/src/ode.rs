// Copyright 2026 nrdisp Contributors
// SPDX-License-Identifier: Apache-2.0

//! Dormand-Prince 5(4) integrator for complex-valued linear and nonlinear
//! systems `dy/dt = f(t, y)`.
//!
//! Output times are hit exactly by clamping the step, so no dense output is
//! needed. Error control uses the usual mixed absolute/relative RMS norm.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// Difference between the 5th and embedded 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Tolerances and limits for [`Dopri5`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; chosen automatically when `None`.
    pub h_init: Option<f64>,
    /// Largest allowed step; unbounded when `None`.
    pub h_max: Option<f64>,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            h_init: None,
            h_max: None,
            max_steps: 1_000_000,
        }
    }
}

/// Counters collected during an integration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

impl OdeStats {
    pub fn merge(&mut self, other: OdeStats) {
        self.accepted += other.accepted;
        self.rejected += other.rejected;
        self.evaluations += other.evaluations;
    }
}

fn axpy_into(out: &mut [Complex64], y: &[Complex64], h: f64, terms: &[(f64, &[Complex64])]) {
    for i in 0..out.len() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (c, k) in terms {
            acc += k[i] * *c;
        }
        out[i] = y[i] + acc * h;
    }
}

impl Dopri5 {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }

    /// Integrates from `t0` through every time in `t_out` (non-decreasing, all
    /// `>= t0`), calling `observe(index, t, y)` at each output time. Returns the
    /// final state and solver statistics.
    pub fn integrate<F, O>(
        &self,
        mut f: F,
        t0: f64,
        y0: &[Complex64],
        t_out: &[f64],
        mut observe: O,
    ) -> Result<(Vec<Complex64>, OdeStats)>
    where
        F: FnMut(f64, &[Complex64], &mut [Complex64]),
        O: FnMut(usize, f64, &[Complex64]) -> Result<()>,
    {
        let n = y0.len();
        let mut stats = OdeStats::default();
        let mut y = y0.to_vec();
        let mut t = t0;
        if t_out.is_empty() {
            return Ok((y, stats));
        }
        if t_out[0] < t0 || t_out.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameter(
                "output times must be non-decreasing and start at or after t0".into(),
            ));
        }
        let t_end = *t_out.last().unwrap();

        let mut k1 = vec![Complex64::new(0.0, 0.0); n];
        let mut k2 = k1.clone();
        let mut k3 = k1.clone();
        let mut k4 = k1.clone();
        let mut k5 = k1.clone();
        let mut k6 = k1.clone();
        let mut k7 = k1.clone();
        let mut ytmp = k1.clone();
        let mut ynew = k1.clone();

        f(t, &y, &mut k1);
        stats.evaluations += 1;

        let mut h = match self.h_init {
            Some(h) => h,
            None => {
                let d0 = self.norm(&y, &y, &y);
                let d1 = self.norm(&k1, &y, &y);
                let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
                h0.min((t_end - t0).max(1e-12))
            }
        };
        if let Some(hm) = self.h_max {
            h = h.min(hm);
        }

        let mut next = 0;
        while next < t_out.len() && t_out[next] <= t {
            observe(next, t, &y)?;
            next += 1;
        }

        let mut steps = 0;
        while next < t_out.len() {
            let target = t_out[next];
            let mut last = false;
            let mut step = h;
            if t + step >= target {
                step = target - t;
                last = true;
            }
            if step <= 0.0 {
                observe(next, t, &y)?;
                next += 1;
                continue;
            }
            if step < 1e-14 * t.abs().max(1.0) && !last {
                return Err(Error::IntegratorFailure(format!(
                    "step size collapsed to {step:e} at t = {t}"
                )));
            }
            steps += 1;
            if steps > self.max_steps {
                return Err(Error::IntegratorFailure(format!(
                    "exceeded {} steps before t = {target}",
                    self.max_steps
                )));
            }

            axpy_into(&mut ytmp, &y, step, &[(A21, &k1)]);
            f(t + C2 * step, &ytmp, &mut k2);
            axpy_into(&mut ytmp, &y, step, &[(A31, &k1), (A32, &k2)]);
            f(t + C3 * step, &ytmp, &mut k3);
            axpy_into(&mut ytmp, &y, step, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
            f(t + C4 * step, &ytmp, &mut k4);
            axpy_into(
                &mut ytmp,
                &y,
                step,
                &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)],
            );
            f(t + C5 * step, &ytmp, &mut k5);
            axpy_into(
                &mut ytmp,
                &y,
                step,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            );
            f(t + step, &ytmp, &mut k6);
            axpy_into(
                &mut ynew,
                &y,
                step,
                &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
            );
            f(t + step, &ynew, &mut k7);
            stats.evaluations += 6;

            // Error estimate, reusing ytmp as scratch.
            for i in 0..n {
                ytmp[i] = (k1[i] * E1
                    + k3[i] * E3
                    + k4[i] * E4
                    + k5[i] * E5
                    + k6[i] * E6
                    + k7[i] * E7)
                    * step;
            }
            let err = self.norm(&ytmp, &y, &ynew);
            if !err.is_finite() {
                return Err(Error::IntegratorFailure(format!(
                    "non-finite error estimate at t = {t}"
                )));
            }

            if err <= 1.0 {
                stats.accepted += 1;
                t = if last { target } else { t + step };
                std::mem::swap(&mut y, &mut ynew);
                std::mem::swap(&mut k1, &mut k7);
                while next < t_out.len() && t_out[next] <= t {
                    observe(next, t, &y)?;
                    next += 1;
                }
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                // A step shortened to land on an output time says nothing
                // about the natural step size; keep the previous one.
                h = if last { h.max(step * fac) } else { step * fac };
            } else {
                stats.rejected += 1;
                h = step * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            }
            if let Some(hm) = self.h_max {
                h = h.min(hm);
            }
        }
        Ok((y, stats))
    }

    fn norm(&self, v: &[Complex64], y: &[Complex64], ynew: &[Complex64]) -> f64 {
        if v.is_empty() {
            return 0.0;
        }
        let mut acc = 0.0;
        for i in 0..v.len() {
            let sc = self.atol + self.rtol * y[i].norm().max(ynew[i].norm());
            let r = v[i].norm() / sc;
            acc += r * r;
        }
        (acc / v.len() as f64).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_exponential() {
        let w = Complex64::new(-0.3, 2.0);
        let times: Vec<f64> = (0..=20).map(|i| i as f64 * 0.25).collect();
        let mut got = Vec::new();
        let solver = Dopri5::with_tolerances(1e-11, 1e-13);
        let (_, stats) = solver
            .integrate(
                |_, y, dy| dy[0] = w * y[0],
                0.0,
                &[Complex64::new(1.0, 0.5)],
                &times,
                |_, t, y| {
                    got.push((t, y[0]));
                    Ok(())
                },
            )
            .unwrap();
        assert_eq!(got.len(), times.len());
        for (t, y) in got {
            let exact = Complex64::new(1.0, 0.5) * (w * t).exp();
            assert!((y - exact).norm() < 1e-9, "t={t} err={}", (y - exact).norm());
        }
        assert!(stats.accepted > 0);
    }

    #[test]
    fn forced_oscillator_with_output_at_start() {
        // dy/dt = -i y + 1, y(0) = 0 -> y = -i (1 - e^{-it})
        let times = [0.0, 1.0, 3.0];
        let mut last = Complex64::new(0.0, 0.0);
        Dopri5::with_tolerances(1e-10, 1e-12)
            .integrate(
                |_, y, dy| dy[0] = Complex64::new(0.0, -1.0) * y[0] + 1.0,
                0.0,
                &[Complex64::new(0.0, 0.0)],
                &times,
                |_, _, y| {
                    last = y[0];
                    Ok(())
                },
            )
            .unwrap();
        let exact = Complex64::new(0.0, -1.0) * (1.0 - Complex64::new(0.0, -3.0).exp());
        assert!((last - exact).norm() < 1e-8);
    }

    #[test]
    fn rejects_decreasing_outputs() {
        let r = Dopri5::default().integrate(
            |_, _, _| {},
            0.0,
            &[Complex64::new(1.0, 0.0)],
            &[1.0, 0.5],
            |_, _, _| Ok(()),
        );
        assert!(r.is_err());
    }

    #[test]
    fn step_collapse_is_reported() {
        let solver = Dopri5 {
            max_steps: 50,
            ..Dopri5::default()
        };
        let r = solver.integrate(
            |_, y, dy| dy[0] = y[0] * y[0],
            0.0,
            &[Complex64::new(1.0, 0.0)],
            &[2.0],
            |_, _, _| Ok(()),
        );
        assert!(matches!(r, Err(Error::IntegratorFailure(_))));
    }
}
