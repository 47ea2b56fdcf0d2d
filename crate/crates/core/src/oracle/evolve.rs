// Copyright 2026 nrdisp Contributors
// SPDX-License-Identifier: Apache-2.0

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::liouvillian::{
    build_coherence_block, build_fwm_block, build_network_block, ConstantDrive, Liouvillian,
    LiouvillianKind, ANC_E, ANC_F, ANC_G,
};
use super::{FwmSpec, HilbertSpec};
use crate::error::{Error, Result};
use crate::model::{EffectiveParams, QubitSector};
use crate::network::{min_hermitian_eigenvalue, MultimodeNetwork};
use crate::ode::{Dopri5, OdeStats};

type CMatrix = DMatrix<Complex64>;

const C0: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct OracleOptions {
    pub ode: Dopri5,
    /// Keep the density matrix at every grid time.
    pub record_states: bool,
    /// Track `s₂/s₁` of coherence blocks (cost: one SVD per grid time).
    pub rank_check: bool,
}

impl OracleOptions {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        Self {
            ode: Dopri5::with_tolerances(rtol, atol),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEvolution {
    pub times: Vec<f64>,
    pub sigma_minus: Vec<Complex64>,
    pub sigma_z: Vec<f64>,
    pub photon_number: Vec<f64>,
    /// Complex trace; the imaginary part measures Hermiticity drift.
    pub trace: Vec<Complex64>,
    pub min_eigenvalue: Vec<f64>,
    #[serde(skip)]
    pub states: Option<Vec<CMatrix>>,
    pub stats: OdeStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockEvolution {
    pub times: Vec<f64>,
    /// `tr X(t)` for the evolved block `X`.
    pub sigma_minus: Vec<Complex64>,
    /// `s₂/s₁` singular-value ratio, when requested.
    pub rank1_deviation: Option<Vec<f64>>,
    pub stats: OdeStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FwmResult {
    /// `⟨σ₋(∞)⟩/⟨σ₋(0)⟩`.
    pub ratio: Complex64,
    /// Cumulative phase, unwrapped along the evolution.
    pub phi: f64,
    pub ln_zeta: f64,
    pub t_final: f64,
    pub stats: OdeStats,
}

/// Coherent state `|α⟩` truncated to `levels` and renormalised.
pub fn coherent_state(levels: usize, alpha: Complex64) -> DVector<Complex64> {
    let mut v = DVector::from_element(levels, C0);
    let mut c = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for n in 0..levels {
        if n > 0 {
            c = c * alpha / (n as f64).sqrt();
        }
        v[n] = c;
    }
    let norm = v.norm();
    v / Complex64::new(norm, 0.0)
}

pub fn fock_state(levels: usize, n: usize) -> DVector<Complex64> {
    let mut v = DVector::from_element(levels, C0);
    v[n] = Complex64::new(1.0, 0.0);
    v
}

fn block_trace(y: &[Complex64], d: usize) -> Complex64 {
    (0..d).map(|i| y[i * d + i]).sum()
}

/// Weight on truncation-edge basis states relative to the whole diagonal.
fn edge_weight(y: &[Complex64], d: usize, edge: &[usize]) -> f64 {
    let total: f64 = (0..d).map(|i| y[i * d + i].norm()).sum();
    if total == 0.0 {
        return 0.0;
    }
    edge.iter().map(|&i| y[i * d + i].norm()).sum::<f64>() / total
}

fn leak_check(l: &Liouvillian, y: &[Complex64], t: f64) -> Result<()> {
    let w = edge_weight(y, l.hilbert_dim, &l.edge);
    if w > l.leak_threshold {
        let n_max = match &l.kind {
            LiouvillianKind::Full { n_max }
            | LiouvillianKind::QubitBlock { n_max, .. }
            | LiouvillianKind::FwmBlock { n_max, .. } => *n_max,
            LiouvillianKind::NetworkBlock { truncations, .. } => {
                truncations.iter().copied().max().unwrap_or(0)
            }
        };
        return Err(Error::TruncationLeak {
            n_max,
            population: w,
            threshold: l.leak_threshold,
            time: t,
        });
    }
    Ok(())
}

fn integrate<O>(
    l: &Liouvillian,
    y0: &[Complex64],
    t0: f64,
    t_out: &[f64],
    ode: &Dopri5,
    observe: O,
) -> Result<(Vec<Complex64>, OdeStats)>
where
    O: FnMut(usize, f64, &[Complex64]) -> Result<()>,
{
    let m = &l.matrix;
    ode.integrate(|_, y, dy| m.mul_vec(y, dy), t0, y0, t_out, observe)
}

fn check_density(rho: &CMatrix, d: usize) -> Result<()> {
    if rho.nrows() != d || rho.ncols() != d {
        return Err(Error::InvalidParameter(format!(
            "initial state is {}×{}, expected {d}×{d}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    let herm = (rho - rho.adjoint()).iter().fold(0.0f64, |a, z| a.max(z.norm()));
    let tr = rho.trace();
    let min_eig = min_hermitian_eigenvalue(rho);
    if herm > 1e-10 || (tr - 1.0).norm() > 1e-10 || min_eig < -1e-10 {
        return Err(Error::InvalidParameter(format!(
            "initial state must be a density matrix (Hermiticity {herm:e}, trace {tr}, min eigenvalue {min_eig:e})"
        )));
    }
    Ok(())
}

/// Integrates a full qubit ⊗ cavity Liouvillian from `rho0` at `grid[0]`.
pub fn evolve_density(
    l: &Liouvillian,
    rho0: &CMatrix,
    grid: &[f64],
    opts: &OracleOptions,
) -> Result<DensityEvolution> {
    let LiouvillianKind::Full { n_max } = l.kind else {
        return Err(Error::InvalidParameter(
            "evolve_density needs a full qubit-cavity Liouvillian".into(),
        ));
    };
    let d = l.hilbert_dim;
    check_density(rho0, d)?;
    check_grid(grid)?;
    let lv = n_max + 1;
    let mut out = DensityEvolution {
        times: grid.to_vec(),
        sigma_minus: Vec::with_capacity(grid.len()),
        sigma_z: Vec::with_capacity(grid.len()),
        photon_number: Vec::with_capacity(grid.len()),
        trace: Vec::with_capacity(grid.len()),
        min_eigenvalue: Vec::with_capacity(grid.len()),
        states: opts.record_states.then(Vec::new),
        stats: OdeStats::default(),
    };
    let (_, stats) = integrate(l, rho0.as_slice(), grid[0], grid, &opts.ode, |_, t, y| {
        leak_check(l, y, t)?;
        let rho = CMatrix::from_column_slice(d, d, y);
        let mut sm = C0;
        let mut up = 0.0;
        let mut down = 0.0;
        let mut nbar = 0.0;
        for k in 0..lv {
            sm += rho[(k, lv + k)];
            up += rho[(k, k)].re;
            down += rho[(lv + k, lv + k)].re;
            nbar += k as f64 * (rho[(k, k)].re + rho[(lv + k, lv + k)].re);
        }
        out.sigma_minus.push(sm);
        out.sigma_z.push(up - down);
        out.photon_number.push(nbar);
        out.trace.push(rho.trace());
        out.min_eigenvalue.push(min_hermitian_eigenvalue(&rho));
        if let Some(states) = out.states.as_mut() {
            states.push(rho);
        }
        Ok(())
    })?;
    out.stats = stats;
    Ok(out)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) || grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidParameter(
            "time grid must be non-empty, finite and strictly increasing".into(),
        ));
    }
    Ok(())
}

fn rank1_deviation(x: &CMatrix) -> f64 {
    let sv = x.clone().svd(false, false).singular_values;
    let mut s: Vec<f64> = sv.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    if s.is_empty() || s[0] == 0.0 {
        return 0.0;
    }
    s.get(1).copied().unwrap_or(0.0) / s[0]
}

fn run_block(
    l: &Liouvillian,
    x0: &CMatrix,
    grid: &[f64],
    opts: &OracleOptions,
) -> Result<BlockEvolution> {
    let d = l.hilbert_dim;
    if x0.nrows() != d || x0.ncols() != d {
        return Err(Error::InvalidParameter(format!(
            "initial block is {}×{}, expected {d}×{d}",
            x0.nrows(),
            x0.ncols()
        )));
    }
    check_grid(grid)?;
    let mut sigma = Vec::with_capacity(grid.len());
    let mut rank = opts.rank_check.then(Vec::new);
    let (_, stats) = integrate(l, x0.as_slice(), grid[0], grid, &opts.ode, |_, t, y| {
        leak_check(l, y, t)?;
        sigma.push(block_trace(y, d));
        if let Some(r) = rank.as_mut() {
            r.push(rank1_deviation(&CMatrix::from_column_slice(d, d, y)));
        }
        Ok(())
    })?;
    Ok(BlockEvolution {
        times: grid.to_vec(),
        sigma_minus: sigma,
        rank1_deviation: rank,
        stats,
    })
}

/// Evolves only the `ρ_↑↓` block. `rho_ud0` is that block of the initial
/// state, so `sigma_minus[0] = tr rho_ud0`.
pub fn evolve_coherence_block(
    p: &EffectiveParams,
    spec: &HilbertSpec,
    rho_ud0: &CMatrix,
    grid: &[f64],
    opts: &OracleOptions,
) -> Result<BlockEvolution> {
    let l = build_coherence_block(p, spec, None, QubitSector::Up, QubitSector::Down)?;
    run_block(&l, rho_ud0, grid, opts)
}

/// Qubit-coherence ratio `⟨σ₋(t)⟩/⟨σ₋(0)⟩` of the unreduced multimode network
/// for the cavity mode starting in `|α⟩` and all other modes in vacuum.
pub fn evolve_network_coherence(
    net: &MultimodeNetwork,
    truncations: &[usize],
    alpha: Complex64,
    grid: &[f64],
    opts: &OracleOptions,
    leak_threshold: f64,
) -> Result<BlockEvolution> {
    let l = build_network_block(net, truncations, leak_threshold, QubitSector::Up, QubitSector::Down)?;
    let psi = truncations
        .iter()
        .enumerate()
        .fold(DVector::from_element(1, Complex64::new(1.0, 0.0)), |acc, (k, &t)| {
            let mode = if k == net.cavity_index() {
                coherent_state(t + 1, alpha)
            } else {
                fock_state(t + 1, 0)
            };
            acc.kronecker(&mode)
        });
    let x0 = &psi * psi.adjoint();
    run_block(&l, &x0, grid, opts)
}

const FWM_CHUNK: f64 = 0.1;
const FWM_TOL: f64 = 1e-6;
const FWM_MAX_TIME: f64 = 2000.0;

/// Diagonal weight outside `|g, 0⟩`, relative to the whole diagonal.
fn fwm_active_weight(y: &[Complex64], d: usize) -> f64 {
    let total: f64 = (0..d).map(|i| y[i * d + i].norm()).sum();
    if total == 0.0 {
        return 0.0;
    }
    let rest: f64 = (0..d).filter(|&i| i != 0).map(|i| y[i * d + i].norm()).sum();
    rest / total
}

fn fwm_initial(lv: usize, f_prep: f64) -> CMatrix {
    let d = 3 * lv;
    let mut x = CMatrix::zeros(d, d);
    x[(ANC_G * lv, ANC_G * lv)] = Complex64::new(1.0 - f_prep, 0.0);
    x[(ANC_F * lv, ANC_F * lv)] = Complex64::new(f_prep, 0.0);
    x
}

/// Long-time probe-qubit coherence ratio with a four-wave-mixing photon
/// source. Integrates in 0.1 µs chunks until `⟨σ₋⟩` changes by less than
/// `1e-6` relative over a chunk and the ancilla-cavity block has relaxed to
/// `|g, 0⟩` to the same level.
pub fn evolve_fwm(
    p: &EffectiveParams,
    spec: &HilbertSpec,
    fwm: &FwmSpec,
    opts: &OracleOptions,
) -> Result<FwmResult> {
    let l = build_fwm_block(p, spec, fwm, QubitSector::Up, QubitSector::Down)?;
    let d = l.hilbert_dim;
    let mut y = fwm_initial(spec.levels(), fwm.f_prep_fidelity).as_slice().to_vec();
    let mut stats = OdeStats::default();
    let mut t = 0.0;
    let mut prev = block_trace(&y, d);
    let mut phi = 0.0;
    loop {
        let (next, s) = integrate(&l, &y, t, &[t + FWM_CHUNK], &opts.ode, |_, tt, yy| leak_check(&l, yy, tt))?;
        stats.merge(s);
        y = next;
        t += FWM_CHUNK;
        let cur = block_trace(&y, d);
        phi += (cur / prev).arg();
        let change = (cur - prev).norm() / cur.norm().max(f64::MIN_POSITIVE);
        prev = cur;
        if change < FWM_TOL && fwm_active_weight(&y, d) < FWM_TOL {
            return Ok(FwmResult {
                ratio: cur,
                phi,
                ln_zeta: cur.norm().ln(),
                t_final: t,
                stats,
            });
        }
        if t > FWM_MAX_TIME {
            return Err(Error::IntegratorFailure(format!(
                "FWM evolution not converged after {FWM_MAX_TIME} µs"
            )));
        }
    }
}

/// Fraction of `|f⟩` preparations that end as an emitted photon rather than
/// decaying through `|e⟩`. Evaluated in the ↑↑ block with `γ_e = 0`, so the
/// `|e⟩` population is the accumulated failure probability.
pub fn fwm_conversion_efficiency(p: &EffectiveParams, spec: &HilbertSpec, fwm: &FwmSpec) -> Result<f64> {
    let ideal_prep = FwmSpec {
        gamma_e: 0.0,
        f_prep_fidelity: 1.0,
        ..*fwm
    };
    let l = build_fwm_block(p, spec, &ideal_prep, QubitSector::Up, QubitSector::Up)?;
    let lv = spec.levels();
    let d = l.hilbert_dim;
    let mut y = fwm_initial(lv, 1.0).as_slice().to_vec();
    let ode = Dopri5::with_tolerances(1e-10, 1e-13);
    let mut t = 0.0;
    let pop = |y: &[Complex64], anc: usize| -> f64 { (0..lv).map(|n| y[(anc * lv + n) * (d + 1)].re).sum() };
    loop {
        let (next, _) = integrate(&l, &y, t, &[t + FWM_CHUNK], &ode, |_, tt, yy| leak_check(&l, yy, tt))?;
        y = next;
        t += FWM_CHUNK;
        let photons: f64 = (0..lv).map(|n| n as f64 * y[(ANC_G * lv + n) * (d + 1)].re).sum();
        if pop(&y, ANC_F) + photons < 1e-12 {
            return Ok(1.0 - pop(&y, ANC_E));
        }
        if t > FWM_MAX_TIME {
            return Err(Error::IntegratorFailure("conversion run did not settle".into()));
        }
    }
}

/// Finds `γ_f` such that the conversion efficiency equals `target`, by
/// bisection on the monotone efficiency curve.
pub fn gamma_f_for_efficiency(
    p: &EffectiveParams,
    spec: &HilbertSpec,
    omega_rabi: f64,
    target: f64,
) -> Result<f64> {
    if !(0.0 < target && target < 1.0) {
        return Err(Error::InvalidParameter(format!("target efficiency {target} outside (0, 1)")));
    }
    let eff = |gf: f64| fwm_conversion_efficiency(p, spec, &FwmSpec { gamma_f: gf, ..FwmSpec::ideal(omega_rabi) });
    let mut lo = 0.0;
    let mut hi = omega_rabi.max(1e-3);
    let mut grow = 0;
    while eff(hi)? > target {
        lo = hi;
        hi *= 2.0;
        grow += 1;
        if grow > 60 {
            return Err(Error::FitFailure("could not bracket the target efficiency".into()));
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if eff(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-10 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Qubit Stark shift and dephasing `(Δq, Γq)` under a constant drive, read off
/// the slowest mode of the driven `ρ_↑↓` generator. The block is evolved from
/// vacuum for `46/κ_min` with periodic renormalisation and the rate is
/// `tr(𝓛X)/tr X`.
pub fn cw_oracle_rate(
    p: &EffectiveParams,
    spec: &HilbertSpec,
    drive: ConstantDrive,
    opts: &OracleOptions,
) -> Result<(f64, f64)> {
    let k_min = p.sector_decay(QubitSector::Up).min(p.sector_decay(QubitSector::Down));
    if !(k_min > 0.0) {
        return Err(Error::DegenerateDecay("both sectors need positive photon decay".into()));
    }
    let l = build_coherence_block(p, spec, Some(drive), QubitSector::Up, QubitSector::Down)?;
    let d = l.hilbert_dim;
    let mut y = (fock_state(d, 0) * fock_state(d, 0).adjoint()).as_slice().to_vec();
    let t_end = 46.0 / k_min;
    let chunks = 46;
    let dt = t_end / chunks as f64;
    for c in 0..chunks {
        let t0 = c as f64 * dt;
        let (next, _) = integrate(&l, &y, t0, &[t0 + dt], &opts.ode, |_, tt, yy| leak_check(&l, yy, tt))?;
        let tr = block_trace(&next, d);
        y = next.iter().map(|z| z / tr).collect();
    }
    let mut ly = vec![C0; y.len()];
    l.matrix.mul_vec(&y, &mut ly);
    let rate = block_trace(&ly, d) / block_trace(&y, d);
    Ok((rate.im, -rate.re))
}
