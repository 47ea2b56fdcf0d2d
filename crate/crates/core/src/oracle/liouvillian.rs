// Copyright 2026 nrdisp Contributors
// SPDX-License-Identifier: Apache-2.0

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::sparse::{assemble_sandwiches, CsrMatrix};
use super::{FwmSpec, HilbertSpec};
use crate::error::{Error, Result};
use crate::model::{EffectiveParams, QubitSector};
use crate::network::MultimodeNetwork;

type CMatrix = DMatrix<Complex64>;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Constant coherent cavity drive `ε a† + ε* a` at detuning `Δd`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantDrive {
    pub epsilon: Complex64,
    pub delta_d: f64,
}

impl ConstantDrive {
    pub fn off() -> Self {
        Self {
            epsilon: Complex64::new(0.0, 0.0),
            delta_d: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LiouvillianKind {
    /// Full qubit ⊗ cavity density matrix.
    Full { n_max: usize },
    /// Cavity-space block `ρ_{ket, bra}` of the probe qubit.
    QubitBlock {
        n_max: usize,
        ket: QubitSector,
        bra: QubitSector,
    },
    /// Ancilla (g, e, f) ⊗ cavity block of the probe qubit.
    FwmBlock {
        n_max: usize,
        ket: QubitSector,
        bra: QubitSector,
    },
    /// Multimode network block; one truncation per mode.
    NetworkBlock {
        truncations: Vec<usize>,
        ket: QubitSector,
        bra: QubitSector,
    },
}

/// Generator `d vec(X)/dt = 𝓛 vec(X)` on a `hilbert_dim × hilbert_dim`
/// operator `X`.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    pub kind: LiouvillianKind,
    pub hilbert_dim: usize,
    pub matrix: CsrMatrix,
    pub leak_threshold: f64,
    /// Basis states at a truncation edge; their weight is monitored.
    pub edge: Vec<usize>,
}

pub(crate) fn annihilation(levels: usize) -> CMatrix {
    let mut a = CMatrix::zeros(levels, levels);
    for n in 1..levels {
        a[(n - 1, n)] = re((n as f64).sqrt());
    }
    a
}

fn number(levels: usize) -> CMatrix {
    CMatrix::from_diagonal(&nalgebra::DVector::from_fn(levels, |n, _| re(n as f64)))
}

fn eye(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

fn projector(dim: usize, k: usize) -> CMatrix {
    let mut m = CMatrix::zeros(dim, dim);
    m[(k, k)] = re(1.0);
    m
}

/// Terms of `X ↦ -i(H_l X - X H_r) + Σ L_l X L_r† - ½(K_l X + X K_r)` with
/// `K = Σ L†L`, for ket-side operators `(h_l, jumps_l)` and bra-side
/// `(h_r, jumps_r)`.
fn lindblad_terms(
    h_l: &CMatrix,
    h_r: &CMatrix,
    jumps: &[(CMatrix, CMatrix)],
) -> Vec<(CMatrix, CMatrix)> {
    let d = h_l.nrows();
    let mut k_l = CMatrix::zeros(d, d);
    let mut k_r = CMatrix::zeros(d, d);
    let mut terms = Vec::with_capacity(jumps.len() + 2);
    for (l, r) in jumps {
        k_l += l.adjoint() * l;
        k_r += r.adjoint() * r;
        terms.push((l.clone(), r.adjoint()));
    }
    terms.push((h_l * (-I) - k_l * re(0.5), eye(d)));
    terms.push((eye(d), h_r * I - k_r * re(0.5)));
    terms
}

/// Cavity Hamiltonian and jumps conditioned on the probe sector.
fn sector_operators(
    p: &EffectiveParams,
    levels: usize,
    s: QubitSector,
    drive: ConstantDrive,
) -> (CMatrix, Vec<CMatrix>) {
    let a = annihilation(levels);
    let ad = a.adjoint();
    let h = number(levels) * re(p.delta_c() - drive.delta_d + 0.5 * p.lambda() * s.sign())
        + &ad * drive.epsilon
        + &a * drive.epsilon.conj();
    let phase = (Complex64::new(p.eta(), p.theta()) * (0.5 * s.sign())).exp();
    let jumps = vec![
        &a * re(p.kappa().sqrt()),
        &a * (phase * p.gamma_nr().sqrt()),
    ];
    (h, jumps)
}

fn check_drive(drive: ConstantDrive) -> Result<()> {
    if !drive.epsilon.re.is_finite() || !drive.epsilon.im.is_finite() || !drive.delta_d.is_finite() {
        return Err(Error::InvalidParameter("drive must be finite".into()));
    }
    Ok(())
}

fn require_qubit(spec: &HilbertSpec) -> Result<()> {
    spec.validate()?;
    if spec.qubit_dim != 2 {
        return Err(Error::InvalidParameter(
            "the probe-qubit model needs qubit_dim = 2; use the FWM builders for the ancilla".into(),
        ));
    }
    Ok(())
}

/// Full qubit ⊗ cavity Liouvillian with `H = (Δc - Δd) a†a + (λ/2) σz a†a +
/// ε a† + ε* a` and dissipators `κ 𝒟[a]`, `Γ 𝒟[e^{(iθ+η)σz/2} a]`.
pub fn build_liouvillian(
    p: &EffectiveParams,
    spec: &HilbertSpec,
    drive: Option<ConstantDrive>,
) -> Result<Liouvillian> {
    require_qubit(spec)?;
    let drive = drive.unwrap_or(ConstantDrive::off());
    check_drive(drive)?;
    let lv = spec.levels();
    let (h_up, j_up) = sector_operators(p, lv, QubitSector::Up, drive);
    let (h_dn, j_dn) = sector_operators(p, lv, QubitSector::Down, drive);
    let (pu, pd) = (projector(2, 0), projector(2, 1));
    let h = pu.kronecker(&h_up) + pd.kronecker(&h_dn);
    let jumps: Vec<(CMatrix, CMatrix)> = j_up
        .iter()
        .zip(&j_dn)
        .map(|(u, d)| {
            let full = pu.kronecker(u) + pd.kronecker(d);
            (full.clone(), full)
        })
        .collect();
    let d = 2 * lv;
    Ok(Liouvillian {
        kind: LiouvillianKind::Full { n_max: spec.n_max },
        hilbert_dim: d,
        matrix: assemble_sandwiches(d, &lindblad_terms(&h, &h, &jumps)),
        leak_threshold: spec.leak_threshold,
        edge: vec![spec.n_max, lv + spec.n_max],
    })
}

/// Generator of the cavity-space block `ρ_{ket,bra}`. Every operator in the
/// model is qubit-diagonal, so each block evolves on its own.
pub fn build_coherence_block(
    p: &EffectiveParams,
    spec: &HilbertSpec,
    drive: Option<ConstantDrive>,
    ket: QubitSector,
    bra: QubitSector,
) -> Result<Liouvillian> {
    require_qubit(spec)?;
    let drive = drive.unwrap_or(ConstantDrive::off());
    check_drive(drive)?;
    let lv = spec.levels();
    let (h_l, j_l) = sector_operators(p, lv, ket, drive);
    let (h_r, j_r) = sector_operators(p, lv, bra, drive);
    let jumps: Vec<_> = j_l.into_iter().zip(j_r).collect();
    Ok(Liouvillian {
        kind: LiouvillianKind::QubitBlock {
            n_max: spec.n_max,
            ket,
            bra,
        },
        hilbert_dim: lv,
        matrix: assemble_sandwiches(lv, &lindblad_terms(&h_l, &h_r, &jumps)),
        leak_threshold: spec.leak_threshold,
        edge: vec![spec.n_max],
    })
}

pub(crate) const ANC_G: usize = 0;
pub(crate) const ANC_E: usize = 1;
pub(crate) const ANC_F: usize = 2;

/// Probe-qubit block on ancilla (g, e, f) ⊗ cavity, flat index
/// `ancilla (n_max + 1) + n`, with the FWM coupling `Ω(a†|g⟩⟨f| + h.c.)` and
/// ancilla decays `γ_f 𝒟[|e⟩⟨f|]`, `γ_e 𝒟[|g⟩⟨e|]`.
pub fn build_fwm_block(
    p: &EffectiveParams,
    spec: &HilbertSpec,
    fwm: &FwmSpec,
    ket: QubitSector,
    bra: QubitSector,
) -> Result<Liouvillian> {
    spec.validate()?;
    fwm.validate()?;
    if spec.qubit_dim != 3 {
        return Err(Error::InvalidParameter("the FWM model needs qubit_dim = 3".into()));
    }
    let lv = spec.levels();
    let a = eye(3).kronecker(&annihilation(lv));
    let transition = |to: usize, from: usize| {
        let mut m = CMatrix::zeros(3, 3);
        m[(to, from)] = re(1.0);
        m.kronecker(&eye(lv))
    };
    let g_f = transition(ANC_G, ANC_F);
    let coupling = (a.adjoint() * &g_f) * re(fwm.omega_rabi);
    let coupling = &coupling + coupling.adjoint();
    let sector = |s: QubitSector| {
        let (h_c, j_c) = sector_operators(p, lv, s, ConstantDrive::off());
        let h = eye(3).kronecker(&h_c) + &coupling;
        let jumps: Vec<CMatrix> = j_c.iter().map(|j| eye(3).kronecker(j)).collect();
        (h, jumps)
    };
    let (h_l, j_l) = sector(ket);
    let (h_r, j_r) = sector(bra);
    let mut jumps: Vec<(CMatrix, CMatrix)> = j_l.into_iter().zip(j_r).collect();
    for (rate, op) in [
        (fwm.gamma_f, transition(ANC_E, ANC_F)),
        (fwm.gamma_e, transition(ANC_G, ANC_E)),
    ] {
        if rate > 0.0 {
            let l = op * re(rate.sqrt());
            jumps.push((l.clone(), l));
        }
    }
    let d = 3 * lv;
    Ok(Liouvillian {
        kind: LiouvillianKind::FwmBlock {
            n_max: spec.n_max,
            ket,
            bra,
        },
        hilbert_dim: d,
        matrix: assemble_sandwiches(d, &lindblad_terms(&h_l, &h_r, &jumps)),
        leak_threshold: spec.leak_threshold,
        edge: (0..3).map(|k| k * lv + spec.n_max).collect(),
    })
}

/// Probe-qubit block of the full multimode network, before adiabatic
/// elimination. Modes are truncated at `truncations[l]` photons each; the flat
/// index is mixed-radix with mode 0 most significant.
pub fn build_network_block(
    net: &MultimodeNetwork,
    truncations: &[usize],
    leak_threshold: f64,
    ket: QubitSector,
    bra: QubitSector,
) -> Result<Liouvillian> {
    let n = net.n_modes();
    if truncations.len() != n || truncations.iter().any(|&t| t < 1) {
        return Err(Error::InvalidParameter(format!(
            "need {n} truncations, each at least 1"
        )));
    }
    let dims: Vec<usize> = truncations.iter().map(|t| t + 1).collect();
    let d: usize = dims.iter().product();
    if d > 4096 {
        return Err(Error::InvalidParameter(format!(
            "network Hilbert dimension {d} too large for the block oracle"
        )));
    }
    let modes: Vec<CMatrix> = (0..n)
        .map(|m| {
            dims.iter().enumerate().fold(CMatrix::identity(1, 1), |acc, (k, &dk)| {
                acc.kronecker(&if k == m { annihilation(dk) } else { eye(dk) })
            })
        })
        .collect();
    let mut h0 = CMatrix::zeros(d, d);
    let mut k_diss = CMatrix::zeros(d, d);
    let mut terms = Vec::new();
    for l in 0..n {
        for m in 0..n {
            let hop = net.h_mat()[(l, m)];
            let gam = net.gamma_mat()[(l, m)];
            let cl_cm = modes[l].adjoint() * &modes[m];
            if hop != Complex64::new(0.0, 0.0) {
                h0 += &cl_cm * hop;
            }
            if gam != Complex64::new(0.0, 0.0) {
                k_diss += &cl_cm * gam;
                terms.push((&modes[m] * gam, modes[l].adjoint()));
            }
        }
    }
    let q = net.qubit_mode_index();
    let nq = modes[q].adjoint() * &modes[q];
    let h_l = &h0 + &nq * re(0.5 * net.lambda0() * ket.sign());
    let h_r = &h0 + &nq * re(0.5 * net.lambda0() * bra.sign());
    terms.push((h_l * (-I) - &k_diss * re(0.5), eye(d)));
    terms.push((eye(d), h_r * I - &k_diss * re(0.5)));

    let mut edge = Vec::new();
    for idx in 0..d {
        let mut rem = idx;
        let mut at_edge = false;
        for k in (0..n).rev() {
            if rem % dims[k] == truncations[k] {
                at_edge = true;
            }
            rem /= dims[k];
        }
        if at_edge {
            edge.push(idx);
        }
    }
    Ok(Liouvillian {
        kind: LiouvillianKind::NetworkBlock {
            truncations: truncations.to_vec(),
            ket,
            bra,
        },
        hilbert_dim: d,
        matrix: assemble_sandwiches(d, &terms),
        leak_threshold,
        edge,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> EffectiveParams {
        EffectiveParams::new(0.7, 1.3, 2.0, 1.1, 0.9, 0.4).unwrap()
    }

    fn apply(l: &Liouvillian, x: &CMatrix) -> CMatrix {
        let mut y = vec![Complex64::new(0.0, 0.0); x.len()];
        l.matrix.mul_vec(x.as_slice(), &mut y);
        CMatrix::from_column_slice(x.nrows(), x.ncols(), &y)
    }

    fn random_hermitian(d: usize, seed: u64) -> CMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let m = CMatrix::from_fn(d, d, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        &m + m.adjoint()
    }

    #[test]
    fn generator_is_trace_annihilating() {
        let spec = HilbertSpec::qubit(5);
        let drive = ConstantDrive { epsilon: Complex64::new(0.3, -0.2), delta_d: 0.5 };
        let l = build_liouvillian(&params(), &spec, Some(drive)).unwrap();
        let x = random_hermitian(l.hilbert_dim, 1);
        assert!(apply(&l, &x).trace().norm() < 1e-13);
    }

    #[test]
    fn reciprocal_dissipators_merge() {
        // θ = η = 0: κ𝒟[a] + Γ𝒟[a] = (κ + Γ)𝒟[a].
        let spec = HilbertSpec::qubit(4);
        let a = build_liouvillian(&EffectiveParams::new(0.2, 0.8, 1.0, 1.5, 0.0, 0.0).unwrap(), &spec, None).unwrap();
        let b = build_liouvillian(&EffectiveParams::new(0.2, 0.8, 2.5, 0.0, 0.0, 0.0).unwrap(), &spec, None).unwrap();
        let diff = a.matrix.to_dense() - b.matrix.to_dense();
        assert!(diff.iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn block_matches_full_generator() {
        let p = params();
        let spec = HilbertSpec::qubit(4);
        let full = build_liouvillian(&p, &spec, None).unwrap();
        let block = build_coherence_block(&p, &spec, None, QubitSector::Up, QubitSector::Down).unwrap();
        let lv = spec.levels();
        let mut x = CMatrix::zeros(2 * lv, 2 * lv);
        let blk = random_hermitian(lv, 7) * Complex64::new(0.3, 0.9);
        x.view_mut((0, lv), (lv, lv)).copy_from(&blk);
        let fx = apply(&full, &x);
        let bx = apply(&block, &blk);
        let diff = fx.view((0, lv), (lv, lv)) - bx;
        assert!(diff.iter().all(|z| z.norm() < 1e-13));
    }

    #[test]
    fn fwm_block_rejects_wrong_dimension() {
        let spec = HilbertSpec::qubit(2);
        assert!(build_fwm_block(&params(), &spec, &FwmSpec::ideal(1.0), QubitSector::Up, QubitSector::Down).is_err());
    }
}
