// Copyright 2026 nrdisp Contributors
// SPDX-License-Identifier: Apache-2.0

use nalgebra::DMatrix;
use num_complex::Complex64;

const C0: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Compressed-sparse-row complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<Complex64>,
}

impl CsrMatrix {
    /// Builds an `n × n` matrix from triplets, summing duplicates and dropping
    /// exact zeros.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, Complex64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; n + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<Complex64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            debug_assert!(r < n && c < n);
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            indptr[i + 1] += indptr[i];
        }
        let mut m = Self {
            n,
            indptr,
            indices,
            values,
        };
        m.prune();
        m
    }

    fn prune(&mut self) {
        let mut indptr = vec![0usize; self.n + 1];
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut values = Vec::with_capacity(self.values.len());
        for r in 0..self.n {
            for k in self.indptr[r]..self.indptr[r + 1] {
                if self.values[k] != C0 {
                    indices.push(self.indices[k]);
                    values.push(self.values[k]);
                }
            }
            indptr[r + 1] = indices.len();
        }
        self.indptr = indptr;
        self.indices = indices;
        self.values = values;
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (r, yr) in y.iter_mut().enumerate().take(self.n) {
            let mut acc = C0;
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            *yr = acc;
        }
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for k in self.indptr[r]..self.indptr[r + 1] {
                m[(r, self.indices[k])] += self.values[k];
            }
        }
        m
    }
}

/// Nonzero entries of a dense operator.
pub(crate) fn nonzeros(m: &DMatrix<Complex64>) -> Vec<(usize, usize, Complex64)> {
    let mut out = Vec::new();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if v != C0 {
                out.push((i, j, v));
            }
        }
    }
    out
}

/// Superoperator of `X ↦ Σ P X Q` acting on column-stacked `vec(X)`, i.e.
/// `Σ Qᵀ ⊗ P`.
pub(crate) fn assemble_sandwiches(
    d: usize,
    terms: &[(DMatrix<Complex64>, DMatrix<Complex64>)],
) -> CsrMatrix {
    let mut triplets = Vec::new();
    for (p, q) in terms {
        let pn = nonzeros(p);
        let qn = nonzeros(q);
        triplets.reserve(pn.len() * qn.len());
        // (P X Q)_{ij} = Σ P_ik X_kl Q_lj; vec index of (i, j) is j d + i.
        for &(l, j, qv) in &qn {
            for &(i, k, pv) in &pn {
                triplets.push((j * d + i, l * d + k, pv * qv));
            }
        }
    }
    CsrMatrix::from_triplets(d * d, triplets)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn sandwich_matches_dense_product() {
        let p = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.5), C0, c(0.0, -2.0), c(3.0, 0.0)]);
        let q = DMatrix::from_row_slice(2, 2, &[C0, c(1.0, 1.0), c(0.5, 0.0), c(-1.0, 0.0)]);
        let x = DMatrix::from_row_slice(2, 2, &[c(0.3, 0.1), c(-0.7, 0.2), c(1.1, 0.0), c(0.0, 0.4)]);
        let s = assemble_sandwiches(2, &[(p.clone(), q.clone())]);
        let mut y = vec![C0; 4];
        s.mul_vec(x.as_slice(), &mut y);
        let expected = &p * &x * &q;
        for (a, b) in y.iter().zip(expected.as_slice()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn duplicates_are_summed_and_zeros_pruned() {
        let m = CsrMatrix::from_triplets(
            2,
            vec![(0, 1, c(1.0, 0.0)), (0, 1, c(-1.0, 0.0)), (1, 0, c(2.0, 0.0)), (1, 0, c(1.0, 0.0))],
        );
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.to_dense()[(1, 0)], c(3.0, 0.0));
    }
}
