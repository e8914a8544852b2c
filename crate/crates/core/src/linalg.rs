//! Dense and banded complex linear algebra used by the integrators.
//!
//! Every operator of the model is banded in the Fock basis (the quartic term
//! reaches four diagonals out), so the hot loops work on [`Banded`] copies and
//! keep the dense [`CMatrix`] form for construction and diagnostics.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Sparse storage of a square matrix by its nonzero diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct Banded {
    dim: usize,
    /// `(offset, values)`: entry `(r, r + offset)` for every valid row `r`,
    /// stored from the first valid row onward.
    diagonals: Vec<(isize, Vec<Complex64>)>,
}

impl Banded {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            diagonals: Vec::new(),
        }
    }

    /// Extract every diagonal holding at least one nonzero entry.
    pub fn from_dense(m: &CMatrix) -> Self {
        assert!(m.is_square(), "banded storage needs a square matrix");
        let dim = m.nrows();
        let mut diagonals = Vec::new();
        for offset in -(dim as isize - 1)..(dim as isize) {
            let len = dim - offset.unsigned_abs();
            let values: Vec<Complex64> = (0..len)
                .map(|j| {
                    let (r, c) = diag_index(offset, j);
                    m[(r, c)]
                })
                .collect();
            if values.iter().any(|v| *v != ZERO) {
                diagonals.push((offset, values));
            }
        }
        Self { dim, diagonals }
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for (offset, values) in &self.diagonals {
            for (j, v) in values.iter().enumerate() {
                m[diag_index(*offset, j)] = *v;
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Largest `|offset|` among the stored diagonals.
    pub fn bandwidth(&self) -> usize {
        self.diagonals
            .iter()
            .map(|(o, _)| o.unsigned_abs())
            .max()
            .unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.diagonals.is_empty()
    }

    /// `out = self · x`.
    pub fn apply(&self, x: &[Complex64], out: &mut [Complex64]) {
        out.fill(ZERO);
        self.apply_add(ONE, x, out);
    }

    /// `out += scale · self · x`.
    pub fn apply_add(&self, scale: Complex64, x: &[Complex64], out: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim);
        for (offset, values) in &self.diagonals {
            let m = offset.unsigned_abs();
            if *offset >= 0 {
                let xs = &x[m..];
                for ((o, d), xv) in out.iter_mut().zip(values).zip(xs) {
                    *o += scale * d * xv;
                }
            } else {
                let os = &mut out[m..];
                for ((o, d), xv) in os.iter_mut().zip(values).zip(x) {
                    *o += scale * d * xv;
                }
            }
        }
    }

    /// `out += scale · self · rho`, column by column.
    pub fn left_mul_add(&self, scale: Complex64, rho: &CMatrix, out: &mut CMatrix) {
        for c in 0..rho.ncols() {
            let src = rho.column(c);
            let mut dst = out.column_mut(c);
            self.apply_add(scale, src.as_slice(), dst.as_mut_slice());
        }
    }

    /// `out += scale · rho · self`.
    pub fn right_mul_add(&self, scale: Complex64, rho: &CMatrix, out: &mut CMatrix) {
        let dim = self.dim;
        for (offset, values) in &self.diagonals {
            // entry (r, r + offset) maps column r of rho into column r + offset of the product
            for (j, d) in values.iter().enumerate() {
                let (r, c) = diag_index(*offset, j);
                let coef = scale * d;
                let (src_col, dst_col) = (r, c);
                for row in 0..dim {
                    let v = rho[(row, src_col)];
                    out[(row, dst_col)] += coef * v;
                }
            }
        }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let diagonals = self
            .diagonals
            .iter()
            .map(|(o, v)| (-o, v.iter().map(|z| z.conj()).collect()))
            .collect();
        Self {
            dim: self.dim,
            diagonals,
        }
    }
}

fn diag_index(offset: isize, j: usize) -> (usize, usize) {
    if offset >= 0 {
        (j, j + offset as usize)
    } else {
        (j + offset.unsigned_abs(), j)
    }
}

/// `⟨a|b⟩ = Σ conj(a_i) b_i`.
#[inline]
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

#[inline]
pub fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Largest entrywise deviation of `m` from its conjugate transpose.
pub fn hermiticity_error(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for r in 0..n {
        for c in r..n {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let sym = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Trace distance `½‖a − b‖₁` between two Hermitian matrices.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    0.5 * hermitian_eigenvalues(&(a - b))
        .iter()
        .map(|e| e.abs())
        .sum::<f64>()
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_matrix(dim: usize) -> CMatrix {
        CMatrix::from_fn(dim, dim, |r, c| {
            let d = c as isize - r as isize;
            if d.abs() <= 2 {
                Complex64::new((r + 2 * c) as f64 * 0.1, d as f64 * 0.3 - 0.05)
            } else {
                ZERO
            }
        })
    }

    #[test]
    fn banded_round_trip_and_bandwidth() {
        let m = sample_matrix(7);
        let b = Banded::from_dense(&m);
        assert_eq!(b.to_dense(), m);
        assert_eq!(b.bandwidth(), 2);
        assert_eq!(b.adjoint().to_dense(), m.adjoint());
    }

    #[test]
    fn banded_products_match_dense() {
        let m = sample_matrix(6);
        let b = Banded::from_dense(&m);
        let x: Vec<Complex64> = (0..6)
            .map(|k| Complex64::new(k as f64, 1.0 - k as f64 * 0.5))
            .collect();
        let mut out = vec![ZERO; 6];
        b.apply(&x, &mut out);
        let dense = &m * CVector::from_column_slice(&x);
        for (a, e) in out.iter().zip(dense.iter()) {
            assert!((a - e).norm() < 1e-12);
        }

        let rho = CMatrix::from_fn(6, 6, |r, c| {
            Complex64::new(r as f64 - c as f64, (r * c) as f64)
        });
        let mut left = CMatrix::zeros(6, 6);
        b.left_mul_add(ONE, &rho, &mut left);
        assert!((left - &m * &rho).norm() < 1e-10);
        let mut right = CMatrix::zeros(6, 6);
        b.right_mul_add(ONE, &rho, &mut right);
        assert!((right - &rho * &m).norm() < 1e-10);
    }

    #[test]
    fn trace_distance_of_orthogonal_pure_states_is_one() {
        let mut a = CMatrix::zeros(3, 3);
        a[(0, 0)] = ONE;
        let mut b = CMatrix::zeros(3, 3);
        b[(2, 2)] = ONE;
        assert!((trace_distance(&a, &b) - 1.0).abs() < 1e-12);
        assert!(trace_distance(&a, &a) < 1e-12);
    }
}
