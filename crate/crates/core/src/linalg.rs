//! Small dense linear algebra used by the signal model and the solvers.
//!
//! Matrices are column-major: sensing dictionaries are built and consumed one
//! column at a time, so keeping columns contiguous makes Gram products and
//! adjoint applications cache friendly.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};
#[allow(unused_imports)] // inherent methods win when std is linked
use num_traits::Float;

use num_complex::Complex64;

/// Complex double, the scalar type of every signal in this crate.
pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// `e^{j 2 pi cycles}` with the integer part of `cycles` removed first.
///
/// Radar phases are routinely tens of thousands of cycles; reducing before
/// scaling by 2 pi keeps the phasor accurate to ~1e-12.
pub fn phasor_cycles(cycles: f64) -> C64 {
    let frac = cycles - cycles.round();
    let angle = 2.0 * core::f64::consts::PI * frac;
    C64::new(angle.cos(), angle.sin())
}

/// `sum_i conj(a_i) b_i`
pub fn cdot(a: &[C64], b: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    let mut re = 0.0;
    let mut im = 0.0;
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re + x.im * y.im;
        im += x.re * y.im - x.im * y.re;
    }
    C64::new(re, im)
}

pub fn norm2(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `y += alpha * x`
pub fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Dense complex matrix, column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from contiguous column data.
    pub fn from_columns(rows: usize, cols: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), rows * cols, "column data has wrong length");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, j: usize) -> &[C64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn column_mut(&mut self, j: usize) -> &mut [C64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    /// `A x`
    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.cols, "mul_vec dimension mismatch");
        let mut y = vec![ZERO; self.rows];
        for (j, xj) in x.iter().enumerate() {
            if *xj != ZERO {
                axpy(*xj, self.column(j), &mut y);
            }
        }
        y
    }

    /// `A^H y`
    pub fn adjoint_mul_vec(&self, y: &[C64]) -> Vec<C64> {
        assert_eq!(y.len(), self.rows, "adjoint_mul_vec dimension mismatch");
        (0..self.cols).map(|j| cdot(self.column(j), y)).collect()
    }

    /// `A B`
    pub fn mul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, other.rows, "mul dimension mismatch");
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let col = self.mul_vec(other.column(j));
            out.column_mut(j).copy_from_slice(&col);
        }
        out
    }

    /// `A^H B`
    pub fn adjoint_mul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.rows, other.rows, "adjoint_mul dimension mismatch");
        CMatrix::from_fn(self.cols, other.cols, |i, j| cdot(self.column(i), other.column(j)))
    }

    /// `A^H A`, filled from the upper triangle.
    pub fn gram(&self) -> CMatrix {
        let n = self.cols;
        let mut g = CMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..=j {
                let v = cdot(self.column(i), self.column(j));
                g[(i, j)] = v;
                g[(j, i)] = v.conj();
            }
        }
        g
    }

    /// Largest entry of `|A - I|`; the matrix need not be square.
    pub fn max_deviation_from_identity(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.cols {
            for i in 0..self.rows {
                let target = if i == j { ONE } else { ZERO };
                worst = worst.max((self[(i, j)] - target).norm());
            }
        }
        worst
    }

    /// Orthonormalizes the columns in place with two passes of modified
    /// Gram-Schmidt. Returns `false` if a column is numerically dependent on
    /// the previous ones.
    pub fn orthonormalize_columns(&mut self) -> bool {
        let rows = self.rows;
        for j in 0..self.cols {
            // second pass restores orthogonality lost to cancellation
            for _ in 0..2 {
                for k in 0..j {
                    let (done, rest) = self.data.split_at_mut(j * rows);
                    let qk = &done[k * rows..(k + 1) * rows];
                    let vj = &mut rest[..rows];
                    let proj = cdot(qk, vj);
                    axpy(-proj, qk, vj);
                }
            }
            let col = self.column_mut(j);
            let nrm = norm2(col);
            if !(nrm > 1e-12) {
                return false;
            }
            let inv = 1.0 / nrm;
            for z in col.iter_mut() {
                *z *= inv;
            }
        }
        true
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;

    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[j * self.rows + i]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[j * self.rows + i]
    }
}

/// The matrix was not numerically positive definite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NotPositiveDefinite;

/// In-place Cholesky factorization of a symmetric positive definite matrix
/// stored row-major in `a` (n x n). On success the lower triangle holds `L`.
pub fn cholesky_in_place(a: &mut [f64], n: usize) -> Result<(), NotPositiveDefinite> {
    debug_assert_eq!(a.len(), n * n);
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) {
            return Err(NotPositiveDefinite);
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in (j + 1)..n {
            let (upper, lower) = a.split_at_mut(i * n);
            let row_j = &upper[j * n..j * n + j];
            let row_i = &mut lower[..n];
            let mut s = row_i[j];
            for k in 0..j {
                s -= row_i[k] * row_j[k];
            }
            row_i[j] = s / d;
        }
    }
    Ok(())
}

/// Solves `L L^T x = b` in place given the factor from [`cholesky_in_place`].
pub fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phasor_reduces_large_cycle_counts() {
        let z = phasor_cycles(50_000.25);
        assert!((z - C64::new(0.0, 1.0)).norm() < 1e-11);
        assert!((phasor_cycles(-3.0) - ONE).norm() < 1e-15);
    }

    #[test]
    fn gram_of_orthonormalized_matrix_is_identity() {
        let mut m = CMatrix::from_fn(6, 4, |i, j| {
            C64::new((i * 7 + j * 3) as f64 % 5.0 - 2.0, (i + 2 * j) as f64 % 3.0)
        });
        assert!(m.orthonormalize_columns());
        assert!(m.gram().max_deviation_from_identity() < 1e-13);
    }

    #[test]
    fn dependent_columns_are_reported() {
        let mut m = CMatrix::from_fn(3, 2, |i, _| C64::new(i as f64 + 1.0, 0.0));
        assert!(!m.orthonormalize_columns());
    }

    #[test]
    fn adjoint_products_agree() {
        let a = CMatrix::from_fn(5, 3, |i, j| C64::new(i as f64 - j as f64, (i * j) as f64));
        let y: Vec<C64> = (0..5).map(|i| C64::new(1.0, i as f64)).collect();
        let direct = a.adjoint_mul_vec(&y);
        let g = a.gram();
        let x = [ONE, C64::new(0.0, 1.0), C64::new(2.0, -1.0)];
        let ax = a.mul_vec(&x);
        let lhs = a.adjoint_mul_vec(&ax);
        let rhs = g.mul_vec(&x);
        for (l, r) in lhs.iter().zip(&rhs) {
            assert!((l - r).norm() < 1e-12);
        }
        assert_eq!(direct.len(), 3);
    }

    #[test]
    fn cholesky_solves_spd_system() {
        let mut a = [4.0, 2.0, 0.6, 2.0, 5.0, 1.0, 0.6, 1.0, 3.0];
        let orig = a;
        let mut b = [1.0, -2.0, 0.5];
        let rhs = b;
        cholesky_in_place(&mut a, 3).unwrap();
        cholesky_solve(&a, 3, &mut b);
        for i in 0..3 {
            let s: f64 = (0..3).map(|k| orig[i * 3 + k] * b[k]).sum();
            assert!((s - rhs[i]).abs() < 1e-12);
        }
        let mut bad = [1.0, 2.0, 2.0, 1.0];
        assert_eq!(cholesky_in_place(&mut bad, 2), Err(NotPositiveDefinite));
    }
}
