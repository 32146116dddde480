//! Small dense square matrices and a jittered Cholesky factorization.
//!
//! Parameter dimensions here are tiny (d <= 4 for every bundled model), so a
//! row-major `Vec` is all the structure needed.

use serde::{Deserialize, Serialize};

use crate::error::LinalgError;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![T::zero(); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, T::one())
    }

    pub fn scaled_identity(dim: usize, s: T) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = s;
        }
        m
    }

    pub fn diagonal(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds a matrix from rows; every row must have `rows.len()` entries.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, LinalgError> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for r in rows {
            if r.len() != dim {
                return Err(LinalgError::NotSquare {
                    rows: dim,
                    cols: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { dim, data })
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.data.chunks(self.dim.max(1)).map(|c| c.to_vec()).collect()
    }

    /// Outer product `x xᵀ`.
    pub fn outer(x: &[T]) -> Self {
        let dim = x.len();
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = x[i] * x[j];
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn trace(&self) -> T {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `(A + Aᵀ) / 2`.
    pub fn symmetrized(&self) -> Self {
        let half = T::lit(0.5);
        let mut s = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                s[(i, j)] = half * (self[(i, j)] + self[(j, i)]);
            }
        }
        s
    }

    pub fn is_symmetric(&self, rel_tol: T) -> bool {
        let scale = self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let tol = rel_tol * scale.max(T::min_positive_value());
        (0..self.dim).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "matrix dimension mismatch");
        Self {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "matrix dimension mismatch");
        Self {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "matrix dimension mismatch");
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                for j in 0..n {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(self.dim, x.len(), "matrix/vector dimension mismatch");
        self.data
            .chunks(self.dim)
            .map(|row| row.iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.dim + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.dim + j]
    }
}

/// Lower-triangular Cholesky factor together with the diagonal jitter that was
/// needed to obtain it.
#[derive(Clone, Debug, PartialEq)]
pub struct CholeskyFactor<T> {
    lower: Matrix<T>,
    jitter: T,
}

impl<T: Real> CholeskyFactor<T> {
    pub fn lower(&self) -> &Matrix<T> {
        &self.lower
    }

    pub fn jitter(&self) -> T {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.lower.dim()
    }

    /// `L z`.
    pub fn mul_lower(&self, z: &[T]) -> Vec<T> {
        let n = self.dim();
        let mut out = vec![T::zero(); n];
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = T::zero();
            for (j, &zj) in z.iter().enumerate().take(i + 1) {
                acc += self.lower[(i, j)] * zj;
            }
            *o = acc;
        }
        out
    }

    /// Forward substitution: solves `L y = b`.
    pub fn solve_lower(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        let mut y = vec![T::zero(); n];
        for i in 0..n {
            let mut acc = b[i];
            for j in 0..i {
                acc -= self.lower[(i, j)] * y[j];
            }
            y[i] = acc / self.lower[(i, i)];
        }
        y
    }

    /// `log |L| = Σ log L_ii`, i.e. half the log-determinant of the factored matrix.
    pub fn log_det_lower(&self) -> T {
        (0..self.dim()).map(|i| self.lower[(i, i)].ln()).sum()
    }

    /// Reconstructs `L Lᵀ`.
    pub fn reconstruct(&self) -> Matrix<T> {
        self.lower.matmul(&self.lower.transpose())
    }
}

fn try_cholesky<T: Real>(m: &Matrix<T>, jitter: T) -> Option<Matrix<T>> {
    let n = m.dim();
    let mut l = Matrix::zeros(n);
    for j in 0..n {
        let mut d = m[(j, j)] + jitter;
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > T::zero()) || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Some(l)
}

/// Cholesky factorization of a symmetric positive (semi-)definite matrix.
///
/// The plain factorization is tried first. On failure a diagonal jitter starting
/// at `1e-12 · trace/d` is added and escalated by ×10 up to `1e-6 · trace/d`.
/// A matrix with non-positive trace uses a unit scale for the jitter schedule.
pub fn cholesky_psd<T: Real>(m: &Matrix<T>) -> Result<CholeskyFactor<T>, LinalgError> {
    let n = m.dim();
    if n == 0 {
        return Err(LinalgError::Empty);
    }
    if !m.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    if !m.is_symmetric(T::lit(1e-12)) {
        return Err(LinalgError::NotSymmetric);
    }
    if let Some(lower) = try_cholesky(m, T::zero()) {
        return Ok(CholeskyFactor {
            lower,
            jitter: T::zero(),
        });
    }
    let mean_diag = m.trace() / T::lit(n as f64);
    let base = if mean_diag > T::zero() { mean_diag } else { T::one() };
    let cap = base * T::lit(1e-6);
    let mut jitter = base * T::lit(1e-12);
    // The relative slack guards the ×10 ladder against rounding just above the cap.
    while jitter <= cap * T::lit(1.0 + 1e-9) {
        if let Some(lower) = try_cholesky(m, jitter) {
            return Ok(CholeskyFactor { lower, jitter });
        }
        jitter = jitter * T::lit(10.0);
    }
    Err(LinalgError::NotPositiveDefinite { max_jitter: cap.to_f64_lossy() })
}
