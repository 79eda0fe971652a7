//! Dense symmetric-matrix helpers backed by `faer`.
//!
//! Every `faer` call here runs sequentially; parallelism lives in the callers,
//! which split work into fixed-size blocks so results do not depend on the
//! number of worker threads.

use faer::linalg::matmul::triangular::BlockStructure;
use faer::linalg::matmul::{matmul, triangular};
use faer::{Accum, Mat, MatMut, MatRef, Par, Side};

use crate::error::{Error, Result};

/// Relative asymmetry tolerated by [`SquareMatrix::check_symmetric`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// Eigenvalues above `-EIGEN_CLAMP_TOLERANCE * largest` are clamped to zero;
/// anything more negative is reported as a non-PSD input.
pub const EIGEN_CLAMP_TOLERANCE: f64 = 1e-10;

/// A dense `n x n` matrix of `f64`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n);
        for (i, &v) in diag.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        m
    }

    /// Builds a matrix from row-major data of length `n * n`.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::ShapeMismatch {
                len: data.len(),
                count: n,
                dim: n,
            });
        }
        Ok(SquareMatrix { n, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    left: n,
                    right: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(SquareMatrix { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks_exact(self.n.max(1)).map(<[f64]>::to_vec).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Entrywise (Hadamard) product.
    pub fn hadamard(&self, other: &SquareMatrix) -> Result<SquareMatrix> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                left: self.n,
                right: other.n,
            });
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect();
        Ok(SquareMatrix { n: self.n, data })
    }

    /// Fails if `|a_ij - a_ji|` exceeds [`SYMMETRY_TOLERANCE`] times the largest entry.
    pub fn check_symmetric(&self) -> Result<()> {
        let scale = self.max_abs();
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        if worst > SYMMETRY_TOLERANCE * scale {
            return Err(Error::NotSymmetric {
                asymmetry: worst,
                scale,
            });
        }
        Ok(())
    }

    pub(crate) fn to_faer(&self) -> Mat<f64> {
        Mat::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }
}

/// `dst = lhs * rhs`.
pub(crate) fn gemm(dst: &mut Mat<f64>, lhs: MatRef<'_, f64>, rhs: MatRef<'_, f64>) {
    matmul(dst.as_mut(), Accum::Replace, lhs, rhs, 1.0, Par::Seq);
}

/// `dst += lhs * rhs`.
pub(crate) fn gemm_acc(dst: MatMut<'_, f64>, lhs: MatRef<'_, f64>, rhs: MatRef<'_, f64>) {
    matmul(dst, Accum::Add, lhs, rhs, 1.0, Par::Seq);
}

/// `dst += lhs * rhs` restricted to the lower triangle (diagonal included) of `dst`.
pub(crate) fn gemm_lower_acc(dst: MatMut<'_, f64>, lhs: MatRef<'_, f64>, rhs: MatRef<'_, f64>) {
    triangular::matmul(
        dst,
        BlockStructure::TriangularLower,
        Accum::Add,
        lhs,
        BlockStructure::Rectangular,
        rhs,
        BlockStructure::Rectangular,
        1.0,
        Par::Seq,
    );
}

/// Mirrors the lower triangle into the upper one.
#[cfg(test)]
fn fill_upper_from_lower(m: &mut Mat<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..j {
            m[(i, j)] = m[(j, i)];
        }
    }
}

/// Replaces `m` by `(m + m^T) / 2`.
pub(crate) fn symmetrize(m: &mut Mat<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..j {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Clamps slightly negative eigenvalues to zero, rejecting clearly negative ones.
pub(crate) fn clamp_eigenvalues(values: &mut [f64]) -> Result<()> {
    let largest = values.iter().fold(0.0f64, |m, &v| m.max(v));
    let floor = -EIGEN_CLAMP_TOLERANCE * largest;
    for v in values.iter_mut() {
        if *v < 0.0 {
            if *v < floor {
                return Err(Error::NotPsd {
                    eigenvalue: *v,
                    largest,
                });
            }
            *v = 0.0;
        }
    }
    Ok(())
}

/// Eigenvalues of a symmetric matrix (lower triangle is read), clamped at zero.
pub(crate) fn psd_eigenvalues(m: MatRef<'_, f64>) -> Result<Vec<f64>> {
    let mut values = m
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| Error::EigenFailure)?;
    clamp_eigenvalues(&mut values)?;
    Ok(values)
}

/// Principal square root `V diag(sqrt(lambda)) V^T` of a symmetric PSD matrix.
pub(crate) fn psd_sqrt(m: MatRef<'_, f64>) -> Result<Mat<f64>> {
    let n = m.nrows();
    let evd = m.self_adjoint_eigen(Side::Lower).map_err(|_| Error::EigenFailure)?;
    let mut values: Vec<f64> = (0..n).map(|i| evd.S()[i]).collect();
    clamp_eigenvalues(&mut values)?;
    let u = evd.U();
    // V * diag(sqrt(lambda)), then multiply by V^T.
    let scaled = Mat::from_fn(n, n, |i, j| u[(i, j)] * values[j].sqrt());
    let mut out = Mat::zeros(n, n);
    gemm(&mut out, scaled.as_ref(), u.transpose());
    symmetrize(&mut out);
    Ok(out)
}
