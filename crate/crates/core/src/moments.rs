//! Mean/covariance statistics and the Fréchet distance between them.
//!
//! ```text
//! FID = ||mu_s - mu_t||^2 + Tr(cov_s) + Tr(cov_t) - 2 Tr(sqrt(cov_s ⊙ cov_t))
//! ```
//!
//! where `⊙` is the matrix product ([`FidMode::Product`], the usual Fréchet
//! distance) or the entrywise product ([`FidMode::Elementwise`]).

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureSet;
use crate::linalg::{self, SquareMatrix};

/// Rows per block for the mean and covariance reductions.
const ROW_BLOCK: usize = 512;
/// Covariance columns computed per parallel task.
const COL_PANEL: usize = 128;

/// FID values in `[-FID_CLAMP, 0)` are treated as rounding noise and mapped to 0.
pub const FID_CLAMP: f64 = 1e-6;

/// How the square-root term combines the two covariances.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FidMode {
    /// `Tr((a b)^{1/2})`, the standard Fréchet distance between Gaussians.
    #[default]
    Product,
    /// `Tr((a ∘ b)^{1/2})` with `∘` the Hadamard product.
    Elementwise,
}

impl std::str::FromStr for FidMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "product" => Ok(FidMode::Product),
            "elementwise" => Ok(FidMode::Elementwise),
            other => Err(Error::InvalidConfig(format!(
                "unknown FID mode {other:?} (expected product or elementwise)"
            ))),
        }
    }
}

/// Mean vector and sample covariance (divisor `count - 1`) of a feature set.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    mean: Vec<f64>,
    cov: SquareMatrix,
    count: usize,
}

impl Moments {
    pub fn new(mean: Vec<f64>, cov: SquareMatrix, count: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::TooFewSamples {
                what: "moments",
                required: 2,
                got: count,
            });
        }
        if mean.len() != cov.dim() {
            return Err(Error::DimensionMismatch {
                left: mean.len(),
                right: cov.dim(),
            });
        }
        cov.check_symmetric()?;
        Ok(Moments { mean, cov, count })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &SquareMatrix {
        &self.cov
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Computes the row mean and sample covariance of `set`.
///
/// Partial sums are formed over fixed 512-row blocks and combined in ascending
/// block order, so the result is bit-identical for any thread count.
pub fn compute_moments(set: &FeatureSet) -> Result<Moments> {
    let (n, d) = (set.count(), set.dim());
    if n < 2 {
        return Err(Error::TooFewSamples {
            what: "moments",
            required: 2,
            got: n,
        });
    }

    let partials: Vec<Vec<f64>> = set
        .data()
        .par_chunks(ROW_BLOCK * d)
        .map(|block| {
            let mut acc = vec![0.0f64; d];
            for row in block.chunks_exact(d) {
                for (a, &v) in acc.iter_mut().zip(row) {
                    *a += v as f64;
                }
            }
            acc
        })
        .collect();
    let mut mean = vec![0.0f64; d];
    for p in &partials {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }

    // Each task owns columns [c0, c1) of the lower triangle, i.e. the
    // (d - c0) x (c1 - c0) trapezoid below the diagonal.
    let panels: Vec<(usize, Mat<f64>)> = (0..d.div_ceil(COL_PANEL))
        .into_par_iter()
        .map(|p| {
            let c0 = p * COL_PANEL;
            let c1 = (c0 + COL_PANEL).min(d);
            (c0, covariance_panel(set, &mean, c0, c1))
        })
        .collect();

    let mut cov = SquareMatrix::zeros(d);
    let scale = 1.0 / (n as f64 - 1.0);
    for (c0, panel) in &panels {
        for j in 0..panel.ncols() {
            for i in j..panel.nrows() {
                let v = panel[(i, j)] * scale;
                cov.set(c0 + i, c0 + j, v);
                cov.set(c0 + j, c0 + i, v);
            }
        }
    }
    Ok(Moments {
        mean,
        cov,
        count: n,
    })
}

fn covariance_panel(set: &FeatureSet, mean: &[f64], c0: usize, c1: usize) -> Mat<f64> {
    let (n, d) = (set.count(), set.dim());
    let rows = d - c0;
    let width = c1 - c0;
    let mut acc = Mat::<f64>::zeros(rows, width);
    for r0 in (0..n).step_by(ROW_BLOCK) {
        let b = (r0 + ROW_BLOCK).min(n) - r0;
        // Transposed centered block: column i holds row r0 + i, features c0..d.
        let centered_t = Mat::from_fn(rows, b, |j, i| set.row(r0 + i)[c0 + j] as f64 - mean[c0 + j]);
        let lhs = centered_t.as_ref();
        let rhs = centered_t.as_ref().subrows(0, width).transpose();
        let (top, bottom) = acc.as_mut().split_at_row_mut(width);
        linalg::gemm_lower_acc(top, lhs.subrows(0, width), rhs);
        linalg::gemm_acc(bottom, lhs.subrows(width, rows - width), rhs);
    }
    acc
}

/// Returns `Tr(sqrt(a ⊙ b))` for symmetric PSD `a` and `b`.
///
/// Product mode diagonalises the symmetric matrix `a^{1/2} b a^{1/2}`, which
/// has the same spectrum as `a b`. Elementwise mode diagonalises `a ∘ b`.
/// Eigenvalues within the clamp tolerance below zero count as zero.
///
/// The result does not depend on argument order: product mode always takes the
/// square root of the same member of the pair (see [`canonical_pair`]).
pub fn sqrtm_trace(a: &SquareMatrix, b: &SquareMatrix, mode: FidMode) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    a.check_symmetric()?;
    b.check_symmetric()?;
    let eigenvalues = match mode {
        FidMode::Product => {
            let (a, b) = canonical_pair(a, b);
            product_spectrum(a, b)?
        }
        FidMode::Elementwise => {
            linalg::psd_eigenvalues(a.to_faer().as_ref())?;
            linalg::psd_eigenvalues(b.to_faer().as_ref())?;
            let h = a.hadamard(b)?.to_faer();
            linalg::psd_eigenvalues(h.as_ref())?
        }
    };
    Ok(eigenvalues.iter().map(|v| v.sqrt()).sum())
}

/// Orders a pair by trace, then by the raw entries, so that swapped arguments
/// produce the same computation. Near-singular inputs would otherwise differ
/// between orders by roughly the square root of machine epsilon.
fn canonical_pair<'a>(a: &'a SquareMatrix, b: &'a SquareMatrix) -> (&'a SquareMatrix, &'a SquareMatrix) {
    let order = a.trace().total_cmp(&b.trace()).then_with(|| {
        a.as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    if order.is_gt() {
        (b, a)
    } else {
        (a, b)
    }
}

fn product_spectrum(a: &SquareMatrix, b: &SquareMatrix) -> Result<Vec<f64>> {
    let n = a.dim();
    let b = b.to_faer();
    linalg::psd_eigenvalues(b.as_ref())?;
    let root = linalg::psd_sqrt(a.to_faer().as_ref())?;
    let mut tmp = Mat::<f64>::zeros(n, n);
    linalg::gemm(&mut tmp, root.as_ref(), b.as_ref());
    let mut m = Mat::<f64>::zeros(n, n);
    linalg::gemm(&mut m, tmp.as_ref(), root.as_ref());
    linalg::symmetrize(&mut m);
    linalg::psd_eigenvalues(m.as_ref())
}

/// Fréchet distance from precomputed means and covariances.
pub(crate) fn fid_from_parts(
    mean_s: &[f64],
    cov_s: &SquareMatrix,
    mean_t: &[f64],
    cov_t: &SquareMatrix,
    mode: FidMode,
) -> Result<f64> {
    if mean_s.len() != mean_t.len() {
        return Err(Error::DimensionMismatch {
            left: mean_s.len(),
            right: mean_t.len(),
        });
    }
    let mean_term: f64 = mean_s
        .iter()
        .zip(mean_t)
        .map(|(s, t)| (s - t) * (s - t))
        .sum();
    let root = sqrtm_trace(cov_s, cov_t, mode)?;
    let value = mean_term + (cov_s.trace() + cov_t.trace()) - 2.0 * root;
    clamp_fid(value)
}

fn clamp_fid(value: f64) -> Result<f64> {
    if value >= 0.0 {
        Ok(value)
    } else if value >= -FID_CLAMP {
        Ok(0.0)
    } else {
        Err(Error::NegativeFid(value))
    }
}

pub fn fid_from_moments(s: &Moments, t: &Moments, mode: FidMode) -> Result<f64> {
    fid_from_parts(&s.mean, &s.cov, &t.mean, &t.cov, mode)
}

/// FID between two feature sets.
pub fn fid(source: &FeatureSet, target: &FeatureSet, mode: FidMode) -> Result<f64> {
    if source.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            left: source.dim(),
            right: target.dim(),
        });
    }
    let (s, t) = rayon::join(|| compute_moments(source), || compute_moments(target));
    fid_from_moments(&s?, &t?, mode)
}
