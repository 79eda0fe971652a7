//! Exact blocked squared Euclidean distances.
//!
//! Tiles are computed with the Gram expansion `|x|² + |y|² - 2 x·y` in `f64`.
//! Pairs whose expanded distance falls below `CANCELLATION_GUARD * (|x|² + |y|²)`
//! are recomputed directly from the coordinates, so duplicates come out as
//! exactly 0 and near-duplicates do not lose their digits to cancellation.

use std::ops::Range;

use faer::Mat;

use crate::features::FeatureSet;
use crate::linalg;

/// Rows per tile side.
pub(crate) const TILE: usize = 512;

const CANCELLATION_GUARD: f64 = 1e-6;

/// A feature set converted to `f64` with cached squared row norms.
///
/// Rows are stored as the columns of a `dim x count` matrix, which keeps each
/// sample contiguous along the gemm reduction axis.
pub(crate) struct Prepared<'a> {
    set: &'a FeatureSet,
    mat: Mat<f64>,
    sq_norms: Vec<f64>,
}

impl<'a> Prepared<'a> {
    pub(crate) fn new(set: &'a FeatureSet) -> Self {
        let mat = Mat::from_fn(set.dim(), set.count(), |j, i| set.row(i)[j] as f64);
        let sq_norms = set
            .rows()
            .map(|r| r.iter().map(|&v| (v as f64) * (v as f64)).sum())
            .collect();
        Prepared { set, mat, sq_norms }
    }

    pub(crate) fn count(&self) -> usize {
        self.set.count()
    }

    pub(crate) fn blocks(&self) -> Vec<Range<usize>> {
        block_ranges(self.count())
    }
}

pub(crate) fn block_ranges(n: usize) -> Vec<Range<usize>> {
    (0..n).step_by(TILE).map(|s| s..(s + TILE).min(n)).collect()
}

/// Squared distance computed straight from the coordinates.
pub(crate) fn direct_sq_distance(x: &[f32], y: &[f32]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(&a, &b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum()
}

/// Distances between rows `ra` of `a` and rows `rb` of `b`, as an
/// `ra.len() x rb.len()` matrix.
pub(crate) fn tile(a: &Prepared<'_>, ra: Range<usize>, b: &Prepared<'_>, rb: Range<usize>) -> Mat<f64> {
    let lhs = a.mat.as_ref().subcols(ra.start, ra.len());
    let rhs = b.mat.as_ref().subcols(rb.start, rb.len());
    let mut out = Mat::<f64>::zeros(ra.len(), rb.len());
    linalg::gemm(&mut out, lhs.transpose(), rhs);
    for j in 0..rb.len() {
        let nb = b.sq_norms[rb.start + j];
        for i in 0..ra.len() {
            let na = a.sq_norms[ra.start + i];
            let mut d = na + nb - 2.0 * out[(i, j)];
            if d < CANCELLATION_GUARD * (na + nb) {
                d = direct_sq_distance(a.set.row(ra.start + i), b.set.row(rb.start + j));
            }
            out[(i, j)] = d.max(0.0);
        }
    }
    out
}
