//! Kernel Inception Distance: an unbiased MMD² estimate with the cubic
//! polynomial kernel `k(x, y) = (x·y / d + 1)^3`, averaged over random subsets.

use faer::linalg::matmul::triangular::{self, BlockStructure};
use faer::{Accum, Mat, MatRef, Par};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureSet;
use crate::linalg;

pub const DEFAULT_SUBSET_SIZE: usize = 1000;
pub const DEFAULT_NUM_SUBSETS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KidConfig {
    /// Rows drawn from each set per estimate.
    pub subset_size: usize,
    /// Number of independent estimates averaged.
    pub num_subsets: usize,
    pub seed: u64,
}

impl KidConfig {
    /// Default configuration for sets of the given sizes: subsets of
    /// `min(1000, source_count, target_count)` rows, 100 of them, seed 0.
    pub fn for_counts(source_count: usize, target_count: usize) -> Self {
        KidConfig {
            subset_size: DEFAULT_SUBSET_SIZE.min(source_count).min(target_count),
            num_subsets: DEFAULT_NUM_SUBSETS,
            seed: 0,
        }
    }

    pub fn validate(&self, source_count: usize, target_count: usize) -> Result<()> {
        if self.subset_size < 2 {
            return Err(Error::InvalidConfig(format!(
                "KID subset size must be at least 2, got {}",
                self.subset_size
            )));
        }
        if self.num_subsets == 0 {
            return Err(Error::InvalidConfig("KID needs at least one subset".into()));
        }
        let smallest = source_count.min(target_count);
        if self.subset_size > smallest {
            return Err(Error::InvalidConfig(format!(
                "KID subset size {} exceeds the smaller set ({smallest} rows)",
                self.subset_size
            )));
        }
        Ok(())
    }
}

/// Mean and standard deviation of the per-subset estimates.
///
/// The standard deviation uses divisor `num_subsets` and is 0 for one subset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KidScore {
    pub mean: f64,
    pub stddev: f64,
    pub num_subsets: usize,
}

/// Row indices used for one estimate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetDraw {
    pub source: Vec<usize>,
    pub target: Vec<usize>,
}

/// `(x·y / d + 1)^3` with `d = x.len()`.
pub fn poly_kernel(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    Ok(kernel_from_dot(dot, x.len() as f64))
}

#[inline]
fn kernel_from_dot(dot: f64, dim: f64) -> f64 {
    let t = dot / dim + 1.0;
    t * t * t
}

/// Kernel values `k(a_i, b_j)`, row-major `a.count() x b.count()`.
pub fn kernel_matrix(a: &FeatureSet, b: &FeatureSet) -> Result<Vec<f64>> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let (x, y) = (to_mat(a), to_mat(b));
    let mut gram = Mat::<f64>::zeros(a.count(), b.count());
    linalg::gemm(&mut gram, x.as_ref().transpose(), y.as_ref());
    let dim = a.dim() as f64;
    let mut out = Vec::with_capacity(a.count() * b.count());
    for i in 0..a.count() {
        for j in 0..b.count() {
            out.push(kernel_from_dot(gram[(i, j)], dim));
        }
    }
    Ok(out)
}

// Samples become columns (`dim x count`), the faster layout for `Xᵀ Y`.
fn to_mat(set: &FeatureSet) -> Mat<f64> {
    Mat::from_fn(set.dim(), set.count(), |j, i| set.row(i)[j] as f64)
}

fn gather(set: &FeatureSet, indices: &[usize]) -> Mat<f64> {
    Mat::from_fn(set.dim(), indices.len(), |j, i| set.row(indices[i])[j] as f64)
}

/// One unbiased MMD² estimate from two equally sized subsets:
///
/// ```text
/// [Σ_{i≠j} k(s_i, s_j) + Σ_{i≠j} k(t_i, t_j)] / (s(s-1))  -  2 Σ_{i,j} k(s_i, t_j) / s²
/// ```
///
/// The result may be negative.
pub fn kid_single_estimate(sub_s: &FeatureSet, sub_t: &FeatureSet) -> Result<f64> {
    if sub_s.dim() != sub_t.dim() {
        return Err(Error::DimensionMismatch {
            left: sub_s.dim(),
            right: sub_t.dim(),
        });
    }
    if sub_s.count() != sub_t.count() {
        return Err(Error::InvalidConfig(format!(
            "KID subsets must have equal sizes, got {} and {}",
            sub_s.count(),
            sub_t.count()
        )));
    }
    if sub_s.count() < 2 {
        return Err(Error::TooFewSamples {
            what: "KID estimate",
            required: 2,
            got: sub_s.count(),
        });
    }
    Ok(estimate(to_mat(sub_s).as_ref(), to_mat(sub_t).as_ref()))
}

/// `x` and `y` hold one sample per column.
fn estimate(x: MatRef<'_, f64>, y: MatRef<'_, f64>) -> f64 {
    let s = x.ncols();
    let dim = x.nrows() as f64;
    let within = off_diagonal_kernel_sum(x) + off_diagonal_kernel_sum(y);

    let mut cross_gram = Mat::<f64>::zeros(s, s);
    linalg::gemm(&mut cross_gram, x.transpose(), y);
    let mut cross = 0.0;
    for j in 0..s {
        for i in 0..s {
            cross += kernel_from_dot(cross_gram[(i, j)], dim);
        }
    }

    let s = s as f64;
    within / (s * (s - 1.0)) - 2.0 * cross / (s * s)
}

/// `Σ_{i≠j} k(x_i, x_j)`, using only the strict lower triangle of the Gram matrix.
fn off_diagonal_kernel_sum(x: MatRef<'_, f64>) -> f64 {
    let s = x.ncols();
    let dim = x.nrows() as f64;
    let mut gram = Mat::<f64>::zeros(s, s);
    triangular::matmul(
        gram.as_mut(),
        BlockStructure::StrictTriangularLower,
        Accum::Replace,
        x.transpose(),
        BlockStructure::Rectangular,
        x,
        BlockStructure::Rectangular,
        1.0,
        Par::Seq,
    );
    let mut sum = 0.0;
    for j in 0..s {
        for i in j + 1..s {
            sum += kernel_from_dot(gram[(i, j)], dim);
        }
    }
    2.0 * sum
}

/// Seed for subset `index`, derived from the run seed with a splitmix64 mix.
pub fn subset_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(0x9E37_79B9_7F4A_7C15)))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws the subset indices for every estimate.
///
/// Subset `i` uses a ChaCha8 stream seeded with [`subset_seed`]`(seed, i)`; the
/// source rows are drawn first, then the target rows, each uniformly without
/// replacement and returned in ascending order.
pub fn draw_subsets(cfg: &KidConfig, source_count: usize, target_count: usize) -> Result<Vec<SubsetDraw>> {
    cfg.validate(source_count, target_count)?;
    Ok((0..cfg.num_subsets)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(subset_seed(cfg.seed, i as u64));
            let mut source = rand::seq::index::sample(&mut rng, source_count, cfg.subset_size).into_vec();
            let mut target = rand::seq::index::sample(&mut rng, target_count, cfg.subset_size).into_vec();
            source.sort_unstable();
            target.sort_unstable();
            SubsetDraw { source, target }
        })
        .collect())
}

/// Averages the estimates over explicit subset draws.
pub fn kid_from_draws(source: &FeatureSet, target: &FeatureSet, draws: &[SubsetDraw]) -> Result<KidScore> {
    if source.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            left: source.dim(),
            right: target.dim(),
        });
    }
    if draws.is_empty() {
        return Err(Error::InvalidConfig("KID needs at least one subset".into()));
    }
    for draw in draws {
        let s = draw.source.len();
        if s < 2 || draw.target.len() != s {
            return Err(Error::InvalidConfig(format!(
                "KID subsets must have equal sizes of at least 2, got {} and {}",
                s,
                draw.target.len()
            )));
        }
        let out_of_range = draw.source.iter().any(|&i| i >= source.count())
            || draw.target.iter().any(|&i| i >= target.count());
        if out_of_range {
            return Err(Error::InvalidConfig("KID subset index out of range".into()));
        }
    }

    let estimates: Vec<f64> = draws
        .par_iter()
        .map(|draw| {
            let x = gather(source, &draw.source);
            let y = gather(target, &draw.target);
            estimate(x.as_ref(), y.as_ref())
        })
        .collect();

    let n = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / n;
    let var = estimates.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
    Ok(KidScore {
        mean,
        stddev: var.sqrt(),
        num_subsets: estimates.len(),
    })
}

/// KID between two feature sets.
///
/// Results depend only on the data and `cfg`, not on the worker thread count.
pub fn kid(source: &FeatureSet, target: &FeatureSet, cfg: &KidConfig) -> Result<KidScore> {
    if source.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            left: source.dim(),
            right: target.dim(),
        });
    }
    let draws = draw_subsets(cfg, source.count(), target.count())?;
    kid_from_draws(source, target, &draws)
}
