//! Inputs shared by the criterion benchmarks.

use genmetrics::{sample_gaussian, FeatureSet, GaussianSpec};

/// `count x dim` Gaussian features with an AR(1)-style correlated covariance.
pub fn gaussian_set(seed: u64, count: usize, dim: usize, shift: f64) -> FeatureSet {
    let cov = (0..dim)
        .map(|i| (0..dim).map(|j| 0.5f64.powi((i as i32 - j as i32).abs())).collect())
        .collect();
    let spec = GaussianSpec {
        mean: vec![shift; dim],
        cov,
        seed,
        count,
    };
    sample_gaussian(&spec).expect("benchmark spec is valid")
}

/// A source/target pair with a small mean shift between them.
pub fn pair(count: usize, dim: usize) -> (FeatureSet, FeatureSet) {
    (gaussian_set(1, count, dim, 0.0), gaussian_set(2, count, dim, 0.1))
}
