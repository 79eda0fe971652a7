//! Seeded Gaussian feature sets and their closed-form Fréchet distance.
//!
//! Samples are `mean + L z`, where `L` is the lower Cholesky factor of the
//! covariance and `z` is standard normal. The generator is ChaCha20
//! (`rand_chacha`, seeded through `SeedableRng::seed_from_u64`), and normals
//! come from the Box–Muller transform evaluated with `libm`, so a spec yields
//! the same bytes on every platform:
//!
//! ```text
//! u1 = ((next_u64 >> 11) + 1) * 2^-53        in (0, 1]
//! u2 = (next_u64 >> 11) * 2^-53              in [0, 1)
//! z0 = sqrt(-2 ln u1) cos(2π u2),  z1 = sqrt(-2 ln u1) sin(2π u2)
//! ```
//!
//! Both variates of each pair are consumed, in row-major order.

use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureSet;
use crate::linalg::SquareMatrix;
use crate::moments::{self, FidMode};

pub const GENERATOR_NAME: &str = "chacha20+box-muller";

/// Parameters of a synthetic Gaussian population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub mean: Vec<f64>,
    /// Covariance rows; must be symmetric positive semidefinite.
    pub cov: Vec<Vec<f64>>,
    pub seed: u64,
    pub count: usize,
}

impl GaussianSpec {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn cov_matrix(&self) -> Result<SquareMatrix> {
        let cov = SquareMatrix::from_rows(&self.cov)?;
        if cov.dim() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                left: self.mean.len(),
                right: cov.dim(),
            });
        }
        Ok(cov)
    }

    pub fn validate(&self) -> Result<()> {
        if self.count < 2 {
            return Err(Error::TooFewSamples {
                what: "Gaussian spec",
                required: 2,
                got: self.count,
            });
        }
        if self.mean.is_empty() {
            return Err(Error::EmptySet {
                count: self.count,
                dim: 0,
            });
        }
        if self.mean.iter().chain(self.cov.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("Gaussian spec contains non-finite values".into()));
        }
        self.cov_matrix()?.check_symmetric().map_err(bad_covariance)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.into(),
            source,
        })
    }
}

// A bad covariance in a spec is a user input problem, not a numerical failure.
fn bad_covariance(e: Error) -> Error {
    Error::InvalidConfig(format!("Gaussian spec covariance: {e}"))
}

/// Lower Cholesky factor (row-major) of a symmetric PSD matrix.
///
/// Zero pivots are allowed as long as the rest of their column vanishes too,
/// so singular covariances (including the zero matrix) are accepted.
pub fn psd_cholesky(a: &SquareMatrix) -> Result<Vec<f64>> {
    let n = a.dim();
    let scale = (0..n).fold(0.0f64, |m, i| m.max(a.get(i, i).abs()));
    let pivot_tol = 1e-12 * scale;
    let residual_tol = 1e-8 * scale;
    let mut l = vec![0.0f64; n * n];
    for j in 0..n {
        let pivot = a.get(j, j) - (0..j).map(|k| l[j * n + k] * l[j * n + k]).sum::<f64>();
        if pivot < -pivot_tol {
            return Err(Error::NotPsd {
                eigenvalue: pivot,
                largest: scale,
            });
        }
        if pivot <= pivot_tol {
            for i in j + 1..n {
                let v = a.get(i, j) - (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum::<f64>();
                if v.abs() > residual_tol {
                    return Err(Error::NotPsd {
                        eigenvalue: pivot,
                        largest: scale,
                    });
                }
            }
            continue;
        }
        let root = pivot.sqrt();
        l[j * n + j] = root;
        for i in j + 1..n {
            let v = a.get(i, j) - (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum::<f64>();
            l[i * n + j] = v / root;
        }
    }
    Ok(l)
}

/// Stream of standard normal variates.
struct BoxMuller {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl BoxMuller {
    fn new(seed: u64) -> Self {
        BoxMuller {
            rng: ChaCha20Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    fn next(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        let u1 = ((self.rng.next_u64() >> 11) + 1) as f64 * SCALE;
        let u2 = (self.rng.next_u64() >> 11) as f64 * SCALE;
        let r = (-2.0 * libm::log(u1)).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * libm::sin(theta));
        r * libm::cos(theta)
    }
}

/// Draws `spec.count` rows from `N(spec.mean, spec.cov)`.
pub fn sample_gaussian(spec: &GaussianSpec) -> Result<FeatureSet> {
    spec.validate()?;
    let d = spec.dim();
    let l = psd_cholesky(&spec.cov_matrix()?).map_err(bad_covariance)?;
    let mut normals = BoxMuller::new(spec.seed);
    let mut z = vec![0.0f64; d];
    let mut data = Vec::with_capacity(spec.count * d);
    for _ in 0..spec.count {
        for v in z.iter_mut() {
            *v = normals.next();
        }
        for i in 0..d {
            let mut x = spec.mean[i];
            for j in 0..=i {
                x += l[i * d + j] * z[j];
            }
            data.push(x as f32);
        }
    }
    FeatureSet::new(
        data,
        spec.count,
        d,
        format!("synth:{GENERATOR_NAME}:seed={}", spec.seed),
    )
}

/// Fréchet distance between the two populations' true parameters.
pub fn analytic_fid(a: &GaussianSpec, b: &GaussianSpec) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    for spec in [a, b] {
        spec.validate()?;
        psd_cholesky(&spec.cov_matrix()?).map_err(bad_covariance)?;
    }
    moments::fid_from_parts(&a.mean, &a.cov_matrix()?, &b.mean, &b.cov_matrix()?, FidMode::Product)
}
