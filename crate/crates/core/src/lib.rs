//! Distribution-level metrics for comparing a source feature set against a
//! target feature set: Fréchet distance (FID), kernel distance (KID) and
//! k-NN manifold precision/recall.
//!
//! Feature sets are `n x d` matrices of `f32` stored in the `GMFEAT01` binary
//! format ([`features`]). All statistics accumulate in `f64`. Work is split
//! into fixed-size blocks and reduced in a fixed order, so every metric is
//! bit-identical regardless of the rayon thread count.
//!
//! ```
//! use genmetrics::{fid, FeatureSet, FidMode};
//!
//! let s = FeatureSet::new(vec![0.0, 0.0, 2.0, 2.0, 1.0, 0.0], 3, 2, "s").unwrap();
//! assert_eq!(fid(&s, &s, FidMode::Product).unwrap(), 0.0);
//! ```

mod distance;
pub mod error;
pub mod features;
pub mod kid;
pub mod linalg;
pub mod moments;
pub mod pnr;
pub mod report;
pub mod synth;

pub use error::{Error, ErrorKind, Result};
pub use features::{normalize, read_features, read_header, write_features, FeatureFileHeader, FeatureSet};
pub use kid::{kid, kid_from_draws, kid_single_estimate, poly_kernel, KidConfig, KidScore, SubsetDraw};
pub use linalg::SquareMatrix;
pub use moments::{compute_moments, fid, fid_from_moments, sqrtm_trace, FidMode, Moments};
pub use pnr::{knn_radii, precision_recall, region, PrConfig, PrScore};
pub use report::{
    evaluate_pair, render_report, run_pair, run_report, Format, MetricReport, PairMetrics, PairOptions,
    ReportConfig, ReportRow,
};
pub use synth::{analytic_fid, sample_gaussian, GaussianSpec};
