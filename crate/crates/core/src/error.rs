use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the metric engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic in {path}: expected \"GMFEAT01\"")]
    BadMagic { path: PathBuf },

    #[error("unsupported dtype code {code} in {path} (only 1 = f32 is defined)")]
    UnsupportedDtype { path: PathBuf, code: u32 },

    #[error("truncated payload in {path}: expected {expected} bytes, found {found}")]
    TruncatedPayload {
        path: PathBuf,
        expected: u64,
        found: u64,
    },

    #[error("trailing bytes in {path}: expected {expected} bytes, found {found}")]
    TrailingBytes {
        path: PathBuf,
        expected: u64,
        found: u64,
    },

    #[error("feature set is empty (count={count}, dim={dim})")]
    EmptySet { count: usize, dim: usize },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("data length {len} does not match {count}x{dim}")]
    ShapeMismatch { len: usize, count: usize, dim: usize },

    #[error("row {row} has zero norm and cannot be normalized")]
    ZeroNormRow { row: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("{what} needs at least {required} samples, got {got}")]
    TooFewSamples {
        what: &'static str,
        required: usize,
        got: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e}, scale {scale:e})")]
    NotSymmetric { asymmetry: f64, scale: f64 },

    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:e}, largest {largest:e})")]
    NotPsd { eigenvalue: f64, largest: f64 },

    #[error("FID evaluated to {0:e}, below the rounding tolerance")]
    NegativeFid(f64),

    #[error("eigendecomposition failed to converge")]
    EigenFailure,

    #[error("malformed JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

/// Coarse classification used for process exit statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// The caller supplied bad input (file, flag, config or data precondition).
    Input,
    /// Everything else: write failures, numerical breakdowns.
    Internal,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable identifier for this error.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::BadMagic { .. } => "bad_magic",
            Error::UnsupportedDtype { .. } => "unsupported_dtype",
            Error::TruncatedPayload { .. } => "truncated_payload",
            Error::TrailingBytes { .. } => "trailing_bytes",
            Error::EmptySet { .. } => "empty_set",
            Error::NonFinite { .. } => "non_finite",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::ZeroNormRow { .. } => "zero_norm_row",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::TooFewSamples { .. } => "too_few_samples",
            Error::InvalidConfig(_) => "invalid_config",
            Error::NotSymmetric { .. } => "not_symmetric",
            Error::NotPsd { .. } => "not_psd",
            Error::NegativeFid(_) => "negative_fid",
            Error::EigenFailure => "eigen_failure",
            Error::Json { .. } => "json",
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::NotSymmetric { .. }
            | Error::NotPsd { .. }
            | Error::NegativeFid(_)
            | Error::EigenFailure => ErrorKind::Internal,
            Error::Io { source, .. } if source.kind() != std::io::ErrorKind::NotFound => {
                ErrorKind::Internal
            }
            _ => ErrorKind::Input,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
