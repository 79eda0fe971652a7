//! Feature-vector container and the `GMFEAT01` on-disk format.
//!
//! Layout (all integers little-endian):
//!
//! | offset | size | field                          |
//! |--------|------|--------------------------------|
//! | 0      | 8    | magic, ASCII `GMFEAT01`        |
//! | 8      | 4    | dtype code, `u32` (1 = f32)    |
//! | 12     | 8    | row count, `u64`               |
//! | 20     | 8    | dimension, `u64`               |
//! | 28     | 4·n·d| row-major `f32` payload        |
//!
//! The file carries no label; [`read_features`] uses the file stem.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 8] = *b"GMFEAT01";
pub const DTYPE_F32: u32 = 1;
pub const HEADER_LEN: u64 = 28;

/// Rows whose norm deviates from 1 by more than this are not considered unit.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-5;

/// An `n x d` matrix of feature vectors, one per row.
///
/// Entries are stored as `f32` in row-major order. All statistics computed from
/// a set accumulate in `f64`. A `FeatureSet` is immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    data: Vec<f32>,
    count: usize,
    dim: usize,
    label: String,
    normalized: bool,
}

impl FeatureSet {
    /// Builds a set from row-major data, validating shape and finiteness.
    pub fn new(data: Vec<f32>, count: usize, dim: usize, label: impl Into<String>) -> Result<Self> {
        if count == 0 || dim == 0 {
            return Err(Error::EmptySet { count, dim });
        }
        if data.len() != count * dim {
            return Err(Error::ShapeMismatch {
                len: data.len(),
                count,
                dim,
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / dim,
                col: pos % dim,
            });
        }
        Ok(FeatureSet {
            data,
            count,
            dim,
            label: label.into(),
            normalized: false,
        })
    }

    /// Builds a set from a slice of equally sized rows.
    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R], label: impl Into<String>) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    left: dim,
                    right: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(data, rows.len(), dim, label)
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Row-major view of all entries.
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Returns the subset of rows at `indices`, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<FeatureSet> {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            if i >= self.count {
                return Err(Error::InvalidConfig(format!(
                    "row index {i} out of range for {} rows",
                    self.count
                )));
            }
            data.extend_from_slice(self.row(i));
        }
        let mut set = FeatureSet::new(data, indices.len(), self.dim, self.label.clone())?;
        set.normalized = self.normalized;
        Ok(set)
    }
}

/// Decoded `GMFEAT01` header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureFileHeader {
    pub dtype_code: u32,
    pub count: u64,
    pub dim: u64,
}

impl FeatureFileHeader {
    pub fn payload_len(&self) -> Option<u64> {
        self.count.checked_mul(self.dim)?.checked_mul(4)
    }

    pub fn file_len(&self) -> Option<u64> {
        self.payload_len()?.checked_add(HEADER_LEN)
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN as usize] {
        let mut out = [0u8; HEADER_LEN as usize];
        out[..8].copy_from_slice(&MAGIC);
        out[8..12].copy_from_slice(&self.dtype_code.to_le_bytes());
        out[12..20].copy_from_slice(&self.count.to_le_bytes());
        out[20..28].copy_from_slice(&self.dim.to_le_bytes());
        out
    }

    /// Parses and validates the magic and dtype; shape is left to the caller.
    pub fn parse(bytes: &[u8; HEADER_LEN as usize], path: &Path) -> Result<Self> {
        if bytes[..8] != MAGIC {
            return Err(Error::BadMagic { path: path.into() });
        }
        let dtype_code = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if dtype_code != DTYPE_F32 {
            return Err(Error::UnsupportedDtype {
                path: path.into(),
                code: dtype_code,
            });
        }
        Ok(FeatureFileHeader {
            dtype_code,
            count: u64::from_le_bytes(bytes[12..20].try_into().unwrap()),
            dim: u64::from_le_bytes(bytes[20..28].try_into().unwrap()),
        })
    }
}

/// Reads and validates only the header of a feature file.
pub fn read_header(path: impl AsRef<Path>) -> Result<(FeatureFileHeader, u64)> {
    let path = path.as_ref();
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let file_len = file.metadata().map_err(|e| Error::io(path, e))?.len();
    let mut buf = [0u8; HEADER_LEN as usize];
    if file_len < HEADER_LEN {
        return Err(Error::TruncatedPayload {
            path: path.into(),
            expected: HEADER_LEN,
            found: file_len,
        });
    }
    file.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
    Ok((FeatureFileHeader::parse(&buf, path)?, file_len))
}

/// Reads a `GMFEAT01` file. The returned set is never flagged as normalized.
pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureSet> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if (bytes.len() as u64) < HEADER_LEN {
        return Err(Error::TruncatedPayload {
            path: path.into(),
            expected: HEADER_LEN,
            found: bytes.len() as u64,
        });
    }
    let header = FeatureFileHeader::parse(bytes[..HEADER_LEN as usize].try_into().unwrap(), path)?;
    if header.count == 0 || header.dim == 0 {
        return Err(Error::EmptySet {
            count: header.count as usize,
            dim: header.dim as usize,
        });
    }
    let expected = header.file_len().ok_or_else(|| {
        Error::InvalidConfig(format!("header shape {}x{} overflows", header.count, header.dim))
    })?;
    let found = bytes.len() as u64;
    if found < expected {
        return Err(Error::TruncatedPayload {
            path: path.into(),
            expected,
            found,
        });
    }
    if found > expected {
        return Err(Error::TrailingBytes {
            path: path.into(),
            expected,
            found,
        });
    }
    let data: Vec<f32> = bytes[HEADER_LEN as usize..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    FeatureSet::new(data, header.count as usize, header.dim as usize, label)
}

/// Writes `set` as a `GMFEAT01` file.
pub fn write_features(set: &FeatureSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if set.count == 0 || set.dim == 0 {
        return Err(Error::EmptySet {
            count: set.count,
            dim: set.dim,
        });
    }
    let header = FeatureFileHeader {
        dtype_code: DTYPE_F32,
        count: set.count as u64,
        dim: set.dim as u64,
    };
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        out.write_all(&header.to_bytes())?;
        for v in &set.data {
            out.write_all(&v.to_le_bytes())?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| Error::io(path, e))
}

/// Projects every row onto the unit sphere.
///
/// Norms are computed in `f64`. A zero-norm row is an error rather than being
/// skipped, since dropping it would silently change the sample count.
pub fn normalize(set: &FeatureSet) -> Result<FeatureSet> {
    let dim = set.dim;
    let norms: Vec<f64> = set
        .data
        .par_chunks_exact(dim)
        .map(|row| row.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt())
        .collect();
    if let Some(row) = norms.iter().position(|&n| n == 0.0) {
        return Err(Error::ZeroNormRow { row });
    }
    let mut data = vec![0f32; set.data.len()];
    data.par_chunks_exact_mut(dim)
        .zip(set.data.par_chunks_exact(dim))
        .zip(norms.par_iter())
        .for_each(|((dst, src), &norm)| {
            for (d, &s) in dst.iter_mut().zip(src) {
                *d = (s as f64 / norm) as f32;
            }
        });
    Ok(FeatureSet {
        data,
        count: set.count,
        dim,
        label: set.label.clone(),
        normalized: true,
    })
}

/// Euclidean norm of each row, in `f64`.
pub fn row_norms(set: &FeatureSet) -> Vec<f64> {
    set.rows()
        .map(|row| row.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt())
        .collect()
}
