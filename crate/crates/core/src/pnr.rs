//! Precision and recall over k-nearest-neighbour manifolds.
//!
//! A point `x` lies in the manifold of a set `f` when, for at least one
//! `y ∈ f`, `|x - y|² < q · r_k(y)²`, with `r_k(y)` the distance from `y` to
//! its k-th nearest neighbour in `f` (itself excluded). Precision is the
//! fraction of source rows inside the target manifold; recall is the fraction
//! of target rows inside the source manifold.
//!
//! The comparison is strict, so a duplicated row has radius 0 at `k = 1` and
//! accepts nothing through its own ball.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distance::{self, Prepared};
use crate::error::{Error, Result};
use crate::features::FeatureSet;

pub const DEFAULT_K: usize = 3;
pub const DEFAULT_Q: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrConfig {
    pub k: usize,
    /// Multiplier applied to the squared k-NN radius.
    pub q: f64,
}

impl Default for PrConfig {
    fn default() -> Self {
        PrConfig {
            k: DEFAULT_K,
            q: DEFAULT_Q,
        }
    }
}

impl PrConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if !(self.q > 0.0 && self.q.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "q must be positive and finite, got {}",
                self.q
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrScore {
    pub precision: f64,
    pub recall: f64,
}

/// Keeps the `k` smallest values seen, sorted ascending.
struct KSmallest<'a> {
    buf: &'a mut [f64],
}

impl KSmallest<'_> {
    #[inline]
    fn push(&mut self, v: f64) {
        let k = self.buf.len();
        if v >= self.buf[k - 1] {
            return;
        }
        let mut i = k - 1;
        while i > 0 && self.buf[i - 1] > v {
            self.buf[i] = self.buf[i - 1];
            i -= 1;
        }
        self.buf[i] = v;
    }
}

fn check_k(set: &FeatureSet, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if set.count() <= k {
        return Err(Error::TooFewSamples {
            what: "k-NN radii",
            required: k + 1,
            got: set.count(),
        });
    }
    Ok(())
}

/// Squared distance from each row to its k-th nearest other row.
///
/// Only tiles on or above the block diagonal are computed; each tile feeds
/// candidates to both its row block and its column block. The k-th smallest
/// value does not depend on the order candidates are merged, so the result is
/// the same for any thread count.
pub fn knn_radii(set: &FeatureSet, k: usize) -> Result<Vec<f64>> {
    check_k(set, k)?;
    Ok(radii_prepared(&Prepared::new(set), k))
}

fn radii_prepared(p: &Prepared<'_>, k: usize) -> Vec<f64> {
    let n = p.count();
    let blocks = p.blocks();
    let pairs: Vec<(usize, usize)> = (0..blocks.len())
        .flat_map(|bi| (bi..blocks.len()).map(move |bj| (bi, bj)))
        .collect();

    let tiles: Vec<(usize, usize, Vec<f64>, Vec<f64>)> = pairs
        .par_iter()
        .map(|&(bi, bj)| {
            let (ra, rb) = (blocks[bi].clone(), blocks[bj].clone());
            let d = distance::tile(p, ra.clone(), p, rb.clone());
            let mut rows = vec![f64::INFINITY; ra.len() * k];
            let mut cols = if bi == bj {
                Vec::new()
            } else {
                vec![f64::INFINITY; rb.len() * k]
            };
            for j in 0..rb.len() {
                for i in 0..ra.len() {
                    if ra.start + i == rb.start + j {
                        continue;
                    }
                    let v = d[(i, j)];
                    KSmallest {
                        buf: &mut rows[i * k..(i + 1) * k],
                    }
                    .push(v);
                    if bi != bj {
                        KSmallest {
                            buf: &mut cols[j * k..(j + 1) * k],
                        }
                        .push(v);
                    }
                }
            }
            (bi, bj, rows, cols)
        })
        .collect();

    let mut best = vec![f64::INFINITY; n * k];
    for (bi, bj, rows, cols) in &tiles {
        for (block, cand) in [(blocks[*bi].clone(), rows), (blocks[*bj].clone(), cols)] {
            if cand.is_empty() {
                continue;
            }
            for (local, chunk) in cand.chunks_exact(k).enumerate() {
                let row = block.start + local;
                let mut acc = KSmallest {
                    buf: &mut best[row * k..(row + 1) * k],
                };
                for &v in chunk {
                    acc.push(v);
                }
            }
        }
    }
    best.chunks_exact(k).map(|c| c[k - 1]).collect()
}

/// Whether `x` falls inside the q-scaled k-NN ball of at least one row of `f`.
///
/// `radii` must be the squared k-NN radii of `f` (see [`knn_radii`]).
pub fn region(x: &[f32], f: &FeatureSet, radii: &[f64], q: f64) -> Result<bool> {
    if x.len() != f.dim() {
        return Err(Error::DimensionMismatch {
            left: x.len(),
            right: f.dim(),
        });
    }
    if radii.len() != f.count() {
        return Err(Error::InvalidConfig(format!(
            "{} radii supplied for {} rows",
            radii.len(),
            f.count()
        )));
    }
    let point = FeatureSet::new(x.to_vec(), 1, x.len(), "query")?;
    let (px, pf) = (Prepared::new(&point), Prepared::new(f));
    let thresholds: Vec<f64> = radii.iter().map(|r| q * r).collect();
    Ok(pf.blocks().into_iter().any(|rb| {
        let d = distance::tile(&px, 0..1, &pf, rb.clone());
        (0..rb.len()).any(|j| d[(0, j)] < thresholds[rb.start + j])
    }))
}

/// Precision and recall of `source` against `target`.
pub fn precision_recall(source: &FeatureSet, target: &FeatureSet, cfg: &PrConfig) -> Result<PrScore> {
    cfg.validate()?;
    if source.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            left: source.dim(),
            right: target.dim(),
        });
    }
    check_k(source, cfg.k)?;
    check_k(target, cfg.k)?;

    let (ps, pt) = rayon::join(|| Prepared::new(source), || Prepared::new(target));
    let (radii_s, radii_t) = rayon::join(|| radii_prepared(&ps, cfg.k), || radii_prepared(&pt, cfg.k));
    let thr_s: Vec<f64> = radii_s.iter().map(|r| cfg.q * r).collect();
    let thr_t: Vec<f64> = radii_t.iter().map(|r| cfg.q * r).collect();

    let (bs, bt) = (ps.blocks(), pt.blocks());
    let pairs: Vec<(usize, usize)> = (0..bs.len())
        .flat_map(|i| (0..bt.len()).map(move |j| (i, j)))
        .collect();

    // For every cross tile: which source rows it places in the target
    // manifold, and which target rows it places in the source manifold.
    let hits: Vec<(usize, usize, Vec<bool>, Vec<bool>)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (rs, rt) = (bs[i].clone(), bt[j].clone());
            let d = distance::tile(&ps, rs.clone(), &pt, rt.clone());
            let mut src_in = vec![false; rs.len()];
            let mut tgt_in = vec![false; rt.len()];
            for c in 0..rt.len() {
                let tc = thr_t[rt.start + c];
                for r in 0..rs.len() {
                    let v = d[(r, c)];
                    if v < tc {
                        src_in[r] = true;
                    }
                    if v < thr_s[rs.start + r] {
                        tgt_in[c] = true;
                    }
                }
            }
            (i, j, src_in, tgt_in)
        })
        .collect();

    let mut src_in = vec![false; source.count()];
    let mut tgt_in = vec![false; target.count()];
    for (i, j, s, t) in &hits {
        for (flag, hit) in src_in[bs[*i].clone()].iter_mut().zip(s) {
            *flag |= hit;
        }
        for (flag, hit) in tgt_in[bt[*j].clone()].iter_mut().zip(t) {
            *flag |= hit;
        }
    }
    let frac = |flags: &[bool]| flags.iter().filter(|&&b| b).count() as f64 / flags.len() as f64;
    Ok(PrScore {
        precision: frac(&src_in),
        recall: frac(&tgt_in),
    })
}
