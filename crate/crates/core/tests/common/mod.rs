//! Slow, straightforward reference implementations used to check the blocked
//! production code. Nothing here calls into the library's numerics.
#![allow(dead_code, clippy::needless_range_loop)]

use genmetrics::{FeatureSet, GaussianSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `count x dim` set with entries uniform in `[-scale, scale)`.
pub fn uniform_set(seed: u64, count: usize, dim: usize, scale: f32) -> FeatureSet {
    let mut r = rng(seed);
    let data = (0..count * dim).map(|_| r.gen_range(-scale..scale)).collect();
    FeatureSet::new(data, count, dim, format!("uniform-{seed}")).unwrap()
}

/// Small-integer coordinates, so many pairwise distances tie exactly.
pub fn grid_set(seed: u64, count: usize, dim: usize, levels: i32) -> FeatureSet {
    let mut r = rng(seed);
    let data = (0..count * dim).map(|_| r.gen_range(0..levels) as f32).collect();
    FeatureSet::new(data, count, dim, format!("grid-{seed}")).unwrap()
}

/// Standard normal entries via the polar method.
pub fn normal_set(seed: u64, count: usize, dim: usize) -> FeatureSet {
    let mut r = rng(seed);
    let mut data = Vec::with_capacity(count * dim);
    while data.len() < count * dim {
        let (u, v): (f64, f64) = (r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
        let s = u * u + v * v;
        if s == 0.0 || s >= 1.0 {
            continue;
        }
        let f = (-2.0 * s.ln() / s).sqrt();
        data.push((u * f) as f32);
        data.push((v * f) as f32);
    }
    data.truncate(count * dim);
    FeatureSet::new(data, count, dim, format!("normal-{seed}")).unwrap()
}

pub type Dense = Vec<Vec<f64>>;

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let (n, m, p) = (a.len(), b.len(), b[0].len());
    let mut c = vec![vec![0.0; p]; n];
    for i in 0..n {
        for k in 0..m {
            for j in 0..p {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    c
}

pub fn transpose(a: &Dense) -> Dense {
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

/// Random SPD matrix `G Gᵀ / d + ridge I`.
pub fn random_spd(r: &mut ChaCha8Rng, d: usize, ridge: f64) -> Dense {
    let g: Dense = (0..d).map(|_| (0..d).map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
    let mut a = matmul(&g, &transpose(&g));
    for (i, row) in a.iter_mut().enumerate() {
        for v in row.iter_mut() {
            *v /= d as f64;
        }
        row[i] += ridge;
    }
    a
}

pub fn random_spec(r: &mut ChaCha8Rng, d: usize, count: usize, seed: u64) -> GaussianSpec {
    GaussianSpec {
        mean: (0..d).map(|_| r.gen_range(-1.0..1.0)).collect(),
        cov: random_spd(r, d, 0.1),
        seed,
        count,
    }
}

/// Cyclic Jacobi eigensolver for a symmetric matrix. Returns eigenvalues and
/// eigenvectors (as columns of the second result).
pub fn jacobi_eigen(a: &Dense) -> (Vec<f64>, Dense) {
    let n = a.len();
    let mut a = a.clone();
    let mut v: Dense = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let total: f64 = a.iter().flatten().map(|x| x * x).sum();
        if off <= 1e-30 * total.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

/// `A^{1/2}` for symmetric PSD `A`, via Jacobi.
pub fn sqrt_psd(a: &Dense) -> Dense {
    let n = a.len();
    let (w, v) = jacobi_eigen(a);
    let mut out = vec![vec![0.0; n]; n];
    for k in 0..n {
        let s = w[k].max(0.0).sqrt();
        for i in 0..n {
            for j in 0..n {
                out[i][j] += v[i][k] * s * v[j][k];
            }
        }
    }
    out
}

/// `Tr sqrt(A B)` computed as the sum of root eigenvalues of `A^{1/2} B A^{1/2}`.
pub fn trace_sqrt_product(a: &Dense, b: &Dense) -> f64 {
    let r = sqrt_psd(a);
    let m = matmul(&matmul(&r, b), &r);
    let n = m.len();
    let sym: Dense = (0..n).map(|i| (0..n).map(|j| 0.5 * (m[i][j] + m[j][i])).collect()).collect();
    jacobi_eigen(&sym).0.iter().map(|&l| l.max(0.0).sqrt()).sum()
}

/// Mean and `n-1` covariance by direct double sums.
pub fn naive_moments(set: &FeatureSet) -> (Vec<f64>, Dense) {
    let (n, d) = (set.count(), set.dim());
    let mut mean = vec![0.0; d];
    for row in set.rows() {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += v as f64;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = vec![vec![0.0; d]; d];
    for row in set.rows() {
        for i in 0..d {
            let ci = row[i] as f64 - mean[i];
            for j in 0..d {
                cov[i][j] += ci * (row[j] as f64 - mean[j]);
            }
        }
    }
    cov.iter_mut().flatten().for_each(|c| *c /= (n - 1) as f64);
    (mean, cov)
}

pub fn naive_fid_parts(mu_a: &[f64], a: &Dense, mu_b: &[f64], b: &Dense) -> f64 {
    let dm: f64 = mu_a.iter().zip(mu_b).map(|(x, y)| (x - y) * (x - y)).sum();
    let tr = |m: &Dense| (0..m.len()).map(|i| m[i][i]).sum::<f64>();
    dm + tr(a) + tr(b) - 2.0 * trace_sqrt_product(a, b)
}

pub fn naive_fid(s: &FeatureSet, t: &FeatureSet) -> f64 {
    let (ms, cs) = naive_moments(s);
    let (mt, ct) = naive_moments(t);
    naive_fid_parts(&ms, &cs, &mt, &ct)
}

pub fn kernel(x: &[f32], y: &[f32]) -> f64 {
    let dot: f64 = x.iter().zip(y).map(|(&a, &b)| a as f64 * b as f64).sum();
    (dot / x.len() as f64 + 1.0).powi(3)
}

/// Unbiased squared MMD between two equally sized row lists, double loop.
pub fn naive_mmd(x: &[&[f32]], y: &[&[f32]]) -> f64 {
    let m = x.len() as f64;
    let mut kxx = 0.0;
    let mut kyy = 0.0;
    let mut kxy = 0.0;
    for i in 0..x.len() {
        for j in 0..x.len() {
            if i != j {
                kxx += kernel(x[i], x[j]);
                kyy += kernel(y[i], y[j]);
            }
            kxy += kernel(x[i], y[j]);
        }
    }
    kxx / (m * (m - 1.0)) + kyy / (m * (m - 1.0)) - 2.0 * kxy / (m * m)
}

pub fn naive_sq_dist(x: &[f32], y: &[f32]) -> f64 {
    x.iter().zip(y).map(|(&a, &b)| (a as f64 - b as f64).powi(2)).sum()
}

/// Squared distance to the k-th nearest other row, by full sort.
pub fn naive_radii(f: &FeatureSet, k: usize) -> Vec<f64> {
    (0..f.count())
        .map(|i| {
            let mut d: Vec<f64> = (0..f.count())
                .filter(|&j| j != i)
                .map(|j| naive_sq_dist(f.row(i), f.row(j)))
                .collect();
            d.sort_by(|a, b| a.partial_cmp(b).unwrap());
            d[k - 1]
        })
        .collect()
}

pub fn naive_in_region(x: &[f32], f: &FeatureSet, radii: &[f64], q: f64) -> bool {
    (0..f.count()).any(|j| naive_sq_dist(x, f.row(j)) < q * radii[j])
}

/// (precision, recall) by brute force.
pub fn naive_pr(s: &FeatureSet, t: &FeatureSet, k: usize, q: f64) -> (f64, f64) {
    let rs = naive_radii(s, k);
    let rt = naive_radii(t, k);
    let p = s.rows().filter(|x| naive_in_region(x, t, &rt, q)).count() as f64 / s.count() as f64;
    let r = t.rows().filter(|y| naive_in_region(y, s, &rs, q)).count() as f64 / t.count() as f64;
    (p, r)
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1e-300)
}

/// Runs `f` inside a dedicated rayon pool of `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}
