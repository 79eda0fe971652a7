mod common;

use common::*;
use genmetrics::{compute_moments, fid, kid, normalize, precision_recall, FidMode, KidConfig, PrConfig};

#[test]
fn metrics_are_bit_identical_across_thread_counts() {
    // Sizes straddle the block boundaries so several tiles and panels exist.
    let s = normal_set(1, 1300, 200);
    let t = uniform_set(2, 1100, 200, 1.5);
    let run = || {
        let ns = normalize(&s).unwrap();
        let nt = normalize(&t).unwrap();
        let m = compute_moments(&s).unwrap();
        let f = fid(&s, &t, FidMode::Product).unwrap();
        let fe = fid(&ns, &nt, FidMode::Elementwise).unwrap();
        let k = kid(&s, &t, &KidConfig { subset_size: 300, num_subsets: 6, seed: 1 }).unwrap();
        let p = precision_recall(&s, &t, &PrConfig { k: 3, q: 1.0 }).unwrap();
        (
            ns.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            m.cov().as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            f.to_bits(),
            fe.to_bits(),
            (k.mean.to_bits(), k.stddev.to_bits()),
            (p.precision.to_bits(), p.recall.to_bits()),
        )
    };
    let base = with_threads(1, run);
    for threads in [2, 4, 8] {
        assert!(with_threads(threads, run) == base, "{threads} threads differ");
    }
}
