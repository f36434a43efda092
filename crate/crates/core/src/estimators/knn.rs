use std::borrow::Cow;

use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Distances below this are replaced by it before taking logs.
pub const DISTANCE_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KnnKlEstimate {
    /// Not sign-constrained.
    pub value: f64,
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub d: usize,
    /// Number of neighbor distances that hit [`DISTANCE_FLOOR`].
    pub floored_count: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Squared distance to the k-th nearest row of `pool` (row-major, `d` columns),
/// skipping row `skip`. Ties keep the lower index, so the result is
/// order-deterministic.
fn kth_sq(x: &[f64], pool: &[f64], k: usize, skip: Option<usize>) -> f64 {
    let mut best: Vec<f64> = Vec::with_capacity(k + 1);
    for (idx, row) in pool.chunks_exact(x.len()).enumerate() {
        if Some(idx) == skip {
            continue;
        }
        let dist = sq_dist(x, row);
        if best.len() == k && dist >= best[k - 1] {
            continue;
        }
        let pos = best.partition_point(|b| *b <= dist);
        best.insert(pos, dist);
        best.truncate(k);
    }
    best[k - 1]
}

fn row_major(a: &Array2<f64>) -> Cow<'_, [f64]> {
    match a.as_slice() {
        Some(s) => Cow::Borrowed(s),
        None => Cow::Owned(a.iter().copied().collect()),
    }
}

/// Fixed-k nearest-neighbor estimate of `KL(P || Q)` from `x ~ P` (rows) and
/// `y ~ Q`:
/// `(d/n) sum_i log(s_k(x_i) / r_k(x_i)) + log(m / (n - 1))`,
/// with `r_k` the k-th neighbor distance within `x` and `s_k` within `y`.
pub fn knn_kl(x: &Array2<f64>, y: &Array2<f64>, k: usize) -> Result<KnnKlEstimate> {
    let (n, d) = x.dim();
    let (m, dy) = y.dim();
    if n < 2 || m < 1 {
        return Err(Error::Parameter(format!("need n >= 2 and m >= 1 samples, got n={n}, m={m}")));
    }
    if d != dy || d == 0 {
        return Err(Error::Parameter(format!("dimension mismatch: {d} vs {dy}")));
    }
    if k == 0 || k >= n || k > m {
        return Err(Error::Parameter(format!("k={k} out of range for n={n}, m={m}")));
    }
    let (xs, ys) = (row_major(x), row_major(y));
    let terms: Vec<(f64, usize)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = &xs[i * d..(i + 1) * d];
            let r = kth_sq(xi, &xs, k, Some(i));
            let s = kth_sq(xi, &ys, k, None);
            let mut floored = 0;
            let mut clamp = |v: f64| {
                let dist = v.sqrt();
                if dist < DISTANCE_FLOOR {
                    floored += 1;
                    DISTANCE_FLOOR
                } else {
                    dist
                }
            };
            let (r, s) = (clamp(r), clamp(s));
            ((s / r).ln(), floored)
        })
        .collect();
    let mut sum = 0.0;
    let mut floored_count = 0;
    for (t, f) in terms {
        sum += t;
        floored_count += f;
    }
    Ok(KnnKlEstimate {
        value: d as f64 / n as f64 * sum + (m as f64 / (n as f64 - 1.0)).ln(),
        k,
        n,
        m,
        d,
        floored_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Purpose};
    use ndarray::array;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn normals(n: usize, d: usize, shift: f64, seed: u64, stream: u64) -> Array2<f64> {
        let mut rng = substream(seed, Purpose::Target, stream);
        Array2::from_shape_fn((n, d), |_| shift + rng.sample::<f64, _>(StandardNormal))
    }

    #[test]
    fn same_law_is_near_zero() {
        let mean: f64 = (0..10)
            .map(|s| knn_kl(&normals(2000, 2, 0.0, s, 0), &normals(2000, 2, 0.0, s, 1), 20).unwrap().value)
            .sum::<f64>()
            / 10.0;
        assert!(mean.abs() < 0.05, "{mean}");
    }

    #[test]
    fn shifted_gaussian_small_scale() {
        let v = knn_kl(&normals(3000, 1, 0.0, 1, 0), &normals(3000, 1, 1.0, 1, 1), 20).unwrap().value;
        assert!((v - 0.5).abs() < 0.15, "{v}");
    }

    #[test]
    fn hand_computed_one_dimensional() {
        // x = {0, 1, 3}, y = {0.5, 4}, k = 1.
        // r = (1, 1, 2), s = (0.5, 0.5, 1), value = (1/3) * 3 * log(1/2) + log(2/2).
        let x = array![[0.0], [1.0], [3.0]];
        let y = array![[0.5], [4.0]];
        let e = knn_kl(&x, &y, 1).unwrap();
        assert!((e.value - 0.5f64.ln()).abs() < 1e-15);
        assert_eq!((e.n, e.m, e.d, e.k, e.floored_count), (3, 2, 1, 1, 0));
    }

    #[test]
    fn duplicates_are_floored() {
        let x = array![[0.0, 1.0], [0.0, 1.0], [2.0, 2.0]];
        let y = array![[0.0, 0.0], [5.0, 5.0]];
        let e = knn_kl(&x, &y, 1).unwrap();
        assert!(e.value.is_finite());
        assert_eq!(e.floored_count, 2);
    }

    #[test]
    fn parameter_errors() {
        let x = normals(10, 2, 0.0, 1, 0);
        assert!(knn_kl(&x, &x, 0).is_err());
        assert!(knn_kl(&x, &x, 10).is_err());
        assert!(knn_kl(&x, &normals(5, 2, 0.0, 1, 1), 6).is_err());
        assert!(knn_kl(&x, &normals(10, 3, 0.0, 1, 1), 2).is_err());
        assert!(knn_kl(&normals(1, 2, 0.0, 1, 0), &x, 1).is_err());
    }

    #[test]
    fn permutation_and_rotation_invariance() {
        let x = normals(300, 2, 0.0, 4, 0);
        let y = normals(250, 2, 0.7, 4, 1);
        let base = knn_kl(&x, &y, 5).unwrap().value;
        let perm = |a: &Array2<f64>| {
            let idx: Vec<usize> = (0..a.nrows()).rev().collect();
            a.select(ndarray::Axis(0), &idx)
        };
        assert!((knn_kl(&perm(&x), &perm(&y), 5).unwrap().value - base).abs() < 1e-12);
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let rot = array![[c, -s], [s, c]];
        let rx = x.dot(&rot);
        let ry = y.dot(&rot);
        assert!((knn_kl(&rx, &ry, 5).unwrap().value - base).abs() < 1e-9);
    }
}
