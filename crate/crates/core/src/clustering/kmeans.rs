//! k-means++ seeding and Lloyd iterations.

use ndarray::{Array2, ArrayView2};
use rand::Rng;

use super::{sq_dist, CentroidModel, HardAssignment};
use crate::error::{Error, Result};
use crate::rng::{self, stream, SimRng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub max_iter: usize,
    /// Convergence threshold on the largest centroid coordinate shift.
    pub tol: f64,
    /// Independent k-means++ restarts; the lowest-inertia fit is kept.
    pub restarts: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            max_iter: 300,
            tol: 1e-6,
            restarts: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub model: CentroidModel,
    pub assignment: HardAssignment,
    pub inertia: f64,
    /// Inertia after each assignment step, ending with the final one.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

/// Standard D²-weighted seeding.
pub fn kmeanspp_init(x: ArrayView2<f64>, k: usize, seed: u64) -> Result<CentroidModel> {
    check_k(x, k)?;
    let mut rng = rng::seeded(seed);
    CentroidModel::new(seed_centroids(x, None, k, &mut rng))
}

fn check_k(x: ArrayView2<f64>, k: usize) -> Result<()> {
    if k == 0 || x.nrows() < k {
        return Err(Error::precondition(format!(
            "k-means needs 1 <= k <= n, got k={k}, n={}",
            x.nrows()
        )));
    }
    if x.ncols() == 0 {
        return Err(Error::precondition("data has no columns"));
    }
    Ok(())
}

fn seed_centroids(
    x: ArrayView2<f64>,
    weights: Option<&[f64]>,
    k: usize,
    rng: &mut SimRng,
) -> Array2<f64> {
    let n = x.nrows();
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let mut chosen: Vec<usize> = Vec::with_capacity(k);

    let total: f64 = (0..n).map(w).sum();
    chosen.push(if total > 0.0 {
        pick_weighted(rng, n, total, w)
    } else {
        rng.random_range(0..n)
    });

    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), x.row(chosen[0]))).collect();
    while chosen.len() < k {
        let mass: f64 = (0..n).map(|i| w(i) * d2[i]).sum();
        let next = if mass > 0.0 {
            pick_weighted(rng, n, mass, |i| w(i) * d2[i])
        } else {
            // Fewer distinct rows than k: fall back to an unused row.
            let unused: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            unused[rng.random_range(0..unused.len())]
        };
        chosen.push(next);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(x.row(i), x.row(next)));
        }
    }
    x.select(ndarray::Axis(0), &chosen)
}

fn pick_weighted(rng: &mut SimRng, n: usize, total: f64, weight: impl Fn(usize) -> f64) -> usize {
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for i in 0..n {
        let wi = weight(i);
        if wi > 0.0 {
            acc += wi;
            last_positive = i;
            if target < acc {
                return i;
            }
        }
    }
    last_positive
}

/// A single seeded k-means run: k-means++ seeding then Lloyd iterations.
pub fn kmeans_fit(
    x: ArrayView2<f64>,
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<KMeansFit> {
    check_k(x, k)?;
    let mut rng = rng::seeded(seed);
    let init = seed_centroids(x, None, k, &mut rng);
    Ok(lloyd(x, None, init, max_iter, tol))
}

/// Lloyd iterations from the given initial centroids.
pub fn kmeans_fit_from(
    x: ArrayView2<f64>,
    init: &CentroidModel,
    max_iter: usize,
    tol: f64,
) -> Result<KMeansFit> {
    check_k(x, init.k())?;
    super::check_dims(&x, init)?;
    Ok(lloyd(x, None, init.centroids.clone(), max_iter, tol))
}

/// Best of `cfg.restarts` seeded runs by inertia (ties to the earliest).
pub fn kmeans_best_of(x: ArrayView2<f64>, k: usize, seed: u64, cfg: &KMeansConfig) -> Result<KMeansFit> {
    best_of(x, None, k, seed, cfg)
}

/// As [`kmeans_best_of`], with per-row weights in seeding, inertia and means.
pub fn kmeans_weighted_best_of(
    x: ArrayView2<f64>,
    weights: &[f64],
    k: usize,
    seed: u64,
    cfg: &KMeansConfig,
) -> Result<KMeansFit> {
    if weights.len() != x.nrows() || weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
        return Err(Error::contract("weights must be finite, non-negative, one per row"));
    }
    best_of(x, Some(weights), k, seed, cfg)
}

fn best_of(
    x: ArrayView2<f64>,
    weights: Option<&[f64]>,
    k: usize,
    seed: u64,
    cfg: &KMeansConfig,
) -> Result<KMeansFit> {
    check_k(x, k)?;
    let mut best: Option<KMeansFit> = None;
    for r in 0..cfg.restarts.max(1) {
        let mut rng = rng::seeded(rng::derive_seed(seed, &[stream::RESTART, r as u64]));
        let init = seed_centroids(x, weights, k, &mut rng);
        let fit = lloyd(x, weights, init, cfg.max_iter, cfg.tol);
        if best.as_ref().is_none_or(|b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn assign_step(
    x: ArrayView2<f64>,
    centroids: &Array2<f64>,
    labels: &mut [usize],
    dists: &mut [f64],
) {
    for (i, row) in x.outer_iter().enumerate() {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (j, c) in centroids.outer_iter().enumerate() {
            let d = sq_dist(row, c);
            if d < best_d {
                best = j;
                best_d = d;
            }
        }
        labels[i] = best;
        dists[i] = best_d;
    }
}

/// Moves each empty centroid onto the row farthest from its own centroid,
/// taken only from clusters that keep at least one other member.
fn repair_empty(
    x: ArrayView2<f64>,
    centroids: &mut Array2<f64>,
    labels: &mut [usize],
    dists: &mut [f64],
) {
    let k = centroids.nrows();
    let mut counts = vec![0usize; k];
    labels.iter().for_each(|&l| counts[l] += 1);
    for j in 0..k {
        if counts[j] > 0 {
            continue;
        }
        let donor = (0..labels.len())
            .filter(|&i| counts[labels[i]] >= 2 && dists[i] > 0.0)
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if dists[b] >= dists[i] => Some(b),
                _ => Some(i),
            });
        let Some(i) = donor else { continue };
        centroids.row_mut(j).assign(&x.row(i));
        counts[labels[i]] -= 1;
        counts[j] += 1;
        labels[i] = j;
        dists[i] = 0.0;
    }
}

fn lloyd(
    x: ArrayView2<f64>,
    weights: Option<&[f64]>,
    mut centroids: Array2<f64>,
    max_iter: usize,
    tol: f64,
) -> KMeansFit {
    let (n, d) = x.dim();
    let k = centroids.nrows();
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let mut labels = vec![0usize; n];
    let mut dists = vec![0.0; n];
    let mut history = Vec::new();
    let mut iterations = 0;

    for _ in 0..max_iter {
        iterations += 1;
        assign_step(x, &centroids, &mut labels, &mut dists);
        repair_empty(x, &mut centroids, &mut labels, &mut dists);
        history.push((0..n).map(|i| w(i) * dists[i]).sum());

        let mut sums = Array2::<f64>::zeros((k, d));
        let mut mass = vec![0.0; k];
        for (i, row) in x.outer_iter().enumerate() {
            let wi = w(i);
            mass[labels[i]] += wi;
            sums.row_mut(labels[i]).scaled_add(wi, &row);
        }
        let mut shift: f64 = 0.0;
        for j in 0..k {
            if mass[j] > 0.0 {
                for c in 0..d {
                    let v = sums[[j, c]] / mass[j];
                    shift = shift.max((v - centroids[[j, c]]).abs());
                    centroids[[j, c]] = v;
                }
            }
        }
        if shift < tol {
            break;
        }
    }

    assign_step(x, &centroids, &mut labels, &mut dists);
    let inertia: f64 = (0..n).map(|i| w(i) * dists[i]).sum();
    history.push(inertia);
    KMeansFit {
        model: CentroidModel::new(centroids).expect("means of finite rows are finite"),
        assignment: HardAssignment { labels },
        inertia,
        inertia_history: history,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Axis};
    use proptest::prelude::*;

    fn assert_monotone(fit: &KMeansFit) {
        for w in fit.inertia_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12, "inertia rose: {:?}", fit.inertia_history);
        }
    }

    #[test]
    fn single_centroid_is_the_mean() {
        let x = array![[0.0, 1.0], [2.0, 3.0], [4.0, 8.0]];
        let fit = kmeans_fit(x.view(), 1, 3, 300, 1e-6).unwrap();
        let mean = x.mean_axis(Axis(0)).unwrap();
        for (a, b) in fit.model.centroids.row(0).iter().zip(mean.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        let total_var: f64 = x.var_axis(Axis(0), 0.0).sum() * 3.0;
        assert!((fit.inertia - total_var).abs() < 1e-9);
        assert_monotone(&fit);
    }

    #[test]
    fn square_corners_zero_inertia() {
        let x = array![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let fit = kmeans_fit(x.view(), 4, 0, 300, 1e-6).unwrap();
        assert_eq!(fit.inertia, 0.0);
    }

    #[test]
    fn k1_init_is_a_row() {
        let x = array![[0.0, 0.0], [5.0, 1.0], [2.0, 2.0]];
        let m = kmeanspp_init(x.view(), 1, 9).unwrap();
        assert!(x.outer_iter().any(|r| r == m.centroids.row(0)));
    }

    #[test]
    fn k_equals_n_init_permutes_rows() {
        let x = array![[0.0, 0.0], [5.0, 1.0], [2.0, 2.0], [7.0, -1.0]];
        for seed in 0..10 {
            let m = kmeanspp_init(x.view(), 4, seed).unwrap();
            let mut idx: Vec<usize> = m
                .centroids
                .outer_iter()
                .map(|c| x.outer_iter().position(|r| r == c).unwrap())
                .collect();
            idx.sort_unstable();
            assert_eq!(idx, vec![0, 1, 2, 3]);
        }
    }

    #[test]
    fn duplicate_heavy_init_picks_distinct_rows() {
        let distinct = [[0.0, 0.0], [3.0, 1.0], [-2.0, 4.0]];
        let picks = [0, 0, 0, 1, 1, 2, 2, 2, 2, 0];
        let x = Array2::from_shape_fn((10, 2), |(i, j)| distinct[picks[i]][j]);
        for seed in 0..50 {
            let m = kmeanspp_init(x.view(), 3, seed).unwrap();
            // Brute-force oracle: every pair of chosen centroids differs,
            // i.e. no D² = 0 row was ever chosen again.
            for a in 0..3 {
                for b in (a + 1)..3 {
                    assert_ne!(m.centroids.row(a), m.centroids.row(b), "seed {seed}");
                }
            }
        }
    }

    #[test]
    fn precondition_n_below_k() {
        let x = array![[0.0], [1.0]];
        assert!(matches!(kmeanspp_init(x.view(), 3, 0), Err(Error::Precondition(_))));
        assert!(kmeans_fit(x.view(), 3, 0, 10, 1e-6).is_err());
    }

    /// Exhaustive 2-partition oracle over 6 points.
    fn best_two_partition(x: &Array2<f64>) -> f64 {
        let n = x.nrows();
        let mut best = f64::INFINITY;
        for mask in 1u32..(1 << (n - 1)) {
            let mut cost = 0.0;
            for side in [true, false] {
                let rows: Vec<usize> = (0..n).filter(|&i| ((mask >> i) & 1 == 1) == side).collect();
                let sub = x.select(Axis(0), &rows);
                let mean = sub.mean_axis(Axis(0)).unwrap();
                cost += sub.outer_iter().map(|r| sq_dist(r, mean.view())).sum::<f64>();
            }
            best = best.min(cost);
        }
        best
    }

    #[test]
    fn six_points_reach_global_optimum() {
        let x = array![[0.0, 0.0], [1.0, 0.5], [0.3, 1.2], [4.0, 4.0], [5.0, 3.5], [1.8, 2.2]];
        let oracle = best_two_partition(&x);
        let best = (0..10)
            .map(|s| kmeans_fit(x.view(), 2, s, 300, 1e-6).unwrap())
            .inspect(assert_monotone)
            .map(|f| f.inertia)
            .fold(f64::INFINITY, f64::min);
        assert!((best - oracle).abs() < 1e-9, "k-means {best} vs oracle {oracle}");
        let restarts = kmeans_best_of(x.view(), 2, 0, &KMeansConfig::default()).unwrap();
        assert!((restarts.inertia - oracle).abs() < 1e-9);
    }

    #[test]
    fn empty_cluster_is_repaired() {
        // Both initial centroids sit on the left; the right one receives
        // nothing in the first assignment.
        let x = array![[0.0], [0.1], [0.2], [10.0], [10.1]];
        let init = CentroidModel::new(array![[0.1], [-50.0]]).unwrap();
        let fit = kmeans_fit_from(x.view(), &init, 100, 1e-9).unwrap();
        let mut counts = [0; 2];
        fit.assignment.labels.iter().for_each(|&l| counts[l] += 1);
        assert!(counts.iter().all(|&c| c > 0));
        assert!(fit.inertia < 0.1);
        assert_monotone(&fit);
    }

    #[test]
    fn weighted_restarts_follow_mass() {
        let x = array![[0.0], [1.0], [10.0]];
        let fit =
            kmeans_weighted_best_of(x.view(), &[1.0, 100.0, 1.0], 1, 0, &KMeansConfig::default())
                .unwrap();
        let c = fit.model.centroids[[0, 0]];
        assert!((c - 110.0 / 102.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn inertia_never_increases(
            flat in proptest::collection::vec(-5.0f64..5.0, 40),
            k in 1usize..6,
            seed in any::<u64>(),
        ) {
            let x = Array2::from_shape_vec((20, 2), flat).unwrap();
            let fit = kmeans_fit(x.view(), k, seed, 300, 1e-6).unwrap();
            for w in fit.inertia_history.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12);
            }
        }

        #[test]
        fn labels_are_permutation_equivariant(
            flat in proptest::collection::vec(-5.0f64..5.0, 30),
            perm_seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            let x = Array2::from_shape_vec((15, 2), flat).unwrap();
            let init = kmeanspp_init(x.view(), 3, 1).unwrap();
            let mut perm: Vec<usize> = (0..15).collect();
            perm.shuffle(&mut crate::rng::seeded(perm_seed));
            let xp = x.select(Axis(0), &perm);
            let a = kmeans_fit_from(x.view(), &init, 300, 0.0).unwrap();
            let b = kmeans_fit_from(xp.view(), &init, 300, 0.0).unwrap();
            for (pos, &orig) in perm.iter().enumerate() {
                prop_assert_eq!(b.assignment.labels[pos], a.assignment.labels[orig]);
            }
        }
    }
}
