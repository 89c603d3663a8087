//! Fuzzy c-means.
//!
//! Memberships follow `u_ij ∝ (1 / ‖x_i − c_j‖²)^(1/(m−1))`, evaluated
//! relative to the closest centroid so that small fuzzy degrees (large
//! exponents) neither overflow nor lose the winning centroid to underflow.
//! A row lying exactly on a centroid gets membership 1 there.

use ndarray::{Array2, ArrayView2};

use super::{kmeans::KMeansConfig, kmeanspp_init, sq_dist, CentroidModel, FuzzyMembership};
use crate::error::{Error, Result};
use crate::rng::{self, stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FcmConfig {
    pub fuzzy_degree: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub restarts: usize,
}

impl Default for FcmConfig {
    fn default() -> Self {
        let km = KMeansConfig::default();
        Self {
            fuzzy_degree: 1.1,
            max_iter: km.max_iter,
            tol: km.tol,
            restarts: km.restarts,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FcmFit {
    pub model: CentroidModel,
    pub membership: FuzzyMembership,
    /// `Σ u_ij^m ‖x_i − c_j‖²` at the returned pair.
    pub objective: f64,
    pub iterations: usize,
}

pub fn fcm_memberships(x: ArrayView2<f64>, centroids: &Array2<f64>, fuzzy_degree: f64) -> Array2<f64> {
    let n = x.nrows();
    let k = centroids.nrows();
    let power = 1.0 / (fuzzy_degree - 1.0);
    let mut u = Array2::<f64>::zeros((n, k));
    let mut d2 = vec![0.0; k];
    for (i, row) in x.outer_iter().enumerate() {
        for (j, c) in centroids.outer_iter().enumerate() {
            d2[j] = sq_dist(row, c);
        }
        let (jmin, dmin) = d2
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |(bj, bd), (j, &d)| if d < bd { (j, d) } else { (bj, bd) });
        if dmin == 0.0 {
            u[[i, jmin]] = 1.0;
            continue;
        }
        let mut total = 0.0;
        for j in 0..k {
            let r = (dmin / d2[j]).powf(power);
            u[[i, j]] = r;
            total += r;
        }
        for j in 0..k {
            u[[i, j]] /= total;
        }
    }
    u
}

/// Membership^m-weighted means; a centroid with no mass keeps `previous`.
pub fn fcm_centroids(
    x: ArrayView2<f64>,
    u: &Array2<f64>,
    fuzzy_degree: f64,
    previous: &Array2<f64>,
) -> Array2<f64> {
    let (k, d) = previous.dim();
    let mut sums = Array2::<f64>::zeros((k, d));
    let mut mass = vec![0.0; k];
    for (i, row) in x.outer_iter().enumerate() {
        for j in 0..k {
            let w = u[[i, j]].powf(fuzzy_degree);
            if w > 0.0 {
                mass[j] += w;
                sums.row_mut(j).scaled_add(w, &row);
            }
        }
    }
    for (j, &w) in mass.iter().enumerate() {
        if w > 0.0 {
            sums.row_mut(j).mapv_inplace(|v| v / w);
        } else {
            sums.row_mut(j).assign(&previous.row(j));
        }
    }
    sums
}

pub fn fcm_objective(x: ArrayView2<f64>, centroids: &Array2<f64>, u: &Array2<f64>, fuzzy_degree: f64) -> f64 {
    x.outer_iter()
        .enumerate()
        .map(|(i, row)| {
            centroids
                .outer_iter()
                .enumerate()
                .map(|(j, c)| u[[i, j]].powf(fuzzy_degree) * sq_dist(row, c))
                .sum::<f64>()
        })
        .sum()
}

/// A single seeded FCM run from k-means++ centroids.
pub fn fcm_fit(
    x: ArrayView2<f64>,
    k: usize,
    fuzzy_degree: f64,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<FcmFit> {
    if !(fuzzy_degree > 1.0 && fuzzy_degree.is_finite()) {
        return Err(Error::precondition(format!(
            "fuzzy degree must exceed 1, got {fuzzy_degree}"
        )));
    }
    let init = kmeanspp_init(x, k, seed)?;
    let mut c = init.centroids;
    let mut iterations = 0;
    for _ in 0..max_iter {
        iterations += 1;
        let u = fcm_memberships(x, &c, fuzzy_degree);
        debug_assert!(u
            .outer_iter()
            .all(|r| (r.sum() - 1.0).abs() < 1e-9));
        let next = fcm_centroids(x, &u, fuzzy_degree, &c);
        let shift = next
            .iter()
            .zip(c.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        c = next;
        if shift < tol {
            break;
        }
    }
    let weights = fcm_memberships(x, &c, fuzzy_degree);
    let objective = fcm_objective(x, &c, &weights, fuzzy_degree);
    Ok(FcmFit {
        model: CentroidModel::new(c)?,
        membership: FuzzyMembership {
            weights,
            fuzzy_degree,
        },
        objective,
        iterations,
    })
}

/// Best of `cfg.restarts` seeded runs by FCM objective (ties to the earliest).
pub fn fcm_best_of(x: ArrayView2<f64>, k: usize, seed: u64, cfg: &FcmConfig) -> Result<FcmFit> {
    let mut best: Option<FcmFit> = None;
    for r in 0..cfg.restarts.max(1) {
        let s = rng::derive_seed(seed, &[stream::RESTART, r as u64]);
        let fit = fcm_fit(x, k, cfg.fuzzy_degree, s, cfg.max_iter, cfg.tol)?;
        if best.as_ref().is_none_or(|b| fit.objective < b.objective) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}
