//! Diagonal Gaussian mixture used as a high-fidelity stand-in for the GAN.

use ndarray::{Array2, ArrayView2};
use rand::distr::{weighted::WeightedIndex, Distribution};
use serde::{Deserialize, Serialize};

use crate::clustering::{kmeans_best_of, KMeansConfig};
use crate::dataset::sample_diag_gaussian;
use crate::error::{Error, Result};
use crate::rng;

/// Per-coordinate variance floor.
pub const VARIANCE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixtureSampler {
    pub weights: Vec<f64>,
    /// `k x d`.
    pub means: Array2<f64>,
    /// `k x d` standard deviations.
    pub stds: Array2<f64>,
}

impl GaussianMixtureSampler {
    pub fn sample(&self, n: usize, seed: u64) -> Result<Array2<f64>> {
        if n == 0 {
            return Err(Error::precondition("sample size must be at least 1"));
        }
        let pick = WeightedIndex::new(&self.weights).map_err(|e| Error::contract(e.to_string()))?;
        let mut rng = rng::seeded(seed);
        let d = self.means.ncols();
        let mut out = Array2::zeros((n, d));
        for mut row in out.outer_iter_mut() {
            let c = pick.sample(&mut rng);
            let mean = self.means.row(c).to_vec();
            let std = self.stds.row(c).to_vec();
            row.assign(&ndarray::Array1::from(sample_diag_gaussian(&mut rng, &mean, &std)));
        }
        Ok(out)
    }
}

/// k-means clustering followed by one pass of per-cluster weights, means
/// and diagonal variances.
pub fn fit_gmm_synthesizer(x: ArrayView2<f64>, k: usize, seed: u64) -> Result<GaussianMixtureSampler> {
    if k == 0 || x.nrows() < k {
        return Err(Error::precondition(format!(
            "mixture with {k} components needs at least {k} rows, got {}",
            x.nrows()
        )));
    }
    let fit = kmeans_best_of(x, k, seed, &KMeansConfig::default())?;
    let d = x.ncols();
    let mut counts = vec![0usize; k];
    let mut means = Array2::<f64>::zeros((k, d));
    for (row, &c) in x.outer_iter().zip(&fit.assignment.labels) {
        counts[c] += 1;
        means.row_mut(c).scaled_add(1.0, &row);
    }
    for (mut mean, &count) in means.outer_iter_mut().zip(&counts) {
        if count > 0 {
            mean.mapv_inplace(|v| v / count as f64);
        }
    }
    let mut var = Array2::<f64>::zeros((k, d));
    for (row, &c) in x.outer_iter().zip(&fit.assignment.labels) {
        for j in 0..d {
            var[[c, j]] += (row[j] - means[[c, j]]).powi(2);
        }
    }
    for (mut v, &count) in var.outer_iter_mut().zip(&counts) {
        let denom = count.max(1) as f64;
        v.mapv_inplace(|s| (s / denom).max(VARIANCE_FLOOR));
    }
    let n = x.nrows() as f64;
    Ok(GaussianMixtureSampler {
        weights: counts.iter().map(|&c| c as f64 / n).collect(),
        means,
        stds: var.mapv(f64::sqrt),
    })
}
