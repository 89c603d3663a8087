//! Centralized clustering primitives shared by every protocol.

mod assign;
mod fcm;
mod kmeans;

pub use assign::{assign_cosine, assign_euclidean, cosine_distance, COSINE_EPS};
pub use fcm::{
    fcm_best_of, fcm_centroids, fcm_fit, fcm_memberships, fcm_objective, FcmConfig, FcmFit,
};
pub use kmeans::{
    kmeans_best_of, kmeans_fit, kmeans_fit_from, kmeans_weighted_best_of, kmeanspp_init,
    KMeansConfig, KMeansFit,
};

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMetric {
    Euclidean,
}

/// `k` centroids of dimension `d`, as broadcast from server to clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CentroidDoc", into = "CentroidDoc")]
pub struct CentroidModel {
    /// `k x d`.
    pub centroids: Array2<f64>,
    pub fit_metric: FitMetric,
}

#[derive(Serialize, Deserialize)]
struct CentroidDoc {
    k: usize,
    d: usize,
    fit_metric: FitMetric,
    centroids: Vec<Vec<f64>>,
}

impl From<CentroidModel> for CentroidDoc {
    fn from(m: CentroidModel) -> Self {
        CentroidDoc {
            k: m.k(),
            d: m.d(),
            fit_metric: m.fit_metric,
            centroids: m.centroids.outer_iter().map(|r| r.to_vec()).collect(),
        }
    }
}

impl TryFrom<CentroidDoc> for CentroidModel {
    type Error = Error;

    fn try_from(doc: CentroidDoc) -> Result<Self> {
        if doc.centroids.len() != doc.k || doc.centroids.iter().any(|c| c.len() != doc.d) {
            return Err(Error::contract("centroid document shape does not match k x d"));
        }
        let flat: Vec<f64> = doc.centroids.into_iter().flatten().collect();
        let centroids = Array2::from_shape_vec((doc.k, doc.d), flat)
            .map_err(|e| Error::contract(e.to_string()))?;
        CentroidModel::new(centroids)
    }
}

impl CentroidModel {
    pub fn new(centroids: Array2<f64>) -> Result<Self> {
        if centroids.nrows() == 0 || centroids.ncols() == 0 {
            return Err(Error::contract("centroid model needs k >= 1 and d >= 1"));
        }
        if centroids.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("non-finite centroid entry"));
        }
        Ok(Self {
            centroids,
            fit_metric: FitMetric::Euclidean,
        })
    }

    pub fn k(&self) -> usize {
        self.centroids.nrows()
    }

    pub fn d(&self) -> usize {
        self.centroids.ncols()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// One cluster id per row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HardAssignment {
    pub labels: Vec<usize>,
}

impl HardAssignment {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Row-stochastic membership matrix of fuzzy c-means.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyMembership {
    /// `n x k`, each row sums to 1.
    pub weights: Array2<f64>,
    pub fuzzy_degree: f64,
}

impl FuzzyMembership {
    /// Argmax per row, ties to the lowest index.
    pub fn hard_labels(&self) -> HardAssignment {
        HardAssignment {
            labels: self.weights.outer_iter().map(argmax).collect(),
        }
    }
}

pub(crate) fn argmax(row: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    best
}

#[inline]
pub(crate) fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn check_dims(x: &ArrayView2<f64>, model: &CentroidModel) -> Result<()> {
    if x.ncols() != model.d() {
        return Err(Error::contract(format!(
            "data has {} columns, centroids have {}",
            x.ncols(),
            model.d()
        )));
    }
    Ok(())
}
