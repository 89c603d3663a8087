use ndarray::{ArrayView1, ArrayView2};

use super::{check_dims, sq_dist, CentroidModel, HardAssignment};
use crate::error::Result;

/// Added to both norms so zero vectors have a defined cosine distance.
pub const COSINE_EPS: f64 = 1e-12;

pub fn cosine_distance(x: ArrayView1<f64>, c: ArrayView1<f64>) -> f64 {
    let dot = x.dot(&c);
    let nx = x.dot(&x).sqrt();
    let nc = c.dot(&c).sqrt();
    1.0 - dot / ((nx + COSINE_EPS) * (nc + COSINE_EPS))
}

/// Labels each row with the centroid of smallest cosine distance; ties go
/// to the lowest centroid index.
pub fn assign_cosine(x: ArrayView2<f64>, model: &CentroidModel) -> Result<HardAssignment> {
    check_dims(&x, model)?;
    Ok(assign_by(x, model, cosine_distance))
}

/// Labels each row with the nearest centroid in squared Euclidean distance;
/// ties go to the lowest centroid index.
pub fn assign_euclidean(x: ArrayView2<f64>, model: &CentroidModel) -> Result<HardAssignment> {
    check_dims(&x, model)?;
    Ok(assign_by(x, model, sq_dist))
}

fn assign_by(
    x: ArrayView2<f64>,
    model: &CentroidModel,
    dist: impl Fn(ArrayView1<f64>, ArrayView1<f64>) -> f64,
) -> HardAssignment {
    let labels = x
        .outer_iter()
        .map(|row| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (j, c) in model.centroids.outer_iter().enumerate() {
                let d = dist(row, c);
                if d < best_d {
                    best = j;
                    best_d = d;
                }
            }
            best
        })
        .collect();
    HardAssignment { labels }
}
