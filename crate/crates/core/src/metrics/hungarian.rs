//! Minimum-cost rectangular assignment (Kuhn–Munkres with potentials).

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `(row, column)` pairs, sorted by row; `min(r, c)` of them.
    pub pairs: Vec<(usize, usize)>,
    pub cost: f64,
}

/// Optimal injective matching of `min(r, c)` pairs.
///
/// Among optimal matchings the lexicographically smallest is returned, read
/// along the shorter side: for `r <= c` the column chosen by row 0, then by
/// row 1, and so on; for `r > c` the row chosen by column 0, then column 1.
pub fn hungarian(cost: ArrayView2<f64>) -> Result<Assignment> {
    if cost.iter().any(|v| !v.is_finite()) {
        return Err(Error::contract("assignment cost matrix has non-finite entries"));
    }
    let (r, c) = cost.dim();
    if r == 0 || c == 0 {
        return Ok(Assignment { pairs: vec![], cost: 0.0 });
    }
    if r <= c {
        let cols = lexicographic_optimum(cost);
        let pairs: Vec<(usize, usize)> = cols.into_iter().enumerate().collect();
        let total = pairs.iter().map(|&(i, j)| cost[[i, j]]).sum();
        Ok(Assignment { pairs, cost: total })
    } else {
        let t = cost.t();
        let rows = lexicographic_optimum(t);
        let mut pairs: Vec<(usize, usize)> = rows.into_iter().enumerate().map(|(j, i)| (i, j)).collect();
        pairs.sort_unstable();
        let total = pairs.iter().map(|&(i, j)| cost[[i, j]]).sum();
        Ok(Assignment { pairs, cost: total })
    }
}

/// For `r <= c`: fixes rows one at a time to the smallest column that still
/// admits an optimal completion.
fn lexicographic_optimum(cost: ArrayView2<f64>) -> Vec<usize> {
    let (r, c) = cost.dim();
    let optimum = solve(cost).1;
    let tol = 1e-9 * (1.0 + optimum.abs());
    let mut chosen: Vec<usize> = Vec::with_capacity(r);
    let mut prefix = 0.0;
    for i in 0..r {
        let pick = (0..c)
            .filter(|j| !chosen.contains(j))
            .find(|&j| {
                let mut used = chosen.clone();
                used.push(j);
                let rest_cols: Vec<usize> = (0..c).filter(|x| !used.contains(x)).collect();
                let rest = if i + 1 < r {
                    let sub = Array2::from_shape_fn((r - i - 1, rest_cols.len()), |(a, b)| {
                        cost[[i + 1 + a, rest_cols[b]]]
                    });
                    solve(sub.view()).1
                } else {
                    0.0
                };
                prefix + cost[[i, j]] + rest <= optimum + tol
            })
            .expect("an optimal completion always exists");
        prefix += cost[[i, pick]];
        chosen.push(pick);
    }
    chosen
}

/// O(r² c) shortest augmenting path with potentials; requires `r <= c`.
/// Returns the column of each row and the total cost.
fn solve(cost: ArrayView2<f64>) -> (Vec<usize>, f64) {
    let (n, m) = cost.dim();
    debug_assert!(n <= m);
    // 1-based arrays with a virtual column 0, as in the classic formulation.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut cols = vec![0usize; n];
    for j in 1..=m {
        if p[j] != 0 {
            cols[p[j] - 1] = j - 1;
        }
    }
    let total = cols.iter().enumerate().map(|(i, &j)| cost[[i, j]]).sum();
    (cols, total)
}
