//! Clustering evaluation against ground truth.
//!
//! | Metric | Range | Notes |
//! |--------|-------|-------|
//! | [`nmi`] | [0, 1] | mutual information over `sqrt(H(U) H(V))` |
//! | [`kappa`] | [-1, 1] | Cohen's kappa after optimal one-to-one cluster matching |
//!
//! Both are computed from a [`ContingencyTable`] and are invariant to
//! relabeling of either partition. Kappa penalizes degenerate clusterings
//! (one giant cluster, many tiny ones) that NMI can rate favorably.

mod hungarian;

pub use hungarian::{hungarian, Assignment};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counts of (true class, predicted cluster) pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    /// `r x c`: true classes by predicted clusters.
    pub counts: Array2<u64>,
    pub n: u64,
}

impl ContingencyTable {
    pub fn from_counts(counts: Array2<u64>) -> Result<Self> {
        let n = counts.sum();
        if n == 0 {
            return Err(Error::precondition("contingency table is empty"));
        }
        Ok(Self { counts, n })
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.outer_iter().map(|r| r.sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        self.counts.columns().into_iter().map(|c| c.sum()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self {
            counts: self.counts.t().to_owned(),
            n: self.n,
        }
    }
}

pub fn contingency(true_labels: &[usize], pred_labels: &[usize]) -> Result<ContingencyTable> {
    if true_labels.len() != pred_labels.len() {
        return Err(Error::contract(format!(
            "{} true labels vs {} predicted",
            true_labels.len(),
            pred_labels.len()
        )));
    }
    if true_labels.is_empty() {
        return Err(Error::precondition("no labels to compare"));
    }
    let r = true_labels.iter().max().map_or(0, |m| m + 1);
    let c = pred_labels.iter().max().map_or(0, |m| m + 1);
    let mut counts = Array2::<u64>::zeros((r, c));
    for (&t, &p) in true_labels.iter().zip(pred_labels) {
        counts[[t, p]] += 1;
    }
    ContingencyTable::from_counts(counts)
}

fn entropy(sums: &[u64], n: f64) -> f64 {
    sums.iter()
        .filter(|&&s| s > 0)
        .map(|&s| {
            let p = s as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information with geometric-mean normalization.
///
/// Both partitions trivial (single cluster each) gives 1; exactly one
/// trivial gives 0.
pub fn nmi(table: &ContingencyTable) -> f64 {
    let n = table.n as f64;
    let rows = table.row_sums();
    let cols = table.col_sums();
    let hu = entropy(&rows, n);
    let hv = entropy(&cols, n);
    match (hu == 0.0, hv == 0.0) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let mut mi = 0.0;
    for ((i, j), &nij) in table.counts.indexed_iter() {
        if nij > 0 {
            let nij = nij as f64;
            mi += nij / n * (n * nij / (rows[i] as f64 * cols[j] as f64)).ln();
        }
    }
    (mi / (hu * hv).sqrt()).clamp(0.0, 1.0)
}

/// Matched Cohen's kappa and the predicted-cluster → true-class mapping.
///
/// Clusters are matched to classes by maximum total agreement. When there
/// are more clusters than classes the unmatched clusters count as
/// disagreement and contribute to no class's marginal.
///
/// Several matchings can reach the same agreement while producing different
/// chance agreement `p_e`; among those the one with the smallest `p_e` wins,
/// which keeps the value independent of how clusters happen to be numbered.
/// Remaining exact ties resolve lexicographically (see [`hungarian`]).
pub fn kappa(table: &ContingencyTable) -> (f64, Vec<Option<usize>>) {
    let (r, c) = table.counts.dim();
    let n = table.n as f64;
    let rows = table.row_sums();
    let cols = table.col_sums();
    let cost = kappa_matching_cost(table);
    let matching = hungarian(cost.view()).expect("counts are finite");
    let mut mapping = vec![None; c];
    for &(p, t) in &matching.pairs {
        mapping[p] = Some(t);
    }

    let mut mapped_cols = vec![0u64; r];
    let mut agree = 0u64;
    for (p, m) in mapping.iter().enumerate() {
        if let Some(t) = *m {
            mapped_cols[t] += cols[p];
            agree += table.counts[[t, p]];
        }
    }
    let p_o = agree as f64 / n;
    let p_e: f64 = rows
        .iter()
        .zip(&mapped_cols)
        .map(|(&a, &b)| (a as f64 / n) * (b as f64 / n))
        .sum();
    let k = if p_e >= 1.0 {
        if p_o >= 1.0 {
            1.0
        } else {
            0.0
        }
    } else {
        ((p_o - p_e) / (1.0 - p_e)).clamp(-1.0, 1.0)
    };
    (k, mapping)
}

/// `cost[pred][true]`: agreement dominates, `row_t * col_p` (the pair's
/// contribution to `n² p_e`) breaks ties. Integer-valued, exact in f64 for
/// n up to ~2·10⁵.
pub fn kappa_matching_cost(table: &ContingencyTable) -> Array2<f64> {
    let (r, c) = table.counts.dim();
    let rows = table.row_sums();
    let cols = table.col_sums();
    let scale = (table.n as f64) * (table.n as f64) + 1.0;
    Array2::from_shape_fn((c, r), |(p, t)| {
        -(table.counts[[t, p]] as f64) * scale + (rows[t] * cols[p]) as f64
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub nmi: f64,
    pub kappa: f64,
    /// Predicted cluster → matched true class.
    pub mapping: Vec<Option<usize>>,
}

pub fn evaluate(true_labels: &[usize], pred_labels: &[usize]) -> Result<MetricReport> {
    let table = contingency(true_labels, pred_labels)?;
    let (kappa, mapping) = kappa(&table);
    Ok(MetricReport {
        nmi: nmi(&table),
        kappa,
        mapping,
    })
}
