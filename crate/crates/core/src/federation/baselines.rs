//! Centroid-upload baselines (k-FED, FFCM), centralized fits and the
//! ground-truth-centroid oracle.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{
    broadcast_and_assign, connected_clients, for_each_client, participation, vstack, ClientUpload,
    Method, MethodResult, Payload, ProtocolOptions, ProtocolTrace,
};
use crate::clustering::{
    assign_cosine, fcm_best_of, kmeans_best_of, kmeans_weighted_best_of, CentroidModel,
    HardAssignment,
};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::partition::{ConnectionMask, FederatedPartition};
use crate::rng::{derive_seed, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CentralVariant {
    Km,
    Fcm,
}

#[derive(Clone, Copy)]
enum LocalFit {
    KMeans,
    Fcm(f64),
}

#[allow(clippy::too_many_arguments)]
fn centroid_protocol(
    ds: &LabeledDataset,
    partition: &FederatedPartition,
    mask: &ConnectionMask,
    k: usize,
    k_local: usize,
    local: LocalFit,
    seed: u64,
    opts: &ProtocolOptions,
) -> Result<MethodResult> {
    if k == 0 || k_local == 0 {
        return Err(Error::precondition("k and k_local must be at least 1"));
    }
    let connected = connected_clients(ds, partition, mask)?;
    let d = ds.d();

    let results = for_each_client(&connected, opts.parallel_clients, |id, rows| {
        let x = ds.select_rows(rows);
        let kl = k_local.min(rows.len());
        let s = derive_seed(seed, &[stream::CLIENT_CLUSTER, id as u64]);
        let (model, labels) = match local {
            LocalFit::KMeans => {
                let fit = kmeans_best_of(x.view(), kl, s, &opts.kmeans())?;
                (fit.model, fit.assignment.labels)
            }
            LocalFit::Fcm(m) => {
                let fit = fcm_best_of(x.view(), kl, s, &opts.fcm(m))?;
                (fit.model, fit.membership.hard_labels().labels)
            }
        };
        let mut sizes = vec![0usize; kl];
        labels.iter().for_each(|&l| sizes[l] += 1);
        let upload = ClientUpload {
            client_id: id,
            payload: Payload::Centroids {
                centroids: model,
                cluster_sizes: sizes,
            },
        };
        Ok((upload, (kl < k_local).then_some((id, kl))))
    })?;
    let (mut uploads, degraded): (Vec<ClientUpload>, Vec<Option<(usize, usize)>>) =
        results.into_iter().unzip();

    // Server: pool the uploaded centroids in client-id order.
    uploads.sort_by_key(|u| u.client_id);
    let mut blocks = Vec::new();
    let mut weights = Vec::new();
    for u in &uploads {
        u.validate(d)?;
        let Payload::Centroids {
            centroids,
            cluster_sizes,
        } = &u.payload
        else {
            return Err(Error::contract("expected a centroid upload"));
        };
        blocks.push(centroids.centroids.clone());
        weights.extend(cluster_sizes.iter().map(|&s| s as f64));
    }
    let pooled = vstack(&blocks, d);
    let server_k = k.min(pooled.nrows());
    let server_seed = derive_seed(seed, &[stream::SERVER]);
    let fit = if opts.weighted_server {
        kmeans_weighted_best_of(pooled.view(), &weights, server_k, server_seed, &opts.kmeans())?
    } else {
        kmeans_best_of(pooled.view(), server_k, server_seed, &opts.kmeans())?
    };

    let (rows, assignment) = broadcast_and_assign(ds, &connected, &fit.model, opts.parallel_clients)?;
    Ok(MethodResult {
        method: match local {
            LocalFit::KMeans => Method::KFed,
            LocalFit::Fcm(_) => Method::Ffcm,
        },
        rows,
        assignment,
        centroids: fit.model,
        synthetic_data: None,
        trace: ProtocolTrace {
            uploads_count: uploads.len(),
            broadcasts_count: 1,
            participation: participation(&connected),
            degraded_clients: degraded.into_iter().flatten().collect(),
            server_k,
        },
        uploads,
    })
}

/// k-FED: local k-means with `k_local` centroids, server k-means on the
/// pooled centroids. A client with fewer than `k_local` rows fits one
/// centroid per row instead, and is listed in the trace.
#[allow(clippy::too_many_arguments)]
pub fn run_kfed(
    ds: &LabeledDataset,
    partition: &FederatedPartition,
    mask: &ConnectionMask,
    k: usize,
    k_local: usize,
    seed: u64,
    opts: &ProtocolOptions,
) -> Result<MethodResult> {
    centroid_protocol(ds, partition, mask, k, k_local, LocalFit::KMeans, seed, opts)
}

/// FFCM: local fuzzy c-means (centroids uploaded), server k-means on the
/// pooled centroids. The local centroid count is `opts.k_local` or `k`.
#[allow(clippy::too_many_arguments)]
pub fn run_ffcm(
    ds: &LabeledDataset,
    partition: &FederatedPartition,
    mask: &ConnectionMask,
    k: usize,
    fuzzy_degree: f64,
    seed: u64,
    opts: &ProtocolOptions,
) -> Result<MethodResult> {
    let k_local = opts.k_local.unwrap_or(k);
    centroid_protocol(ds, partition, mask, k, k_local, LocalFit::Fcm(fuzzy_degree), seed, opts)
}

/// Fits on the full dataset and reports the fit's own Euclidean labels
/// (argmax membership for FCM).
pub fn run_centralized(
    ds: &LabeledDataset,
    variant: CentralVariant,
    k: usize,
    seed: u64,
    opts: &ProtocolOptions,
) -> Result<MethodResult> {
    let x = ds.features.view();
    let s = derive_seed(seed, &[stream::SERVER]);
    let (model, assignment, method) = match variant {
        CentralVariant::Km => {
            let fit = kmeans_best_of(x, k, s, &opts.kmeans())?;
            (fit.model, fit.assignment, Method::KmCentral)
        }
        CentralVariant::Fcm => {
            let fit = fcm_best_of(x, k, s, &opts.fcm(opts.fuzzy_degree))?;
            let labels = fit.membership.hard_labels();
            (fit.model, labels, Method::FcmCentral)
        }
    };
    Ok(MethodResult {
        method,
        rows: (0..ds.n()).collect(),
        assignment,
        centroids: model,
        synthetic_data: None,
        uploads: Vec::new(),
        trace: ProtocolTrace::centralized(k),
    })
}

/// Ground-truth class means as centroids, cosine assignment.
///
/// `k` must equal the number of classes. Classes sharing a mean produce
/// duplicate centroids; ties go to the lower index.
pub fn run_oracle(ds: &LabeledDataset, k: usize, _seed: u64) -> Result<MethodResult> {
    let labels = ds
        .labels
        .as_ref()
        .ok_or_else(|| Error::precondition("oracle needs ground-truth labels"))?;
    if k != ds.k_true {
        return Err(Error::precondition(format!(
            "oracle k = {k} but the dataset has {} classes",
            ds.k_true
        )));
    }
    let d = ds.d();
    let mut sums = Array2::<f64>::zeros((k, d));
    let mut counts = vec![0usize; k];
    for (row, &l) in ds.features.outer_iter().zip(labels) {
        sums.row_mut(l).scaled_add(1.0, &row);
        counts[l] += 1;
    }
    for (j, &c) in counts.iter().enumerate() {
        if c == 0 {
            return Err(Error::precondition(format!("class {j} has no rows")));
        }
        sums.row_mut(j).mapv_inplace(|v| v / c as f64);
    }
    let model = CentroidModel::new(sums)?;
    let assignment: HardAssignment = assign_cosine(ds.features.view(), &model)?;
    Ok(MethodResult {
        method: Method::Oracle,
        rows: (0..ds.n()).collect(),
        assignment,
        centroids: model,
        synthetic_data: None,
        uploads: Vec::new(),
        trace: ProtocolTrace::centralized(k),
    })
}
