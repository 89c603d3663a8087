//! One-round protocol simulations and centralized references.
//!
//! Every federated protocol follows the same shape: connected clients
//! compute an upload independently, the server sorts uploads by client id,
//! fits `k` centroids once and broadcasts them, and each client labels its
//! own rows by cosine proximity. Client work is keyed on the stable client
//! id (seeds included), so the result does not depend on the order or
//! parallelism of client execution.

mod baselines;
mod sda_fc;

pub use baselines::{run_centralized, run_ffcm, run_kfed, run_oracle, CentralVariant};
pub use sda_fc::{run_sda_fc, SdaVariant};

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{assign_cosine, CentroidModel, HardAssignment, KMeansConfig};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::partition::{restrict, ConnectionMask, FederatedPartition};
use crate::synthesis::Synthesizer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "sda-fc-km")]
    SdaFcKm,
    #[serde(rename = "sda-fc-fcm")]
    SdaFcFcm,
    #[serde(rename = "k-fed")]
    KFed,
    #[serde(rename = "ffcm")]
    Ffcm,
    #[serde(rename = "km-central")]
    KmCentral,
    #[serde(rename = "fcm-central")]
    FcmCentral,
    #[serde(rename = "oracle")]
    Oracle,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::SdaFcKm,
        Method::SdaFcFcm,
        Method::KFed,
        Method::Ffcm,
        Method::KmCentral,
        Method::FcmCentral,
        Method::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::SdaFcKm => "sda-fc-km",
            Method::SdaFcFcm => "sda-fc-fcm",
            Method::KFed => "k-fed",
            Method::Ffcm => "ffcm",
            Method::KmCentral => "km-central",
            Method::FcmCentral => "fcm-central",
            Method::Oracle => "oracle",
        }
    }

    /// Whether the method runs over a client partition.
    pub fn is_federated(self) -> bool {
        matches!(self, Method::SdaFcKm | Method::SdaFcFcm | Method::KFed | Method::Ffcm)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthesizerKind {
    #[default]
    Gan,
    Gmm,
}

/// Settings shared by the protocol runners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolOptions {
    /// Local centroid count for k-FED and FFCM; `None` means `k`.
    pub k_local: Option<usize>,
    pub fuzzy_degree: f64,
    /// Weight pooled centroids by their local cluster sizes at the server.
    pub weighted_server: bool,
    pub parallel_clients: bool,
    pub synthesizer: SynthesizerKind,
    pub kmeans_restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for ProtocolOptions {
    fn default() -> Self {
        let km = KMeansConfig::default();
        Self {
            k_local: None,
            fuzzy_degree: 1.1,
            weighted_server: false,
            parallel_clients: false,
            synthesizer: SynthesizerKind::Gan,
            kmeans_restarts: km.restarts,
            max_iter: km.max_iter,
            tol: km.tol,
        }
    }
}

impl ProtocolOptions {
    pub(crate) fn kmeans(&self) -> KMeansConfig {
        KMeansConfig {
            max_iter: self.max_iter,
            tol: self.tol,
            restarts: self.kmeans_restarts,
        }
    }

    pub(crate) fn fcm(&self, fuzzy_degree: f64) -> crate::clustering::FcmConfig {
        crate::clustering::FcmConfig {
            fuzzy_degree,
            max_iter: self.max_iter,
            tol: self.tol,
            restarts: self.kmeans_restarts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Synthesizer {
        synthesizer: Synthesizer,
        local_size: usize,
    },
    Centroids {
        centroids: CentroidModel,
        cluster_sizes: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientUpload {
    pub client_id: usize,
    pub payload: Payload,
}

impl ClientUpload {
    pub fn validate(&self, d: usize) -> Result<()> {
        match &self.payload {
            Payload::Synthesizer {
                synthesizer,
                local_size,
            } => {
                if *local_size == 0 || synthesizer.output_dim() != d {
                    return Err(Error::contract("synthesizer upload malformed"));
                }
            }
            Payload::Centroids {
                centroids,
                cluster_sizes,
            } => {
                if centroids.d() != d || cluster_sizes.len() != centroids.k() {
                    return Err(Error::contract("centroid upload malformed"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolTrace {
    pub uploads_count: usize,
    pub broadcasts_count: usize,
    /// Participation flag per client slot; empty for centralized runs.
    pub participation: Vec<bool>,
    /// `(client id, local k actually used)` where a client had fewer rows
    /// than the requested local centroid count.
    pub degraded_clients: Vec<(usize, usize)>,
    /// Centroid count the server actually fitted.
    pub server_k: usize,
}

impl ProtocolTrace {
    fn centralized(k: usize) -> Self {
        Self {
            uploads_count: 0,
            broadcasts_count: 0,
            participation: Vec::new(),
            degraded_clients: Vec::new(),
            server_k: k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: Method,
    /// Dataset rows covered by `assignment`, ascending.
    pub rows: Vec<usize>,
    pub assignment: HardAssignment,
    pub centroids: CentroidModel,
    #[serde(skip)]
    pub synthetic_data: Option<Array2<f64>>,
    #[serde(skip)]
    pub uploads: Vec<ClientUpload>,
    pub trace: ProtocolTrace,
}

impl MethodResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Ground-truth labels of the covered rows.
    pub fn true_labels(&self, ds: &LabeledDataset) -> Result<Vec<usize>> {
        let labels = ds.labels()?;
        Ok(self.rows.iter().map(|&r| labels[r]).collect())
    }
}

/// Connected sub-partition after checking the mask and partition agree.
pub(crate) fn connected_clients(
    ds: &LabeledDataset,
    partition: &FederatedPartition,
    mask: &ConnectionMask,
) -> Result<FederatedPartition> {
    partition.validate(ds.n())?;
    let connected = restrict(partition, mask)?;
    if connected.num_clients() == 0 {
        return Err(Error::precondition("no connected clients"));
    }
    Ok(connected)
}

/// Runs `work` for every connected client, sequentially or on the rayon
/// pool; output order follows client id either way.
pub(crate) fn for_each_client<T, F>(partition: &FederatedPartition, parallel: bool, work: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &[usize]) -> Result<T> + Sync,
{
    let clients: Vec<(usize, &[usize])> = partition.clients().collect();
    if parallel {
        clients.into_par_iter().map(|(id, rows)| work(id, rows)).collect()
    } else {
        clients.into_iter().map(|(id, rows)| work(id, rows)).collect()
    }
}

/// Broadcast step: each connected client labels its rows by cosine
/// proximity. Returns the covered rows ascending with their labels.
pub(crate) fn broadcast_and_assign(
    ds: &LabeledDataset,
    connected: &FederatedPartition,
    model: &CentroidModel,
    parallel: bool,
) -> Result<(Vec<usize>, HardAssignment)> {
    let per_client = for_each_client(connected, parallel, |_, rows| {
        let x = ds.select_rows(rows);
        let labels = assign_cosine(x.view(), model)?;
        Ok(rows.iter().copied().zip(labels.labels).collect::<Vec<_>>())
    })?;
    let mut pairs: Vec<(usize, usize)> = per_client.into_iter().flatten().collect();
    pairs.sort_unstable();
    let (rows, labels) = pairs.into_iter().unzip();
    Ok((rows, HardAssignment { labels }))
}

pub(crate) fn participation(partition: &FederatedPartition) -> Vec<bool> {
    let mut flags = vec![false; partition.m];
    for &id in &partition.client_ids {
        flags[id] = true;
    }
    flags
}

/// Stacks blocks vertically.
pub(crate) fn vstack(blocks: &[Array2<f64>], d: usize) -> Array2<f64> {
    let views: Vec<ArrayView2<f64>> = blocks.iter().map(|b| b.view()).collect();
    if views.is_empty() {
        return Array2::zeros((0, d));
    }
    ndarray::concatenate(ndarray::Axis(0), &views).expect("blocks share a column count")
}
