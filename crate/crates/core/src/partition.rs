//! Federated partitions at a prescribed non-IID level, and device
//! disconnection masks.
//!
//! A [`FederatedPartition`] keeps stable client ids. Restricting it to the
//! connected clients drops whole clients but never renumbers the survivors,
//! so per-client random streams keyed on the id are unaffected by failures
//! elsewhere.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FederatedPartition {
    /// Non-IID level used to build the partition; `None` for geometric splits.
    pub p: Option<f64>,
    /// Number of client slots in the original federation.
    pub m: usize,
    pub seed: u64,
    /// Stable id of each present client, strictly increasing.
    pub client_ids: Vec<usize>,
    /// Dataset row indices held by each present client.
    pub client_rows: Vec<Vec<usize>>,
}

impl FederatedPartition {
    pub fn num_clients(&self) -> usize {
        self.client_ids.len()
    }

    pub fn total_rows(&self) -> usize {
        self.client_rows.iter().map(Vec::len).sum()
    }

    /// Iterates `(client id, rows)` pairs.
    pub fn clients(&self) -> impl Iterator<Item = (usize, &[usize])> {
        self.client_ids
            .iter()
            .copied()
            .zip(self.client_rows.iter().map(Vec::as_slice))
    }

    /// All rows held by present clients, ascending.
    pub fn union_rows(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.client_rows.iter().flatten().copied().collect();
        all.sort_unstable();
        all
    }

    /// Checks disjointness, non-empty clients and that rows index into `n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.client_ids.len() != self.client_rows.len() {
            return Err(Error::contract("client_ids and client_rows differ in length"));
        }
        if self.client_ids.is_empty() {
            return Err(Error::precondition("partition has no clients"));
        }
        if self.client_ids.windows(2).any(|w| w[0] >= w[1])
            || self.client_ids.iter().any(|&id| id >= self.m)
        {
            return Err(Error::contract("client ids must be increasing and below m"));
        }
        let mut seen = vec![false; n];
        for (id, rows) in self.clients() {
            if rows.is_empty() {
                return Err(Error::contract(format!("client {id} holds no rows")));
            }
            for &r in rows {
                if r >= n || std::mem::replace(&mut seen[r], true) {
                    return Err(Error::contract(format!(
                        "row {r} is out of range or held twice"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Splits the dataset over `m` clients at non-IID level `p`.
///
/// Client `i` gets `floor(n/m)` rows, plus one for the first `n mod m`
/// clients. The first `ceil(p * s_i)` of them come from class `i mod k_true`;
/// the rest are drawn uniformly from whatever remains once every client has
/// taken its pure quota. Sampling is without replacement across clients.
pub fn partition_noniid(
    ds: &LabeledDataset,
    p: f64,
    m: usize,
    seed: u64,
) -> Result<FederatedPartition> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("non-IID level p={p} outside [0, 1]")));
    }
    let labels = ds.labels()?;
    let n = ds.n();
    if m == 0 || m > n {
        return Err(Error::precondition(format!("need 1 <= m <= n, got m={m}, n={n}")));
    }
    let k = ds.k_true;
    let mut rng = rng::seeded(seed);

    let sizes: Vec<usize> = (0..m).map(|i| n / m + usize::from(i < n % m)).collect();
    let quotas: Vec<usize> = sizes.iter().map(|&s| (p * s as f64).ceil() as usize).collect();

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (row, &c) in labels.iter().enumerate() {
        by_class[c].push(row);
    }
    for pool in &mut by_class {
        pool.shuffle(&mut rng);
    }

    // Pure quotas first, so a later client's class cannot be drained by an
    // earlier client's random fill.
    let mut client_rows: Vec<Vec<usize>> = sizes.iter().map(|&s| Vec::with_capacity(s)).collect();
    for i in 0..m {
        let class = i % k;
        let pool = &mut by_class[class];
        if pool.len() < quotas[i] {
            return Err(Error::QuotaShortfall {
                client: i,
                class,
                required: quotas[i],
                available: pool.len(),
                achievable_p: pool.len() as f64 / sizes[i] as f64,
            });
        }
        let take = pool.split_off(pool.len() - quotas[i]);
        client_rows[i].extend(take);
    }

    let mut residual: Vec<usize> = by_class.into_iter().flatten().collect();
    residual.sort_unstable();
    residual.shuffle(&mut rng);
    let mut cursor = 0;
    for i in 0..m {
        let fill = sizes[i] - quotas[i];
        client_rows[i].extend_from_slice(&residual[cursor..cursor + fill]);
        cursor += fill;
    }
    debug_assert_eq!(cursor, residual.len());

    Ok(FederatedPartition {
        p: Some(p),
        m,
        seed,
        client_ids: (0..m).collect(),
        client_rows,
    })
}

/// Two clients separated by a line through the data mean at `angle` radians
/// from the x-axis, shifted by `offset` along its normal. Client 0 holds the
/// rows on the positive side. Uses the first two feature columns.
pub fn split_by_halfplane(ds: &LabeledDataset, angle: f64, offset: f64) -> Result<FederatedPartition> {
    if ds.d() < 2 {
        return Err(Error::precondition("half-plane split needs at least 2 features"));
    }
    let n = ds.n() as f64;
    let cx = ds.features.column(0).sum() / n;
    let cy = ds.features.column(1).sum() / n;
    let (nx, ny) = (-angle.sin(), angle.cos());
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (i, row) in ds.features.outer_iter().enumerate() {
        if (row[0] - cx) * nx + (row[1] - cy) * ny > offset {
            pos.push(i);
        } else {
            neg.push(i);
        }
    }
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::precondition("half-plane leaves one client empty"));
    }
    Ok(FederatedPartition {
        p: None,
        m: 2,
        seed: 0,
        client_ids: vec![0, 1],
        client_rows: vec![pos, neg],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectionMask {
    pub connected: Vec<bool>,
    pub rate: f64,
    pub seed: u64,
}

impl ConnectionMask {
    pub fn all_connected(m: usize) -> Self {
        Self {
            connected: vec![true; m],
            rate: 0.0,
            seed: 0,
        }
    }

    pub fn m(&self) -> usize {
        self.connected.len()
    }

    pub fn connected_count(&self) -> usize {
        self.connected.iter().filter(|&&c| c).count()
    }

    /// Clients connected in both masks.
    pub fn intersect(&self, other: &ConnectionMask) -> ConnectionMask {
        ConnectionMask {
            connected: self
                .connected
                .iter()
                .zip(&other.connected)
                .map(|(a, b)| *a && *b)
                .collect(),
            rate: f64::NAN,
            seed: self.seed,
        }
    }
}

/// Number of clients a rate disconnects: `round(rate * m)`, ties to even.
pub fn disconnected_count(m: usize, rate: f64) -> usize {
    (rate * m as f64).round_ties_even() as usize
}

/// Marks exactly `round(rate * m)` clients as disconnected, chosen uniformly
/// without replacement.
pub fn sample_connection_mask(m: usize, rate: f64, seed: u64) -> Result<ConnectionMask> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::Domain(format!("disconnection rate {rate} outside [0, 1]")));
    }
    let drop = disconnected_count(m, rate);
    if drop >= m {
        return Err(Error::precondition(format!(
            "rate {rate} would disconnect all {m} clients"
        )));
    }
    let mut rng = rng::seeded(seed);
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut rng);
    let mut connected = vec![true; m];
    for &i in &order[..drop] {
        connected[i] = false;
    }
    Ok(ConnectionMask {
        connected,
        rate,
        seed,
    })
}

/// Keeps only the clients the mask marks connected.
pub fn restrict(partition: &FederatedPartition, mask: &ConnectionMask) -> Result<FederatedPartition> {
    if mask.m() != partition.m {
        return Err(Error::precondition(format!(
            "mask covers {} clients, partition has {}",
            mask.m(),
            partition.m
        )));
    }
    let (client_ids, client_rows) = partition
        .clients()
        .filter(|(id, _)| mask.connected[*id])
        .map(|(id, rows)| (id, rows.to_vec()))
        .unzip();
    Ok(FederatedPartition {
        client_ids,
        client_rows,
        ..partition.clone()
    })
}
