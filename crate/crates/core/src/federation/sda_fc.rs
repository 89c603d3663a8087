//! Synthetic-data-aided federated clustering.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{
    broadcast_and_assign, connected_clients, for_each_client, participation, vstack, ClientUpload,
    Method, MethodResult, Payload, ProtocolOptions, ProtocolTrace, SynthesizerKind,
};
use crate::clustering::{fcm_best_of, kmeans_best_of};
use crate::dataset::{column_bounds, minmax_in_place, LabeledDataset};
use crate::error::{Error, Result};
use crate::partition::{ConnectionMask, FederatedPartition};
use crate::rng::{derive_seed, stream};
use crate::synthesis::{fit_gmm_synthesizer, train_local_gan, GanConfig, Synthesizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdaVariant {
    Km,
    Fcm,
}

/// Client side: fit a synthesizer on the local rows.
///
/// The GAN trains on the client's rows scaled to `[0, 1]` with the
/// client's own column bounds; the inverse map is folded into the uploaded
/// generator.
fn client_synthesizer(
    x: &Array2<f64>,
    kind: SynthesizerKind,
    gan_cfg: &GanConfig,
    k: usize,
    seed: u64,
) -> Result<Synthesizer> {
    match kind {
        SynthesizerKind::Gan => {
            let (lo, hi) = column_bounds(x);
            let mut scaled = x.clone();
            minmax_in_place(&mut scaled, &lo, &hi);
            let cfg = GanConfig {
                seed,
                ..gan_cfg.clone()
            };
            let gen = train_local_gan(scaled.view(), &cfg)?;
            let scale: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| h - l).collect();
            Ok(Synthesizer::Gan(gen.with_output_affine(&scale, &lo)?))
        }
        SynthesizerKind::Gmm => Ok(Synthesizer::Gmm(fit_gmm_synthesizer(
            x.view(),
            k.min(x.nrows()),
            seed,
        )?)),
    }
}

/// Runs the protocol over the clients `mask` keeps connected.
///
/// Client `c` trains with seed `derive(seed, CLIENT_TRAIN, c)` and the
/// server samples its generator with `derive(seed, CLIENT_SAMPLE, c)`.
/// `gan_cfg.seed` is ignored in favor of these per-client seeds.
#[allow(clippy::too_many_arguments)]
pub fn run_sda_fc(
    ds: &LabeledDataset,
    partition: &FederatedPartition,
    mask: &ConnectionMask,
    variant: SdaVariant,
    gan_cfg: &GanConfig,
    k: usize,
    seed: u64,
    opts: &ProtocolOptions,
) -> Result<MethodResult> {
    if k == 0 {
        return Err(Error::precondition("k must be at least 1"));
    }
    let connected = connected_clients(ds, partition, mask)?;
    let d = ds.d();

    let mut uploads = for_each_client(&connected, opts.parallel_clients, |id, rows| {
        let x = ds.select_rows(rows);
        let s = derive_seed(seed, &[stream::CLIENT_TRAIN, id as u64]);
        let synthesizer = client_synthesizer(&x, opts.synthesizer, gan_cfg, k, s)?;
        Ok(ClientUpload {
            client_id: id,
            payload: Payload::Synthesizer {
                synthesizer,
                local_size: rows.len(),
            },
        })
    })?;

    // Server: everything below sees only the uploads.
    uploads.sort_by_key(|u| u.client_id);
    let mut blocks = Vec::with_capacity(uploads.len());
    for u in &uploads {
        u.validate(d)?;
        let Payload::Synthesizer {
            synthesizer,
            local_size,
        } = &u.payload
        else {
            return Err(Error::contract("expected a synthesizer upload"));
        };
        let s = derive_seed(seed, &[stream::CLIENT_SAMPLE, u.client_id as u64]);
        blocks.push(synthesizer.sample(*local_size, s)?);
    }
    let synthetic = vstack(&blocks, d);
    let server_seed = derive_seed(seed, &[stream::SERVER]);
    let model = match variant {
        SdaVariant::Km => kmeans_best_of(synthetic.view(), k, server_seed, &opts.kmeans())?.model,
        SdaVariant::Fcm => {
            fcm_best_of(synthetic.view(), k, server_seed, &opts.fcm(opts.fuzzy_degree))?.model
        }
    };

    let (rows, assignment) = broadcast_and_assign(ds, &connected, &model, opts.parallel_clients)?;
    Ok(MethodResult {
        method: match variant {
            SdaVariant::Km => Method::SdaFcKm,
            SdaVariant::Fcm => Method::SdaFcFcm,
        },
        rows,
        assignment,
        centroids: model,
        synthetic_data: Some(synthetic),
        trace: ProtocolTrace {
            uploads_count: uploads.len(),
            broadcasts_count: 1,
            participation: participation(&connected),
            degraded_clients: Vec::new(),
            server_k: k,
        },
        uploads,
    })
}
