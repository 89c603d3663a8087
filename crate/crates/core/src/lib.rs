//! Simulation framework for one-round federated clustering.
//!
//! Clients train small generative models on their private rows, the server
//! clusters the merged synthetic data and broadcasts centroids, and every
//! client labels its own rows by cosine proximity to those centroids. The
//! crate also carries the centroid-upload baselines (k-FED, FFCM), the
//! centralized references, a non-IID partitioner with device-failure
//! masks, NMI/Kappa evaluation, and a seeded experiment-grid harness.
//!
//! Module map:
//!
//! - [`dataset`]: CSV ingestion, Gaussian-mixture generators, min-max scaling.
//! - [`partition`]: non-IID client partitions and disconnection masks.
//! - [`clustering`]: k-means++, Lloyd k-means, fuzzy c-means, assignment rules.
//! - [`synthesis`]: MLP, manual backprop, Adam, GAN training, GMM sampler.
//! - [`federation`]: protocol orchestration and traces.
//! - [`metrics`]: contingency tables, NMI, matched Cohen's kappa, Hungarian.
//! - [`harness`]: experiment configs, grids, result CSVs, summaries.

pub mod clustering;
pub mod dataset;
pub mod error;
pub mod federation;
pub mod harness;
pub mod metrics;
pub mod partition;
pub mod rng;
pub mod synthesis;

pub use error::{Error, Result};
