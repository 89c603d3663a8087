//! Experiment grids: config, execution, result rows and summaries.
//!
//! A grid is the Cartesian product methods × p × rates × seeds. For each
//! cell the partition is derived from `(seed, p)` and the connection mask
//! from `(seed, rate)`, so cells that share a `p` share a partition and
//! cells that share a rate share a mask. Failed cells become rows with an
//! error string; the grid keeps going.

mod report;

pub use report::{
    emit_failure_curve, read_results, render_summary, summarize, summarize_rows, write_failure_curve,
    write_results, CountEntry, CurvePoint, Summary, SummaryCell, FAMILIES,
};

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::{
    self, load_csv, pendigits, remap_labels, toy_elongated_blobs, toy_four_blobs, toy_two_blobs,
    LabeledDataset,
};
use crate::error::{Error, Result};
use crate::federation::{
    run_centralized, run_ffcm, run_kfed, run_oracle, run_sda_fc, CentralVariant, Method,
    MethodResult, ProtocolOptions, SdaVariant,
};
use crate::metrics::evaluate;
use crate::partition::{partition_noniid, sample_connection_mask, split_by_halfplane, FederatedPartition};
use crate::rng::{derive_seed, stream};
use crate::synthesis::GanConfig;

/// How client partitions are formed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PartitionScheme {
    /// Label-skewed split at each grid `p` over `m` clients.
    #[default]
    NonIid,
    /// Two clients split by a line through the data mean; `p` is ignored.
    HalfPlane { angle: f64, offset: f64 },
}

/// Optional replacements for the default GAN settings.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GanOverrides {
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub adam_beta1: Option<f64>,
    pub adam_beta2: Option<f64>,
    pub batch_size: Option<usize>,
    pub noise_dim: Option<usize>,
    pub generator_hidden: Option<Vec<usize>>,
    pub discriminator_hidden: Option<Vec<usize>>,
    pub generator_steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `toy`, `toy4`, `toy-split`, `pendigits`, or a CSV path.
    pub dataset: String,
    /// Label column for CSV datasets; the last column when absent.
    pub label_column: Option<usize>,
    pub methods: Vec<Method>,
    pub p: Vec<f64>,
    pub rates: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Cluster count; the dataset's class count when absent.
    pub k: Option<usize>,
    /// Client count; `k` when absent.
    pub m: Option<usize>,
    pub fuzzy_degree: f64,
    pub partition_scheme: PartitionScheme,
    pub gan: GanOverrides,
    pub protocol: ProtocolOptions,
    pub out: PathBuf,
    pub dump_synthetic: bool,
    pub save_runs: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: "toy".into(),
            label_column: None,
            methods: vec![Method::SdaFcKm, Method::KFed, Method::KmCentral],
            p: vec![0.0, 0.5, 1.0],
            rates: vec![0.0],
            seeds: vec![0, 1, 2],
            k: None,
            m: None,
            fuzzy_degree: 1.1,
            partition_scheme: PartitionScheme::NonIid,
            gan: GanOverrides::default(),
            protocol: ProtocolOptions::default(),
            out: PathBuf::from("results"),
            dump_synthetic: false,
            save_runs: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() || self.p.is_empty() || self.rates.is_empty() || self.seeds.is_empty() {
            return Err(Error::precondition("methods, p, rates and seeds must be non-empty"));
        }
        for &v in self.p.iter().chain(&self.rates) {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Domain(format!("grid value {v} outside [0, 1]")));
            }
        }
        if self.k == Some(0) || self.m == Some(0) {
            return Err(Error::precondition("k and m must be at least 1"));
        }
        if self.fuzzy_degree.is_nan() || self.fuzzy_degree <= 1.0 {
            return Err(Error::precondition("fuzzy degree must exceed 1"));
        }
        Ok(())
    }

    /// Loads the dataset for one seed. Generated datasets depend on the seed.
    pub fn load_dataset(&self, seed: u64) -> Result<LabeledDataset> {
        match self.dataset.as_str() {
            "toy" => Ok(toy_two_blobs(seed)),
            "toy4" => Ok(toy_four_blobs(seed)),
            "toy-split" => Ok(toy_elongated_blobs(seed)),
            "pendigits" => pendigits(),
            path => match self.label_column {
                Some(c) => load_csv(path, Some(c)),
                None => last_column_as_labels(load_csv(path, None)?),
            },
        }
    }

    /// Whether the dataset differs between seeds.
    fn dataset_depends_on_seed(&self) -> bool {
        matches!(self.dataset.as_str(), "toy" | "toy4" | "toy-split")
    }

    pub fn resolved_k(&self, ds: &LabeledDataset) -> usize {
        self.k.unwrap_or(ds.k_true)
    }

    pub fn resolved_m(&self, ds: &LabeledDataset) -> usize {
        match self.partition_scheme {
            PartitionScheme::HalfPlane { .. } => 2,
            PartitionScheme::NonIid => self.m.unwrap_or_else(|| self.resolved_k(ds)),
        }
    }

    /// Default GAN settings for this dataset with overrides applied.
    ///
    /// Pendigits trains for 200 epochs by default, everything else 500.
    pub fn gan_config(&self, k: usize, d: usize) -> GanConfig {
        let mut cfg = GanConfig::defaults(k, d);
        cfg.epochs = if self.dataset == "pendigits" { 200 } else { 500 };
        let o = &self.gan;
        if let Some(v) = o.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = o.learning_rate {
            cfg.learning_rate = v;
        }
        if let Some(v) = o.adam_beta1 {
            cfg.adam_beta1 = v;
        }
        if let Some(v) = o.adam_beta2 {
            cfg.adam_beta2 = v;
        }
        if let Some(v) = o.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = o.noise_dim {
            cfg.latent.noise_dim = v;
        }
        if let Some(v) = &o.generator_hidden {
            cfg.generator_hidden = v.clone();
        }
        if let Some(v) = &o.discriminator_hidden {
            cfg.discriminator_hidden = v.clone();
        }
        if let Some(v) = o.generator_steps {
            cfg.generator_steps = v;
        }
        cfg
    }

    fn protocol_options(&self) -> ProtocolOptions {
        ProtocolOptions {
            fuzzy_degree: self.fuzzy_degree,
            ..self.protocol.clone()
        }
    }
}

fn last_column_as_labels(ds: LabeledDataset) -> Result<LabeledDataset> {
    let d = ds.d();
    if d < 2 {
        return Err(Error::precondition("CSV needs a feature column besides the label"));
    }
    let raw: Vec<u64> = ds.features.column(d - 1).iter().map(|v| v.to_bits()).collect();
    let features = ds.features.slice(ndarray::s![.., ..d - 1]).to_owned();
    LabeledDataset::new(ds.name, features, Some(remap_labels(&raw)))
}

/// One grid position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub method: Method,
    pub p: f64,
    pub rate: f64,
    pub seed: u64,
}

/// One row of the results CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub dataset: String,
    pub method: Method,
    pub p: f64,
    pub rate: f64,
    pub seed: u64,
    pub k: usize,
    pub m: usize,
    pub fuzzy_degree: f64,
    pub nmi: Option<f64>,
    pub kappa: Option<f64>,
    pub wall_time_s: f64,
    pub uploads: usize,
    pub broadcasts: usize,
    pub error: String,
}

impl RunResult {
    pub fn is_ok(&self) -> bool {
        self.error.is_empty()
    }
}

/// Cells in canonical order: seed, then p, then rate, then method as listed.
pub fn grid_cells(cfg: &ExperimentConfig) -> Vec<GridCell> {
    let mut cells = Vec::new();
    for &seed in &cfg.seeds {
        for &p in &cfg.p {
            for &rate in &cfg.rates {
                for &method in &cfg.methods {
                    cells.push(GridCell { method, p, rate, seed });
                }
            }
        }
    }
    cells
}

pub fn partition_seed(seed: u64, p: f64) -> u64 {
    derive_seed(seed, &[stream::PARTITION, p.to_bits()])
}

pub fn mask_seed(seed: u64, rate: f64) -> u64 {
    derive_seed(seed, &[stream::MASK, rate.to_bits()])
}

fn make_partition(cfg: &ExperimentConfig, ds: &LabeledDataset, cell: &GridCell) -> Result<FederatedPartition> {
    match cfg.partition_scheme {
        PartitionScheme::NonIid => {
            partition_noniid(ds, cell.p, cfg.resolved_m(ds), partition_seed(cell.seed, cell.p))
        }
        PartitionScheme::HalfPlane { angle, offset } => split_by_halfplane(ds, angle, offset),
    }
}

/// Runs one cell's method and returns the protocol output.
pub fn run_method(cfg: &ExperimentConfig, ds: &LabeledDataset, cell: &GridCell) -> Result<MethodResult> {
    let k = cfg.resolved_k(ds);
    let opts = cfg.protocol_options();
    if !cell.method.is_federated() {
        return match cell.method {
            Method::KmCentral => run_centralized(ds, CentralVariant::Km, k, cell.seed, &opts),
            Method::FcmCentral => run_centralized(ds, CentralVariant::Fcm, k, cell.seed, &opts),
            _ => run_oracle(ds, k, cell.seed),
        };
    }
    let partition = make_partition(cfg, ds, cell)?;
    let mask = sample_connection_mask(partition.m, cell.rate, mask_seed(cell.seed, cell.rate))?;
    let k_local = opts.k_local.unwrap_or(k);
    match cell.method {
        Method::SdaFcKm | Method::SdaFcFcm => {
            let variant = if cell.method == Method::SdaFcKm {
                SdaVariant::Km
            } else {
                SdaVariant::Fcm
            };
            let gan = cfg.gan_config(k, ds.d());
            run_sda_fc(ds, &partition, &mask, variant, &gan, k, cell.seed, &opts)
        }
        Method::KFed => run_kfed(ds, &partition, &mask, k, k_local, cell.seed, &opts),
        _ => run_ffcm(ds, &partition, &mask, k, cfg.fuzzy_degree, cell.seed, &opts),
    }
}

/// Runs and scores one cell. Errors are captured in the row.
pub fn run_single(cfg: &ExperimentConfig, ds: &LabeledDataset, cell: &GridCell) -> (RunResult, Option<MethodResult>) {
    let k = cfg.resolved_k(ds);
    let mut row = RunResult {
        dataset: cfg.dataset.clone(),
        method: cell.method,
        p: cell.p,
        rate: cell.rate,
        seed: cell.seed,
        k,
        m: if cell.method.is_federated() { cfg.resolved_m(ds) } else { 1 },
        fuzzy_degree: cfg.fuzzy_degree,
        nmi: None,
        kappa: None,
        wall_time_s: 0.0,
        uploads: 0,
        broadcasts: 0,
        error: String::new(),
    };
    let start = Instant::now();
    let outcome = run_method(cfg, ds, cell).and_then(|r| {
        let report = evaluate(&r.true_labels(ds)?, &r.assignment.labels)?;
        Ok((r, report))
    });
    row.wall_time_s = start.elapsed().as_secs_f64();
    match outcome {
        Ok((r, report)) => {
            row.nmi = Some(report.nmi);
            row.kappa = Some(report.kappa);
            row.uploads = r.trace.uploads_count;
            row.broadcasts = r.trace.broadcasts_count;
            (row, Some(r))
        }
        Err(e) => {
            row.error = e.to_string();
            (row, None)
        }
    }
}

/// Everything `run_grid` writes next to the results, echoing resolved values.
#[derive(Debug, Clone, Serialize)]
struct ConfigEcho<'a> {
    config: &'a ExperimentConfig,
    resolved_k: usize,
    resolved_m: usize,
    resolved_gan: GanConfig,
    seeds_per_cell: usize,
}

/// Runs the whole grid, writing `results.csv` and `config.json` under
/// `cfg.out`, plus synthetic dumps and per-run JSON when enabled.
pub fn run_grid(cfg: &ExperimentConfig) -> Result<Vec<RunResult>> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out)?;
    let mut cached: Option<(u64, LabeledDataset)> = None;
    let mut rows = Vec::new();
    for cell in grid_cells(cfg) {
        let reuse = matches!(&cached, Some((s, _)) if *s == cell.seed || !cfg.dataset_depends_on_seed());
        if !reuse {
            cached = Some((cell.seed, cfg.load_dataset(cell.seed)?));
        }
        let ds = &cached.as_ref().expect("dataset loaded").1;
        let (row, result) = run_single(cfg, ds, &cell);
        if let Some(r) = &result {
            let stem = format!(
                "{}_{}_p{}_r{}_s{}",
                sanitize(&cfg.dataset),
                cell.method,
                cell.p,
                cell.rate,
                cell.seed
            );
            if cfg.dump_synthetic {
                if let Some(x) = &r.synthetic_data {
                    let dir = cfg.out.join("synthetic");
                    std::fs::create_dir_all(&dir)?;
                    dataset::write_matrix_csv(x, dir.join(format!("{stem}.csv")))?;
                }
            }
            if cfg.save_runs {
                let dir = cfg.out.join("runs");
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join(format!("{stem}.json")), r.to_json()?)?;
            }
        }
        rows.push(row);
    }
    write_results(&rows, cfg.out.join("results.csv"))?;
    let ds = cached.map(|(_, d)| d).ok_or_else(|| Error::precondition("empty grid"))?;
    let k = cfg.resolved_k(&ds);
    let echo = ConfigEcho {
        config: cfg,
        resolved_k: k,
        resolved_m: cfg.resolved_m(&ds),
        resolved_gan: cfg.gan_config(k, ds.d()),
        seeds_per_cell: cfg.seeds.len(),
    };
    std::fs::write(cfg.out.join("config.json"), serde_json::to_string_pretty(&echo)?)?;
    Ok(rows)
}

fn sanitize(name: &str) -> String {
    Path::new(name)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| name.to_string())
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}
