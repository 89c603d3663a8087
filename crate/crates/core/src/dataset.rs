//! Labeled datasets: CSV ingestion, Gaussian-mixture generators and min-max
//! scaling.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// A feature matrix with optional ground-truth classes.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub name: String,
    /// `n x d`, row-major.
    pub features: Array2<f64>,
    pub labels: Option<Vec<usize>>,
    /// Number of distinct classes; 0 when unlabeled.
    pub k_true: usize,
}

impl LabeledDataset {
    /// Builds a dataset, checking shape, finiteness and label contiguity.
    pub fn new(
        name: impl Into<String>,
        features: Array2<f64>,
        labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        let (n, d) = features.dim();
        if n == 0 || d == 0 {
            return Err(Error::EmptyInput(format!("dataset is {n} x {d}")));
        }
        if let Some((idx, _)) = features.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite feature at row {}, column {}",
                idx / d,
                idx % d
            )));
        }
        let k_true = match &labels {
            None => 0,
            Some(l) => {
                if l.len() != n {
                    return Err(Error::contract(format!(
                        "{} labels for {} rows",
                        l.len(),
                        n
                    )));
                }
                let k = l.iter().max().map_or(0, |m| m + 1);
                let mut seen = vec![false; k];
                l.iter().for_each(|&c| seen[c] = true);
                if seen.iter().any(|s| !s) {
                    return Err(Error::contract("labels are not contiguous from 0"));
                }
                k
            }
        };
        Ok(Self {
            name: name.into(),
            features,
            labels,
            k_true,
        })
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn d(&self) -> usize {
        self.features.ncols()
    }

    pub fn labels(&self) -> Result<&[usize]> {
        self.labels
            .as_deref()
            .ok_or_else(|| Error::precondition(format!("dataset '{}' has no labels", self.name)))
    }

    /// Copies the given rows into a new matrix, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Array2<f64> {
        self.features.select(Axis(0), rows)
    }
}

/// Remaps arbitrary label tokens to `0..k` in order of first appearance.
pub fn remap_labels<T: Eq + std::hash::Hash + Clone>(raw: &[T]) -> Vec<usize> {
    let mut ids: HashMap<T, usize> = HashMap::new();
    raw.iter()
        .map(|t| {
            let next = ids.len();
            *ids.entry(t.clone()).or_insert(next)
        })
        .collect()
}

/// Loads a comma-separated file. A first row whose feature fields do not all
/// parse as numbers is treated as a header.
pub fn load_csv(path: impl AsRef<Path>, label_column: Option<usize>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    let file = std::fs::File::open(path)?;
    load_csv_reader(file, &name, label_column)
}

pub fn load_csv_reader<R: Read>(
    reader: R,
    name: &str,
    label_column: Option<usize>,
) -> Result<LabeledDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut values: Vec<f64> = Vec::new();
    let mut raw_labels: Vec<String> = Vec::new();
    let mut arity: Option<usize> = None;
    let mut rows = 0usize;

    for (idx, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(idx + 1, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(idx + 1, |p| p.line() as usize);
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        if let Some(lc) = label_column {
            if lc >= record.len() {
                return Err(Error::Parse {
                    line,
                    message: format!("label column {lc} missing ({} fields)", record.len()),
                });
            }
        }
        match arity {
            Some(a) if a != record.len() => {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {a} fields, found {}", record.len()),
                })
            }
            _ => {}
        }

        let parsed: Vec<std::result::Result<f64, String>> = record
            .iter()
            .enumerate()
            .filter(|(j, _)| Some(*j) != label_column)
            .map(|(j, field)| {
                field
                    .parse::<f64>()
                    .map_err(|_| format!("column {j}: '{field}' is not a number"))
                    .and_then(|v| {
                        if v.is_finite() {
                            Ok(v)
                        } else {
                            Err(format!("column {j}: non-finite value '{field}'"))
                        }
                    })
            })
            .collect();

        if arity.is_none() {
            arity = Some(record.len());
            if parsed.iter().any(|r| r.is_err()) && rows == 0 {
                // header row
                continue;
            }
        }
        for p in parsed {
            values.push(p.map_err(|message| Error::Parse { line, message })?);
        }
        if let Some(lc) = label_column {
            raw_labels.push(record[lc].to_string());
        }
        rows += 1;
    }

    if rows == 0 {
        return Err(Error::EmptyInput(format!("no data rows in '{name}'")));
    }
    let d = values.len() / rows;
    if d == 0 {
        return Err(Error::EmptyInput(format!("no feature columns in '{name}'")));
    }
    let features = Array2::from_shape_vec((rows, d), values)
        .map_err(|e| Error::contract(e.to_string()))?;
    let labels = label_column.map(|_| remap_labels(&raw_labels));
    LabeledDataset::new(name, features, labels)
}

/// Writes features followed by the label (when present) as the last column,
/// without a header. Floats use shortest round-trip formatting.
pub fn write_csv(ds: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path).map_err(csv_io)?;
    for (i, row) in ds.features.outer_iter().enumerate() {
        let mut fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        if let Some(l) = &ds.labels {
            fields.push(l[i].to_string());
        }
        wtr.write_record(&fields).map_err(csv_io)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes a bare matrix as CSV (used for synthetic-data dumps).
pub fn write_matrix_csv(m: &Array2<f64>, path: impl AsRef<Path>) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path).map_err(csv_io)?;
    for row in m.outer_iter() {
        wtr.write_record(row.iter().map(|v| v.to_string()))
            .map_err(csv_io)?;
    }
    wtr.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// The Pendigits pen-based handwritten digit set (10992 rows, 16 features,
/// 10 classes), bundled with the crate. Labels are remapped in order of first
/// appearance.
pub fn pendigits() -> Result<LabeledDataset> {
    const RAW: &str = include_str!("../data/pendigits.csv");
    load_csv_reader(RAW.as_bytes(), "pendigits", Some(16))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub mean: Vec<f64>,
    /// Per-dimension standard deviation.
    pub std: Vec<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleSize {
    /// Exactly this many rows per component, emitted component by component.
    PerComponent(usize),
    /// This many rows in total, each drawing its component by weight.
    Total(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixtureSpec {
    pub components: Vec<MixtureComponent>,
    pub size: SampleSize,
    pub seed: u64,
}

impl GaussianMixtureSpec {
    /// Equal-weight components with the same isotropic spread.
    pub fn isotropic(means: &[Vec<f64>], std: f64, per_component: usize, seed: u64) -> Self {
        let w = 1.0 / means.len().max(1) as f64;
        Self {
            components: means
                .iter()
                .map(|m| MixtureComponent {
                    mean: m.clone(),
                    std: vec![std; m.len()],
                    weight: w,
                })
                .collect(),
            size: SampleSize::PerComponent(per_component),
            seed,
        }
    }

    pub fn validate(&self) -> Result<usize> {
        let first = self
            .components
            .first()
            .ok_or_else(|| Error::EmptyInput("mixture has no components".into()))?;
        let d = first.mean.len();
        if d == 0 {
            return Err(Error::EmptyInput("mixture components have dimension 0".into()));
        }
        for (j, c) in self.components.iter().enumerate() {
            if c.mean.len() != d || c.std.len() != d {
                return Err(Error::contract(format!("component {j} has wrong dimension")));
            }
            if c.std.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
                return Err(Error::Domain(format!("component {j} has non-positive std")));
            }
            if c.weight.is_nan() || c.weight < 0.0 || c.mean.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain(format!("component {j} has invalid parameters")));
            }
        }
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("weights sum to {total}, expected 1")));
        }
        let n = match self.size {
            SampleSize::PerComponent(s) => s * self.components.len(),
            SampleSize::Total(t) => t,
        };
        if n == 0 {
            return Err(Error::EmptyInput("mixture sample size is 0".into()));
        }
        Ok(d)
    }
}

pub fn generate_gaussian_mixture(spec: &GaussianMixtureSpec) -> Result<LabeledDataset> {
    let d = spec.validate()?;
    let mut rng = rng::seeded(spec.seed);
    let components: Vec<usize> = match spec.size {
        SampleSize::PerComponent(s) => (0..spec.components.len())
            .flat_map(|j| std::iter::repeat_n(j, s))
            .collect(),
        SampleSize::Total(t) => {
            let cumulative: Vec<f64> = spec
                .components
                .iter()
                .scan(0.0, |acc, c| {
                    *acc += c.weight;
                    Some(*acc)
                })
                .collect();
            (0..t)
                .map(|_| {
                    let u: f64 = rng.random::<f64>() * cumulative[cumulative.len() - 1];
                    cumulative
                        .iter()
                        .position(|&c| u < c)
                        .unwrap_or(cumulative.len() - 1)
                })
                .collect()
        }
    };
    let n = components.len();
    let mut features = Array2::<f64>::zeros((n, d));
    for (mut row, &j) in features.outer_iter_mut().zip(&components) {
        let c = &spec.components[j];
        for (v, (mu, sd)) in row.iter_mut().zip(c.mean.iter().zip(&c.std)) {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = mu + sd * z;
        }
    }
    // Labels from `PerComponent` are already contiguous; `Total` draws may
    // skip a zero-weight component, so remap through first appearance of
    // the component order.
    let labels = if matches!(spec.size, SampleSize::PerComponent(_)) {
        components
    } else {
        let present: Vec<usize> = {
            let mut seen = vec![false; spec.components.len()];
            components.iter().for_each(|&j| seen[j] = true);
            let mut map = vec![usize::MAX; spec.components.len()];
            let mut next = 0;
            for (j, s) in seen.iter().enumerate() {
                if *s {
                    map[j] = next;
                    next += 1;
                }
            }
            map
        };
        components.iter().map(|&j| present[j]).collect()
    };
    LabeledDataset::new("gaussian-mixture", features, Some(labels))
}

/// Maps every feature column affinely onto `[0, 1]`; constant columns become 0.
pub fn normalize_minmax(ds: &LabeledDataset) -> LabeledDataset {
    let mut out = ds.clone();
    let (lo, hi) = column_bounds(&ds.features);
    minmax_in_place(&mut out.features, &lo, &hi);
    out
}

/// Per-column minima and maxima.
pub fn column_bounds(x: &Array2<f64>) -> (Vec<f64>, Vec<f64>) {
    let d = x.ncols();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for row in x.outer_iter() {
        for (j, &v) in row.iter().enumerate() {
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
    }
    (lo, hi)
}

pub(crate) fn minmax_in_place(x: &mut Array2<f64>, lo: &[f64], hi: &[f64]) {
    for mut row in x.outer_iter_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            let range = hi[j] - lo[j];
            *v = if range > 0.0 {
                ((*v - lo[j]) / range).clamp(0.0, 1.0)
            } else {
                0.0
            };
        }
    }
}

/// The two-cluster 2D toy: means (-5, 0) and (5, 0), std 0.5, 200 points each.
pub fn toy_two_blobs(seed: u64) -> LabeledDataset {
    let spec = GaussianMixtureSpec::isotropic(&[vec![-5.0, 0.0], vec![5.0, 0.0]], 0.5, 200, seed);
    named(generate_gaussian_mixture(&spec).expect("toy spec is valid"), "toy")
}

/// Four isotropic blobs on the axes at radius 5, std 0.5, 200 points each.
pub fn toy_four_blobs(seed: u64) -> LabeledDataset {
    let means = [
        vec![5.0, 0.0],
        vec![0.0, 5.0],
        vec![-5.0, 0.0],
        vec![0.0, -5.0],
    ];
    let spec = GaussianMixtureSpec::isotropic(&means, 0.5, 200, seed);
    named(generate_gaussian_mixture(&spec).expect("toy spec is valid"), "toy4")
}

/// Two tall blobs at (-3, 0) and (3, 0) with std (0.5, 3), 200 points each.
///
/// Paired with [`crate::partition::split_by_halfplane`] along an oblique
/// line this reproduces the situation where each client sees a wedge of
/// both clusters and local k-means centroids no longer summarize the
/// global structure.
pub fn toy_elongated_blobs(seed: u64) -> LabeledDataset {
    let comp = |x: f64| MixtureComponent {
        mean: vec![x, 0.0],
        std: vec![0.5, 3.0],
        weight: 0.5,
    };
    let spec = GaussianMixtureSpec {
        components: vec![comp(-3.0), comp(3.0)],
        size: SampleSize::PerComponent(200),
        seed,
    };
    named(generate_gaussian_mixture(&spec).expect("toy spec is valid"), "toy-split")
}

fn named(mut ds: LabeledDataset, name: &str) -> LabeledDataset {
    ds.name = name.into();
    ds
}

/// Draws one row with independent normal coordinates.
pub(crate) fn sample_diag_gaussian<R: Rng>(rng: &mut R, mean: &[f64], std: &[f64]) -> Vec<f64> {
    mean.iter()
        .zip(std)
        .map(|(&m, &s)| Normal::new(m, s).map_or(m, |dist| dist.sample(rng)))
        .collect()
}
