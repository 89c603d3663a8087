//! Results CSV I/O, summary tables and failure curves.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::RunResult;
use crate::error::{Error, Result};
use crate::federation::Method;

/// Same-family rivals compared by the count row: each SDA-FC variant
/// against the centroid-upload baseline built on the same clustering.
pub const FAMILIES: [(Method, Method); 2] = [(Method::SdaFcKm, Method::KFed), (Method::SdaFcFcm, Method::Ffcm)];

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    let message = e.to_string();
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        _ => Error::Parse { line, message },
    }
}

pub fn write_results(rows: &[RunResult], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<RunResult>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        rows.push(rec.map_err(csv_err)?);
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("results file has no rows".into()));
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryCell {
    pub dataset: String,
    pub method: Method,
    pub p: f64,
    pub mean_nmi: f64,
    pub mean_kappa: f64,
    /// Successful runs averaged into the cell.
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountEntry {
    pub dataset: String,
    pub metric: &'static str,
    pub method: Method,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub cells: Vec<SummaryCell>,
    pub counts: Vec<CountEntry>,
}

/// `(dataset, method, p)`, ordered for display.
type CellKey = (String, Method, OrderedP);

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrderedP(f64);

impl Eq for OrderedP {}

impl PartialOrd for OrderedP {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrderedP {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Mean metrics per `(dataset, method, p)` over successful runs, and
/// per-family win counts over the `p` cells both rivals have.
pub fn summarize_rows(rows: &[RunResult]) -> Summary {
    let mut acc: BTreeMap<CellKey, (f64, f64, usize)> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.is_ok()) {
        let (Some(nmi), Some(kappa)) = (r.nmi, r.kappa) else { continue };
        let e = acc
            .entry((r.dataset.clone(), r.method, OrderedP(r.p)))
            .or_insert((0.0, 0.0, 0));
        e.0 += nmi;
        e.1 += kappa;
        e.2 += 1;
    }
    let cells: Vec<SummaryCell> = acc
        .into_iter()
        .map(|((dataset, method, p), (nmi, kappa, runs))| SummaryCell {
            dataset,
            method,
            p: p.0,
            mean_nmi: nmi / runs as f64,
            mean_kappa: kappa / runs as f64,
            runs,
        })
        .collect();

    let mut counts = Vec::new();
    let mut datasets: Vec<&str> = cells.iter().map(|c| c.dataset.as_str()).collect();
    datasets.dedup();
    for ds in datasets {
        for metric in ["nmi", "kappa"] {
            for (a, b) in FAMILIES {
                let lookup = |m: Method| -> BTreeMap<OrderedP, f64> {
                    cells
                        .iter()
                        .filter(|c| c.dataset == ds && c.method == m)
                        .map(|c| (OrderedP(c.p), if metric == "nmi" { c.mean_nmi } else { c.mean_kappa }))
                        .collect()
                };
                let (va, vb) = (lookup(a), lookup(b));
                if va.is_empty() || vb.is_empty() {
                    continue;
                }
                let (mut wa, mut wb) = (0, 0);
                for (p, x) in &va {
                    if let Some(y) = vb.get(p) {
                        if x > y {
                            wa += 1;
                        } else if y > x {
                            wb += 1;
                        }
                    }
                }
                for (method, count) in [(a, wa), (b, wb)] {
                    counts.push(CountEntry {
                        dataset: ds.to_string(),
                        metric,
                        method,
                        count,
                    });
                }
            }
        }
    }
    Summary { cells, counts }
}

/// Plain-text tables: one NMI and one Kappa table per dataset, methods as
/// rows, `p` as columns, followed by the count row.
pub fn render_summary(s: &Summary) -> String {
    let mut out = String::new();
    let mut datasets: Vec<&str> = s.cells.iter().map(|c| c.dataset.as_str()).collect();
    datasets.dedup();
    for ds in datasets {
        let cells: Vec<&SummaryCell> = s.cells.iter().filter(|c| c.dataset == ds).collect();
        let mut ps: Vec<f64> = cells.iter().map(|c| c.p).collect();
        ps.sort_by(f64::total_cmp);
        ps.dedup();
        let methods: Vec<Method> = Method::ALL
            .into_iter()
            .filter(|m| cells.iter().any(|c| c.method == *m))
            .collect();
        let runs: Vec<usize> = cells.iter().map(|c| c.runs).collect();
        let (lo, hi) = (runs.iter().min().copied().unwrap_or(0), runs.iter().max().copied().unwrap_or(0));
        for metric in ["nmi", "kappa"] {
            let seeds = if lo == hi { format!("{lo}") } else { format!("{lo}-{hi}") };
            let _ = writeln!(out, "{ds} {metric} (mean over {seeds} runs per cell)");
            let _ = write!(out, "{:<12}", "method");
            for p in &ps {
                let _ = write!(out, " {:>8}", format!("p={p}"));
            }
            out.push('\n');
            for m in &methods {
                let _ = write!(out, "{:<12}", m.name());
                for p in &ps {
                    match cells.iter().find(|c| c.method == *m && c.p == *p) {
                        Some(c) => {
                            let v = if metric == "nmi" { c.mean_nmi } else { c.mean_kappa };
                            let _ = write!(out, " {v:>8.4}");
                        }
                        None => {
                            let _ = write!(out, " {:>8}", "-");
                        }
                    }
                }
                out.push('\n');
            }
            let counts: Vec<String> = s
                .counts
                .iter()
                .filter(|c| c.dataset == ds && c.metric == metric)
                .map(|c| format!("{}={}", c.method, c.count))
                .collect();
            if !counts.is_empty() {
                let _ = writeln!(out, "{:<12} {}", "count", counts.join(" "));
            }
            out.push('\n');
        }
    }
    out
}

/// Reads a results CSV and renders its summary tables.
pub fn summarize(results_csv: impl AsRef<Path>) -> Result<String> {
    Ok(render_summary(&summarize_rows(&read_results(results_csv)?)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub rate: f64,
    pub mean_nmi: f64,
    pub mean_kappa: f64,
    pub runs: usize,
}

/// Mean NMI and Kappa per disconnection rate for one dataset and method,
/// optionally restricted to one `p`. Failed runs are skipped.
pub fn emit_failure_curve(
    results_csv: impl AsRef<Path>,
    dataset: &str,
    method: Method,
    p: Option<f64>,
) -> Result<Vec<CurvePoint>> {
    let rows = read_results(results_csv)?;
    let mut acc: BTreeMap<OrderedP, (f64, f64, usize)> = BTreeMap::new();
    for r in rows.iter().filter(|r| {
        r.is_ok() && r.dataset == dataset && r.method == method && p.is_none_or(|p| r.p == p)
    }) {
        let (Some(nmi), Some(kappa)) = (r.nmi, r.kappa) else { continue };
        let e = acc.entry(OrderedP(r.rate)).or_insert((0.0, 0.0, 0));
        e.0 += nmi;
        e.1 += kappa;
        e.2 += 1;
    }
    if acc.is_empty() {
        return Err(Error::EmptySelection(format!("no successful {method} rows for {dataset}")));
    }
    if acc.len() < 2 {
        return Err(Error::precondition("a failure curve needs at least two distinct rates"));
    }
    Ok(acc
        .into_iter()
        .map(|(rate, (nmi, kappa, runs))| CurvePoint {
            rate: rate.0,
            mean_nmi: nmi / runs as f64,
            mean_kappa: kappa / runs as f64,
            runs,
        })
        .collect())
}

pub fn write_failure_curve(points: &[CurvePoint], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for p in points {
        w.serialize(p).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
