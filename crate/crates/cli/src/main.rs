//! `sdafc`: run federated clustering experiment grids and summarize results.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use sdafc::federation::Method;
use sdafc::harness::{
    emit_failure_curve, run_grid, summarize, write_failure_curve, ExperimentConfig, RunResult,
};

#[derive(Parser)]
#[command(name = "sdafc", version, about = "Federated clustering experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a methods x p x rates x seeds grid.
    Run(RunArgs),
    /// Print mean NMI/Kappa tables with family win counts.
    Summarize {
        /// Results CSV written by `run`.
        results: PathBuf,
    },
    /// Mean NMI/Kappa per disconnection rate, as CSV.
    FailureCurve {
        results: PathBuf,
        #[arg(long)]
        dataset: String,
        #[arg(long)]
        method: Method,
        /// Only use runs at this non-IID level.
        #[arg(long)]
        p: Option<f64>,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// toy, toy4, toy-split, pendigits, or a CSV path.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    rates: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    fuzzy_degree: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    parallel_clients: bool,
    /// Write each SDA-FC run's synthetic dataset under `<out>/synthetic`.
    #[arg(long)]
    dump_synthetic: bool,
    /// Write each run's centroids, assignment and trace under `<out>/runs`.
    #[arg(long)]
    save_runs: bool,
}

impl RunArgs {
    fn into_config(self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)
                .with_context(|| format!("reading config {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.dataset {
            cfg.dataset = v;
        }
        if let Some(v) = self.methods {
            cfg.methods = v;
        }
        if let Some(v) = self.p {
            cfg.p = v;
        }
        if let Some(v) = self.rates {
            cfg.rates = v;
        }
        if let Some(v) = self.seeds {
            cfg.seeds = v;
        }
        if self.k.is_some() {
            cfg.k = self.k;
        }
        if self.m.is_some() {
            cfg.m = self.m;
        }
        if let Some(v) = self.fuzzy_degree {
            cfg.fuzzy_degree = v;
        }
        if let Some(v) = self.out {
            cfg.out = v;
        }
        cfg.protocol.parallel_clients |= self.parallel_clients;
        cfg.dump_synthetic |= self.dump_synthetic;
        cfg.save_runs |= self.save_runs;
        Ok(cfg)
    }
}

fn print_row(r: &RunResult) {
    let metric = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
    let status = if r.is_ok() { String::new() } else { format!("  error: {}", r.error) };
    println!(
        "{:<11} p={:<5} rate={:<5} seed={:<3} nmi={} kappa={} {:.1}s{}",
        r.method.name(),
        r.p,
        r.rate,
        r.seed,
        metric(r.nmi),
        metric(r.kappa),
        r.wall_time_s,
        status
    );
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => {
            let cfg = args.into_config()?;
            let rows = run_grid(&cfg)?;
            rows.iter().for_each(print_row);
            let results = cfg.out.join("results.csv");
            println!("\n{}", summarize(&results)?);
            println!("results written to {}", results.display());
        }
        Command::Summarize { results } => print!("{}", summarize(&results)?),
        Command::FailureCurve {
            results,
            dataset,
            method,
            p,
            out,
        } => {
            let points = emit_failure_curve(&results, &dataset, method, p)?;
            match out {
                Some(path) => write_failure_curve(&points, &path)?,
                None => {
                    println!("rate,mean_nmi,mean_kappa,runs");
                    for pt in points {
                        println!("{},{},{},{}", pt.rate, pt.mean_nmi, pt.mean_kappa, pt.runs);
                    }
                }
            }
        }
    }
    Ok(())
}
