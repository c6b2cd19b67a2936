//! `bobbm` — command-line laboratory for the truncated Benjamin-Ono-BBM flow.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bobbm::config::{ExperimentConfig, ExperimentKind};
use bobbm::runner::run_experiment;

#[derive(Parser)]
#[command(name = "bobbm", version, about = "Spectral dynamics, Gaussian ensembles and transported-density experiments for the periodic BO-BBM equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Flat key-value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed for all random streams.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path prefix (`<out>.jsonl`, `<out>.csv`, `<out>.svg`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (results do not depend on this).
    #[arg(long)]
    threads: Option<usize>,
    /// Emit an SVG plot alongside the CSV summary.
    #[arg(long)]
    plot: bool,
    /// Gaussian regularity parameter s.
    #[arg(long)]
    s: Option<f64>,
    /// Frequency cutoff N.
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated cutoff sweep, e.g. 64,128,256.
    #[arg(long)]
    n_list: Option<String>,
    /// Model time t.
    #[arg(long)]
    t: Option<f64>,
    /// Monte Carlo sample count.
    #[arg(long)]
    samples: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory and report conservation diagnostics.
    Simulate(Common),
    /// Exact Wick second-moment sweeps over the cutoff.
    QiScan(Common),
    /// Transported-density L^p norms with a direct ball-mass cross-check.
    Density(Common),
    /// Exponential moments of the energy derivative on the energy ball.
    ExpMoment(Common),
    /// Integrability-exponent schedule tables.
    Exponents(Common),
    /// Run the structural invariant suite (one PASS/FAIL line per check).
    Validate(Common),
}

impl Command {
    fn kind(&self) -> ExperimentKind {
        match self {
            Command::Simulate(_) => ExperimentKind::Simulate,
            Command::QiScan(_) => ExperimentKind::QiScan,
            Command::Density(_) => ExperimentKind::Density,
            Command::ExpMoment(_) => ExperimentKind::ExpMoment,
            Command::Exponents(_) => ExperimentKind::Exponents,
            Command::Validate(_) => ExperimentKind::Validate,
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Simulate(c)
            | Command::QiScan(c)
            | Command::Density(c)
            | Command::ExpMoment(c)
            | Command::Exponents(c)
            | Command::Validate(c) => c,
        }
    }
}

fn build_config(kind: ExperimentKind, common: &Common) -> bobbm::Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let cfg = ExperimentConfig::parse(&text)?;
            if cfg.kind != kind {
                return Err(bobbm::Error::InvalidParam(format!(
                    "config kind `{}` does not match subcommand `{kind}`",
                    cfg.kind
                )));
            }
            cfg
        }
        None => ExperimentConfig::default_for(kind),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out = Some(out.clone());
    }
    if common.plot {
        cfg.plot = true;
    }
    if let Some(s) = common.s {
        cfg.s = s;
    }
    if let Some(n) = common.n {
        cfg.n = n;
    }
    if let Some(list) = &common.n_list {
        let parsed: Result<Vec<usize>, _> = list.split(',').map(|v| v.trim().parse()).collect();
        cfg.n_list = Some(parsed.map_err(|_| {
            bobbm::Error::ConfigParse(format!("bad n_list `{list}`"))
        })?);
    }
    if let Some(t) = common.t {
        cfg.t = t;
    }
    if let Some(samples) = common.samples {
        cfg.samples = samples;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run() -> bobbm::Result<()> {
    let cli = Cli::parse();
    let common = cli.command.common().clone();
    if let Some(threads) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| bobbm::Error::InvalidParam(format!("thread pool: {e}")))?;
    }
    let cfg = build_config(cli.command.kind(), &common)?;
    let record = run_experiment(&cfg)?;
    println!("kind: {}", cfg.kind);
    println!("seed: {}", record.seed);
    for est in &record.estimates {
        if est.estimate.std_error > 0.0 {
            println!(
                "{:>28}: {:.6e} ± {:.2e}  (n = {})",
                est.name, est.estimate.value, est.estimate.std_error, est.estimate.samples
            );
        } else {
            println!("{:>28}: {:.6e}", est.name, est.estimate.value);
        }
    }
    if let Some(ms) = record.timings_ms.get("total") {
        println!("elapsed: {:.1} ms", ms);
    }
    if let Some(out) = &cfg.out {
        println!("records appended to {}.jsonl", out.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
