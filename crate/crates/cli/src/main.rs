use anyhow::{anyhow, Context, Result};
use avoidwalk::{run_experiment, Experiment, ExperimentConfig};
use clap::Parser;
use std::path::PathBuf;
use std::process::ExitCode;

/// Random walks avoiding bounded sets: run a named experiment and write a
/// JSON report plus CSV tables.
#[derive(Parser, Debug)]
#[command(name = "avoidwalk", version)]
struct Cli {
    /// Experiment to run; optional when --config names one.
    #[arg(value_enum)]
    experiment: Option<Experiment>,
    /// Step law, e.g. `srw`, `tent`, `gauss` or `lattice: -1:1/2, 1:1/2`.
    #[arg(long)]
    law: Option<String>,
    /// Avoided set, e.g. `points{0}` or `interval(-3,3)`.
    #[arg(long)]
    set: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    x: Option<f64>,
    #[arg(long)]
    n: Option<u64>,
    /// Comma-separated horizons.
    #[arg(long, value_delimiter = ',')]
    n_grid: Option<Vec<u64>>,
    #[arg(long)]
    reps: Option<u64>,
    #[arg(long)]
    cap: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory. Without it the JSON report goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON config file; flags given alongside override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Cli {
    fn into_config(self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => {
                let e = self.experiment.ok_or_else(|| anyhow!("an experiment name or --config is required"))?;
                let law = self.law.clone().ok_or_else(|| anyhow!("--law is required without --config"))?;
                ExperimentConfig::new(e, &law)
            }
        };
        if let Some(e) = self.experiment {
            cfg.experiment = e;
        }
        if let Some(v) = self.law {
            cfg.law = v;
        }
        if let Some(v) = self.set {
            cfg.set = v;
        }
        if let Some(v) = self.x {
            cfg.x = v;
        }
        if self.n.is_some() {
            cfg.n = self.n;
        }
        if self.n_grid.is_some() {
            cfg.n_grid = self.n_grid;
        }
        if self.reps.is_some() {
            cfg.reps = self.reps;
        }
        if self.cap.is_some() {
            cfg.cap = self.cap;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if self.workers.is_some() {
            cfg.workers = self.workers;
        }
        if self.out.is_some() {
            cfg.out = self.out;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<bool> {
    let cfg = cli.into_config()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cfg.workers {
        pool = pool.num_threads(w);
    }
    let pool = pool.build().context("building the worker pool")?;
    let outcome = pool.install(|| run_experiment(&cfg))?;
    match &cfg.out {
        Some(dir) => {
            for p in outcome.write(dir)? {
                eprintln!("wrote {}", p.display());
            }
            for c in &outcome.report.checks {
                let tag = if c.passed { "PASS" } else { "FAIL" };
                let note = if c.asserted { "" } else { " (reported)" };
                println!("{tag} {}{note}: {}", c.name, c.detail);
            }
        }
        None => print!("{}", outcome.report_json()?),
    }
    Ok(outcome.passed())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
