//! `finvel`: simulate finite-velocity random motions, evaluate their exact laws
//! and verify them, driven by a JSON experiment config.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use commands::{Context, Failure};

#[derive(Parser, Debug)]
#[command(name = "finvel", version, about = "Random motions with finitely many velocities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `run.replicas`.
    #[arg(long, global = true)]
    replicas: Option<u64>,
    /// Overrides `run.tol`.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Also write one row per replica (simulate).
    #[arg(long, global = true)]
    raw: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Monte Carlo summary of X(t): face counts, histogram, exact masses when known.
    Simulate,
    /// Exact density at query points or grid centres.
    Density,
    /// Exact masses of the pieces of the support.
    Mass,
    /// Identity, PDE residual and conditional-law checks.
    Verify,
    /// Monte Carlo histogram against exact bin probabilities.
    Compare,
    /// Geometry: reduction, lift and point classification.
    Project,
}

fn load(cli: &Cli) -> Result<Context, Failure> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::Config(config::ConfigError::new("", "--config is required")))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(config::ConfigError::new("", format!("cannot read {}: {e}", path.display()))))?;
    let mut cfg = config::parse(&text)?;
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    if let Some(r) = cli.replicas {
        cfg.run.replicas = r;
    }
    if let Some(t) = cli.tol {
        cfg.run.tol = t;
    }
    if let Some(w) = cli.workers {
        cfg.run.workers = Some(w);
    }
    cfg.validate()?;
    let model = cfg.build_model()?;
    commands::ensure_dir(&cli.out)?;
    Ok(Context { cfg, model, out: cli.out.clone(), raw: cli.raw })
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let ctx = load(cli)?;
    let workers = ctx.cfg.run.workers.unwrap_or(0);
    let command = cli.command;
    finvel::simulator::with_workers(workers, || match command {
        Command::Simulate => commands::simulate(&ctx),
        Command::Density => commands::density(&ctx),
        Command::Mass => commands::mass(&ctx),
        Command::Verify => commands::verify(&ctx),
        Command::Compare => commands::compare(&ctx),
        Command::Project => commands::project(&ctx),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (code, body) = match f {
                Failure::Config(e) => (2, json!({"error": "config", "path": e.path, "message": e.message})),
                Failure::Runtime(m) => (3, json!({"error": "runtime", "message": m})),
                Failure::Verification(fs) => (4, json!({"error": "verification", "failures": fs})),
            };
            eprintln!("{body}");
            ExitCode::from(code)
        }
    }
}
