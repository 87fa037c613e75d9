//! Command-line harness for the variational thermal-state engine.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::RngExt;

use commands::{UmuGrid, VarianceArgs};
use config::{BoundaryName, InitName, ModeName, RunConfig};
use vqt_core::diagnostics::VarianceTarget;
use vqt_core::VqtError;

#[derive(Parser)]
#[command(
    name = "vqt",
    about = "Variational thermal states of the Fermi-Hubbard model",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand; each overrides the config-file value.
#[derive(Args, Debug)]
struct CommonArgs {
    /// JSON config file (flags override file values)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long)]
    sites: Option<usize>,
    /// Hopping amplitude
    #[arg(long)]
    t: Option<f64>,
    /// On-site repulsion U
    #[arg(long)]
    u: Option<f64>,
    /// Chemical potential
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long, value_enum)]
    boundary: Option<BoundaryName>,
    /// Inverse temperature
    #[arg(long)]
    beta: Option<f64>,
    /// Comma-separated inverse-temperature grid
    #[arg(long, value_delimiter = ',')]
    beta_grid: Option<Vec<f64>>,
    #[arg(long)]
    layers1: Option<usize>,
    #[arg(long)]
    layers2: Option<usize>,
    /// Use the layer-adaptive protocol instead of fixed layer counts
    #[arg(long)]
    adaptive: bool,
    #[arg(long)]
    fidelity_target: Option<f64>,
    #[arg(long)]
    max_layers: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<ModeName>,
    #[arg(long)]
    shots: Option<u64>,
    /// Master seed; omitted = drawn from entropy and recorded in the output
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    init: Option<InitName>,
    /// L-BFGS iteration budget per solve
    #[arg(long)]
    budget: Option<usize>,
    /// Independent restarts per solve; the best run is reported
    #[arg(long)]
    restarts: Option<usize>,
    /// Worker-pool size for scan cells
    #[arg(long, default_value_t = num_threads())]
    jobs: usize,
    /// Output file
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn num_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Subcommand)]
enum Command {
    /// One qVQT solve at fixed parameters; JSON result on stdout and file
    Solve(CommonArgs),
    /// Temperature scan with ED reference columns
    ScanBeta(CommonArgs),
    /// Number-density scan over a (U, mu) grid at fixed beta
    ScanUmu {
        #[command(flatten)]
        common: CommonArgs,
        /// Lower edge of the (U, mu) grid
        #[arg(long, default_value_t = 0.1)]
        grid_min: f64,
        /// Upper edge of the (U, mu) grid
        #[arg(long, default_value_t = 1.0)]
        grid_max: f64,
        /// Points per axis
        #[arg(long, default_value_t = 10)]
        grid_points: usize,
    },
    /// Objective-variance sampling over uniform random parameters
    Variance {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 1)]
        layers_min: usize,
        #[arg(long, default_value_t = 4)]
        layers_max: usize,
        #[arg(long, default_value_t = 500)]
        samples: usize,
        /// Sample the free energy or one gradient component
        #[arg(long, default_value = "free-energy")]
        target: String,
        /// Joint parameter index for --target gradient
        #[arg(long, default_value_t = 0)]
        grad_index: usize,
        /// Inverse temperature of the variance study
        #[arg(long, default_value_t = 1.0)]
        variance_beta: f64,
    },
    /// Mean and standard deviation over independent initializations
    Multiseed {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 10)]
        seeds: usize,
    },
    /// Exact-diagonalization reference dump over the beta grid
    Ed(CommonArgs),
}

fn load_config(common: &CommonArgs) -> Result<RunConfig, String> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            serde_json::from_str::<RunConfig>(&text)
                .map_err(|e| format!("bad config {}: {e}", path.display()))?
        }
        None => RunConfig::default(),
    };
    if let Some(v) = common.sites {
        cfg.sites = v;
    }
    if let Some(v) = common.t {
        cfg.t = v;
    }
    if let Some(v) = common.u {
        cfg.u = v;
    }
    if let Some(v) = common.mu {
        cfg.mu = v;
    }
    if let Some(v) = common.boundary {
        cfg.boundary = v;
    }
    if let Some(v) = common.beta {
        cfg.beta = v;
    }
    if let Some(v) = &common.beta_grid {
        cfg.beta_grid = Some(v.clone());
    }
    if let Some(v) = common.layers1 {
        cfg.layers1 = v;
    }
    if let Some(v) = common.layers2 {
        cfg.layers2 = v;
    }
    if common.adaptive {
        cfg.adaptive = true;
    }
    if let Some(v) = common.fidelity_target {
        cfg.fidelity_target = v;
    }
    if let Some(v) = common.max_layers {
        cfg.max_layers = v;
    }
    if let Some(v) = common.mode {
        cfg.mode = v;
    }
    if let Some(v) = common.shots {
        cfg.shots = v;
    }
    if let Some(v) = common.seed {
        cfg.seed = Some(v);
    }
    if let Some(v) = common.init {
        cfg.init = v;
    }
    if let Some(v) = common.budget {
        cfg.optimizer_budget = v;
    }
    if let Some(v) = common.restarts {
        cfg.restarts = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Resolve the master seed: configured value, or a fresh draw that every
/// output records.
fn resolve_seed(cfg: &RunConfig) -> u64 {
    cfg.seed.unwrap_or_else(|| rand::rng().random::<u64>())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(classify(&e))
        }
    }
}

/// Configuration problems exit 2; numerical/runtime failures exit 3.
fn classify(e: &anyhow::Error) -> u8 {
    if let Some(v) = e.downcast_ref::<VqtError>() {
        return match v {
            VqtError::InvalidConfig(_) => 2,
            _ => 3,
        };
    }
    if e.to_string().starts_with("config:") {
        2
    } else {
        3
    }
}

fn config_err(msg: String) -> anyhow::Error {
    anyhow::anyhow!("config: {msg}")
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let pool_jobs = match &cli.command {
        Command::Solve(c) | Command::ScanBeta(c) | Command::Ed(c) => c.jobs,
        Command::ScanUmu { common, .. }
        | Command::Variance { common, .. }
        | Command::Multiseed { common, .. } => common.jobs,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(pool_jobs.max(1))
        .build_global()
        .ok();

    match cli.command {
        Command::Solve(common) => {
            let cfg = load_config(&common).map_err(config_err)?;
            let seed = resolve_seed(&cfg);
            let out = common.output.unwrap_or_else(|| "solve_result.json".into());
            commands::cmd_solve(&cfg, seed, &out)
        }
        Command::ScanBeta(common) => {
            let cfg = load_config(&common).map_err(config_err)?;
            let seed = resolve_seed(&cfg);
            let out = common.output.unwrap_or_else(|| "scan_beta.csv".into());
            commands::cmd_scan_beta(&cfg, seed, &out, common.jobs)
        }
        Command::ScanUmu { common, grid_min, grid_max, grid_points } => {
            let cfg = load_config(&common).map_err(config_err)?;
            let seed = resolve_seed(&cfg);
            let out = common.output.unwrap_or_else(|| "scan_umu.csv".into());
            if grid_min < 0.0 || grid_max < grid_min || grid_points == 0 {
                return Err(config_err("grid bounds must satisfy 0 <= min <= max".into()));
            }
            let grid = UmuGrid { min: grid_min, max: grid_max, points: grid_points };
            commands::cmd_scan_umu(&cfg, &grid, seed, &out, common.jobs)
        }
        Command::Variance {
            common,
            layers_min,
            layers_max,
            samples,
            target,
            grad_index,
            variance_beta,
        } => {
            let cfg = load_config(&common).map_err(config_err)?;
            let seed = resolve_seed(&cfg);
            let out = common.output.unwrap_or_else(|| "variance.csv".into());
            let target = match target.as_str() {
                "free-energy" => VarianceTarget::FreeEnergy,
                "gradient" => VarianceTarget::GradientComponent(grad_index),
                other => {
                    return Err(config_err(format!(
                        "unknown variance target {other}; use free-energy or gradient"
                    )))
                }
            };
            if layers_min == 0 || layers_max < layers_min {
                return Err(config_err("need 1 <= layers-min <= layers-max".into()));
            }
            let args = VarianceArgs { layers_min, layers_max, samples, beta: variance_beta, target };
            commands::cmd_variance(&cfg, &args, seed, &out)
        }
        Command::Multiseed { common, seeds } => {
            let cfg = load_config(&common).map_err(config_err)?;
            let seed = resolve_seed(&cfg);
            let out = common.output.unwrap_or_else(|| "multiseed.csv".into());
            if seeds < 2 {
                return Err(config_err("multiseed needs --seeds >= 2".into()));
            }
            commands::cmd_multiseed(&cfg, seeds, seed, &out)
        }
        Command::Ed(common) => {
            let cfg = load_config(&common).map_err(config_err)?;
            let out = common.output.unwrap_or_else(|| "ed.csv".into());
            commands::cmd_ed(&cfg, &out, common.jobs)
        }
    }
}
