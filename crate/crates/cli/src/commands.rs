//! Subcommand drivers: single solves, the temperature and (U, mu) scans,
//! the variance and multi-seed studies, and the ED-only reference dump.
//!
//! Scans dispatch cells to a rayon pool sized by `--jobs` in fixed-size
//! chunks; rows are written in grid order and flushed as each chunk
//! completes, so an interrupted run leaves a valid prefix on disk.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, Context};
use rayon::prelude::*;

use vqt_core::ansatz::{build_vqc1, build_vqc2};
use vqt_core::diagnostics::{
    free_energy_variance, multi_seed_study, MultiSeedConfig, VarianceTarget,
};
use vqt_core::engine::{
    adaptive_layer_solve, optimize, AdaptiveOptions, Evaluator, OptimizeOptions,
    QvqtProblem, QvqtResult, ResultRecord,
};
use vqt_core::hubbard::{build_hamiltonian, number_operator, HubbardConfig};
use vqt_core::rng::mix_seed;
use vqt_core::thermal::{hubbard_exact_thermal, hubbard_ground_state};

use crate::config::RunConfig;

/// 17 significant digits, the CSV float format.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".into(), fmt_f64)
}

/// Stdout plus file sink with incremental flushing.
pub struct RowSink {
    file: BufWriter<File>,
    echo: bool,
}

impl RowSink {
    pub fn create(path: &Path, echo: bool) -> anyhow::Result<Self> {
        let file = File::create(path)
            .with_context(|| format!("cannot create output file {}", path.display()))?;
        Ok(Self { file: BufWriter::new(file), echo })
    }

    pub fn line(&mut self, s: &str) -> anyhow::Result<()> {
        writeln!(self.file, "{s}")?;
        self.file.flush()?;
        if self.echo {
            println!("{s}");
        }
        Ok(())
    }
}

/// One full solve at explicit physics parameters: fixed layers or the
/// adaptive protocol, with `restarts` independent initializations. Returns
/// the best run (highest fidelity when available, lowest free energy
/// otherwise) and its ensemble number density.
pub fn solve_point(
    cfg: &RunConfig,
    hubbard: &HubbardConfig,
    beta: f64,
    seed: u64,
) -> anyhow::Result<(QvqtResult, f64)> {
    let mode = cfg.engine_mode(seed);
    let mut best: Option<QvqtResult> = None;
    for r in 0..cfg.restarts {
        let init = cfg.init_strategy(mix_seed(seed, r as u64));
        let result = if cfg.adaptive {
            let opts = AdaptiveOptions {
                fidelity_target: cfg.fidelity_target,
                max_layers: cfg.max_layers,
                merge_zz: true,
                mode,
                prob_cutoff: 1e-12,
                opt: OptimizeOptions { budget: cfg.optimizer_budget, ..Default::default() },
            };
            adaptive_layer_solve(hubbard, beta, init, &opts)?
        } else {
            let problem = QvqtProblem::new(
                build_hamiltonian(hubbard)?,
                beta,
                build_vqc1(hubbard.n_qubits(), cfg.layers1, 1)?,
                build_vqc2(hubbard, cfg.layers2, true)?,
                mode,
                1e-12,
            )?;
            let opts = OptimizeOptions { budget: cfg.optimizer_budget, ..Default::default() };
            optimize(&problem, init, &opts)?
        };
        let better = match &best {
            None => true,
            Some(b) => match (result.fidelity, b.fidelity) {
                (Some(fr), Some(fb)) => fr > fb,
                _ => result.free_energy < b.free_energy,
            },
        };
        if better {
            best = Some(result);
        }
    }
    let result = best.expect("restarts >= 1");

    // Ensemble number density at the winning parameters.
    let problem = QvqtProblem::new(
        build_hamiltonian(hubbard)?,
        beta,
        build_vqc1(hubbard.n_qubits(), result.layers1, 1)?,
        build_vqc2(hubbard, result.layers2, true)?,
        mode,
        1e-12,
    )?;
    let ev = Evaluator::new(&problem)?;
    let density = ev.ensemble_expectation(&number_operator(hubbard), &result.theta1, &result.theta2)?
        / hubbard.n_sites as f64;
    Ok((result, density))
}

pub fn cmd_solve(cfg: &RunConfig, seed: u64, output: &Path) -> anyhow::Result<()> {
    let hubbard = cfg.hubbard().map_err(|e| anyhow!(e))?;
    let (result, density) = solve_point(cfg, &hubbard, cfg.beta, seed)?;
    let record = ResultRecord::new(&hubbard, cfg.beta, &result, density, seed, cfg.engine_mode(seed));
    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let wrapped = serde_json::json!({
        "timestamp": timestamp,
        "result": record,
    });
    let text = serde_json::to_string_pretty(&wrapped)?;
    println!("{text}");
    std::fs::write(output, format!("{text}\n"))
        .with_context(|| format!("cannot write {}", output.display()))?;
    Ok(())
}

pub const SCAN_BETA_HEADER: &str =
    "beta,F_rec,F_exact,E_rec,E_exact,S_rec,S_exact,n_rec,n_exact,fidelity,layers1,layers2,iterations,seed";

pub fn cmd_scan_beta(cfg: &RunConfig, seed: u64, output: &Path, jobs: usize) -> anyhow::Result<()> {
    let hubbard = cfg.hubbard().map_err(|e| anyhow!(e))?;
    let betas = cfg.betas();
    let (e0, n0) = hubbard_ground_state(&hubbard)?;

    let mut sink = RowSink::create(output, true)?;
    sink.line(&format!("# ground_state_energy={}", fmt_f64(e0)))?;
    sink.line(&format!("# ground_state_number_density={}", fmt_f64(n0)))?;
    sink.line(SCAN_BETA_HEADER)?;

    run_chunks(&betas, jobs, |idx, &beta| -> anyhow::Result<String> {
        let row_seed = mix_seed(seed, idx as u64);
        let (result, density) = solve_point(cfg, &hubbard, beta, row_seed)?;
        let exact = hubbard_exact_thermal(&hubbard, beta)?;
        let mut row = String::new();
        let _ = write!(
            row,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt_f64(beta),
            fmt_f64(result.free_energy),
            fmt_f64(exact.free_energy),
            fmt_f64(result.energy),
            fmt_f64(exact.energy),
            fmt_f64(result.entropy),
            fmt_f64(exact.entropy),
            fmt_f64(density),
            fmt_f64(exact.number_density.unwrap_or(f64::NAN)),
            fmt_opt(result.fidelity),
            result.layers1,
            result.layers2,
            result.iterations,
            row_seed
        );
        Ok(row)
    }, &mut sink)
}

pub const SCAN_UMU_HEADER: &str =
    "beta,U,mu,n_rec,n_exact,fidelity,layers1,layers2,iterations,seed";

pub struct UmuGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

pub fn cmd_scan_umu(
    cfg: &RunConfig,
    grid: &UmuGrid,
    seed: u64,
    output: &Path,
    jobs: usize,
) -> anyhow::Result<()> {
    if grid.min < 0.0 || grid.max < grid.min || grid.points == 0 {
        return Err(anyhow!("grid bounds must satisfy 0 <= min <= max, points >= 1"));
    }
    let values: Vec<f64> = (0..grid.points)
        .map(|i| {
            if grid.points == 1 {
                grid.min
            } else {
                grid.min + (grid.max - grid.min) * i as f64 / (grid.points - 1) as f64
            }
        })
        .collect();
    let cells: Vec<(f64, f64)> = values
        .iter()
        .flat_map(|&u| values.iter().map(move |&mu| (u, mu)))
        .collect();

    let mut sink = RowSink::create(output, true)?;
    sink.line(SCAN_UMU_HEADER)?;

    run_chunks(&cells, jobs, |idx, &(u, mu)| -> anyhow::Result<String> {
        let cell_seed = mix_seed(seed, idx as u64);
        let hubbard = HubbardConfig::new(cfg.sites, cfg.t, u, mu, cfg.boundary.into())?;
        let (result, density) = solve_point(cfg, &hubbard, cfg.beta, cell_seed)?;
        let exact = hubbard_exact_thermal(&hubbard, cfg.beta)?;
        let mut row = String::new();
        let _ = write!(
            row,
            "{},{},{},{},{},{},{},{},{},{}",
            fmt_f64(cfg.beta),
            fmt_f64(u),
            fmt_f64(mu),
            fmt_f64(density),
            fmt_f64(exact.number_density.unwrap_or(f64::NAN)),
            fmt_opt(result.fidelity),
            result.layers1,
            result.layers2,
            result.iterations,
            cell_seed
        );
        Ok(row)
    }, &mut sink)
}

pub const VARIANCE_HEADER: &str = "n_sites,layers,n_samples,variance,seed";

pub struct VarianceArgs {
    pub layers_min: usize,
    pub layers_max: usize,
    pub samples: usize,
    pub beta: f64,
    pub target: VarianceTarget,
}

pub fn cmd_variance(
    cfg: &RunConfig,
    args: &VarianceArgs,
    seed: u64,
    output: &Path,
) -> anyhow::Result<()> {
    if args.layers_min == 0 || args.layers_max < args.layers_min {
        return Err(anyhow!("need 1 <= layers_min <= layers_max"));
    }
    let hubbard = cfg.hubbard().map_err(|e| anyhow!(e))?;
    let mut sink = RowSink::create(output, true)?;
    sink.line(VARIANCE_HEADER)?;
    for layers in args.layers_min..=args.layers_max {
        let report =
            free_energy_variance(&hubbard, layers, args.samples, seed, args.beta, args.target)?;
        sink.line(&format!(
            "{},{},{},{},{}",
            report.n_sites,
            report.layers,
            report.n_samples,
            fmt_f64(report.variance),
            report.seed
        ))?;
    }
    Ok(())
}

pub const MULTISEED_HEADER: &str = "beta,metric,mean,std,n_seeds";

pub fn cmd_multiseed(
    cfg: &RunConfig,
    n_seeds: usize,
    seed: u64,
    output: &Path,
) -> anyhow::Result<()> {
    let hubbard = cfg.hubbard().map_err(|e| anyhow!(e))?;
    let betas = match &cfg.beta_grid {
        Some(g) => g.clone(),
        None => vec![cfg.beta],
    };
    let ms = MultiSeedConfig {
        layers1: cfg.layers1,
        layers2: cfg.layers2,
        n_seeds,
        master_seed: seed,
        mode: cfg.engine_mode(seed),
        opt: OptimizeOptions { budget: cfg.optimizer_budget, ..Default::default() },
    };
    let rows = multi_seed_study(&hubbard, &betas, &ms)?;
    let mut sink = RowSink::create(output, true)?;
    sink.line(MULTISEED_HEADER)?;
    for row in rows {
        for (name, stats) in [
            ("F", row.free_energy),
            ("E", row.energy),
            ("S", row.entropy),
            ("number_density", row.number_density),
            ("iterations", row.iterations),
        ] {
            sink.line(&format!(
                "{},{},{},{},{}",
                fmt_f64(row.beta),
                name,
                fmt_f64(stats.mean),
                fmt_f64(stats.std),
                row.n_seeds
            ))?;
        }
        sink.line(&format!(
            "{},converged_fraction,{},{},{}",
            fmt_f64(row.beta),
            fmt_f64(row.n_converged as f64 / row.n_seeds as f64),
            fmt_f64(0.0),
            row.n_seeds
        ))?;
    }
    Ok(())
}

pub const ED_HEADER: &str = "beta,F,E,S,number_density";

pub fn cmd_ed(cfg: &RunConfig, output: &Path, jobs: usize) -> anyhow::Result<()> {
    let hubbard = cfg.hubbard().map_err(|e| anyhow!(e))?;
    let betas = cfg.betas();
    let mut sink = RowSink::create(output, true)?;
    sink.line(ED_HEADER)?;
    run_chunks(&betas, jobs, |_, &beta| -> anyhow::Result<String> {
        let t = hubbard_exact_thermal(&hubbard, beta)?;
        Ok(format!(
            "{},{},{},{},{}",
            fmt_f64(beta),
            fmt_f64(t.free_energy),
            fmt_f64(t.energy),
            fmt_f64(t.entropy),
            fmt_f64(t.number_density.unwrap_or(f64::NAN))
        ))
    }, &mut sink)
}

/// Process items in fixed chunks of `jobs` cells: each chunk runs on the
/// rayon pool, then its rows are written in index order and flushed.
fn run_chunks<T: Sync, F>(items: &[T], jobs: usize, f: F, sink: &mut RowSink) -> anyhow::Result<()>
where
    F: Fn(usize, &T) -> anyhow::Result<String> + Sync,
{
    let chunk = jobs.max(1);
    for (c, block) in items.chunks(chunk).enumerate() {
        let rows: Vec<anyhow::Result<String>> = block
            .par_iter()
            .enumerate()
            .map(|(i, item)| f(c * chunk + i, item))
            .collect();
        for row in rows {
            sink.line(&row?)?;
        }
    }
    Ok(())
}
