//! Run configuration: one JSON schema shared by every subcommand, with CLI
//! flags overriding file values.

use serde::{Deserialize, Serialize};
use vqt_core::engine::{InitStrategy, Mode};
use vqt_core::hubbard::{Boundary, HubbardConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    Exact,
    Shots,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InitName {
    Gaussian,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryName {
    Open,
    Periodic,
}

impl From<BoundaryName> for Boundary {
    fn from(b: BoundaryName) -> Boundary {
        match b {
            BoundaryName::Open => Boundary::Open,
            BoundaryName::Periodic => Boundary::Periodic,
        }
    }
}

/// The config-file schema. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "d_sites")]
    pub sites: usize,
    #[serde(default = "d_t")]
    pub t: f64,
    #[serde(default = "d_u")]
    pub u: f64,
    #[serde(default = "d_mu")]
    pub mu: f64,
    #[serde(default = "d_boundary")]
    pub boundary: BoundaryName,
    #[serde(default = "d_beta")]
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_grid: Option<Vec<f64>>,
    #[serde(default = "d_layers")]
    pub layers1: usize,
    #[serde(default = "d_layers")]
    pub layers2: usize,
    #[serde(default)]
    pub adaptive: bool,
    #[serde(default = "d_fidelity_target")]
    pub fidelity_target: f64,
    #[serde(default = "d_max_layers")]
    pub max_layers: usize,
    #[serde(default = "d_mode")]
    pub mode: ModeName,
    #[serde(default = "d_shots")]
    pub shots: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "d_init")]
    pub init: InitName,
    #[serde(default = "d_budget")]
    pub optimizer_budget: usize,
    /// Independent restarts per solve; the best run is reported.
    #[serde(default = "d_restarts")]
    pub restarts: usize,
}

fn d_sites() -> usize {
    2
}
fn d_t() -> f64 {
    1.0
}
fn d_u() -> f64 {
    0.8
}
fn d_mu() -> f64 {
    0.2
}
fn d_boundary() -> BoundaryName {
    BoundaryName::Periodic
}
fn d_beta() -> f64 {
    1.0
}
fn d_layers() -> usize {
    4
}
fn d_fidelity_target() -> f64 {
    0.9
}
fn d_max_layers() -> usize {
    5
}
fn d_mode() -> ModeName {
    ModeName::Exact
}
fn d_shots() -> u64 {
    3000
}
fn d_init() -> InitName {
    InitName::Gaussian
}
fn d_budget() -> usize {
    300
}
fn d_restarts() -> usize {
    1
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config applies defaults")
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.sites == 0 {
            return Err("sites must be >= 1".into());
        }
        if self.beta <= 0.0 {
            return Err("beta must be positive".into());
        }
        if let Some(grid) = &self.beta_grid {
            if grid.is_empty() {
                return Err("beta_grid must not be empty".into());
            }
            if grid.iter().any(|b| *b <= 0.0) {
                return Err("beta_grid values must be positive".into());
            }
            if grid.windows(2).any(|w| w[1] <= w[0]) {
                return Err("beta_grid must be strictly increasing".into());
            }
        }
        if self.layers1 == 0 || self.layers2 == 0 {
            return Err("layer counts must be >= 1".into());
        }
        if self.restarts == 0 {
            return Err("restarts must be >= 1".into());
        }
        if self.optimizer_budget == 0 {
            return Err("optimizer_budget must be >= 1".into());
        }
        if self.shots == 0 {
            return Err("shots must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.fidelity_target) {
            return Err("fidelity_target must lie in [0, 1]".into());
        }
        Ok(())
    }

    pub fn hubbard(&self) -> Result<HubbardConfig, String> {
        HubbardConfig::new(self.sites, self.t, self.u, self.mu, self.boundary.into())
            .map_err(|e| e.to_string())
    }

    /// Engine mode with the shot stream derived from the given master seed.
    pub fn engine_mode(&self, seed: u64) -> Mode {
        match self.mode {
            ModeName::Exact => Mode::Exact,
            ModeName::Shots => Mode::Shots { shots: self.shots, seed },
        }
    }

    pub fn init_strategy(&self, seed: u64) -> InitStrategy {
        match self.init {
            InitName::Gaussian => InitStrategy::Gaussian { seed },
            InitName::Uniform => InitStrategy::Uniform { seed },
        }
    }

    /// The beta grid for scans: explicit grid, or 25 log-spaced points in
    /// [0.05, 35].
    pub fn betas(&self) -> Vec<f64> {
        match &self.beta_grid {
            Some(g) => g.clone(),
            None => default_beta_grid(),
        }
    }
}

pub fn default_beta_grid() -> Vec<f64> {
    let (lo, hi, n) = (0.05f64, 35.0f64, 25usize);
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}
