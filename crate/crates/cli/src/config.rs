//! Run configuration: one TOML file with every section pre-filled with the defaults of
//! the reference experiment, so an empty file reproduces it.

use std::path::{Path, PathBuf};

use podiv_core::estimate::{EmConfig, HeuristicConfig};
use podiv_core::fd::FdConfig;
use podiv_core::trainer::TrainerConfig;
use podiv_core::{ControlConfig, EnvParams};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Which parameters drive the belief filter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FilterChoice {
    #[serde(rename = "true")]
    True,
    #[serde(rename = "est")]
    Est,
}

impl std::str::FromStr for FilterChoice {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "true" => Ok(FilterChoice::True),
            "est" => Ok(FilterChoice::Est),
            other => Err(CliError::Config(format!("unknown filter '{other}' (expected true or est)"))),
        }
    }
}

impl FilterChoice {
    pub fn label(self) -> &'static str {
        match self {
            FilterChoice::True => "true",
            FilterChoice::Est => "est",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub n_paths: usize,
    pub years: f64,
    /// Constant dividend rate paid on every path.
    pub dividend_rate: f64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig { n_paths: 1, years: 10.0, dividend_rate: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimationConfig {
    pub n_paths: usize,
    pub years: f64,
    pub heuristic: HeuristicConfig,
    pub em: EmConfig,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        EstimationConfig { n_paths: 100, years: 20.0, heuristic: HeuristicConfig::default(), em: EmConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FdRunConfig {
    pub solver: FdConfig,
    /// Surface CSV grid: x in [0, x_max] with `x_points` nodes, p with `p_points` nodes.
    pub x_max: f64,
    pub x_points: usize,
    pub p_points: usize,
}

impl Default for FdRunConfig {
    fn default() -> Self {
        FdRunConfig { solver: FdConfig::default(), x_max: 3.0, x_points: 61, p_points: 51 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainRunConfig {
    pub filter: FilterChoice,
    /// Re-estimate the filter parameters from a fresh history every iteration instead
    /// of once before training.
    pub reestimate_each_iteration: bool,
    /// Length of the history used for filter estimates.
    pub history_years: f64,
    /// Write a checkpoint every this many iterations (0 = only at the end).
    pub checkpoint_every: usize,
}

impl Default for TrainRunConfig {
    fn default() -> Self {
        TrainRunConfig { filter: FilterChoice::True, reestimate_each_iteration: false, history_years: 20.0, checkpoint_every: 500 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub n_paths: usize,
    pub filter: FilterChoice,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        EvaluateConfig { n_paths: 10_000, filter: FilterChoice::True }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    /// True market parameters.
    pub env: EnvParams,
    pub control: ControlConfig,
    pub simulate: SimulateConfig,
    pub estimation: EstimationConfig,
    pub fd: FdRunConfig,
    pub trainer: TrainerConfig,
    pub train: TrainRunConfig,
    pub evaluate: EvaluateConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            out_dir: PathBuf::from("out"),
            env: EnvParams::default(),
            control: ControlConfig::default(),
            simulate: SimulateConfig::default(),
            estimation: EstimationConfig::default(),
            fd: FdRunConfig::default(),
            trainer: TrainerConfig::default(),
            train: TrainRunConfig::default(),
            evaluate: EvaluateConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("every field is representable in TOML")
    }

    /// Reads `path`, or returns the defaults when no file is given.
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                RunConfig::from_toml(&text)
            }
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        self.env.validate()?;
        self.control.validate()?;
        self.trainer.validate()?;
        if self.simulate.years <= 0.0 || self.estimation.years <= 0.0 || self.train.history_years <= 0.0 {
            return Err(CliError::Config("path lengths must be positive".into()));
        }
        if self.estimation.n_paths == 0 || self.simulate.n_paths == 0 {
            return Err(CliError::Config("path counts must be positive".into()));
        }
        if self.evaluate.n_paths < 2 {
            return Err(CliError::Config("evaluation needs at least two paths".into()));
        }
        if self.fd.x_points < 2 || self.fd.p_points < 2 || self.fd.x_max <= 0.0 {
            return Err(CliError::Config("surface grid needs two or more nodes per axis".into()));
        }
        Ok(())
    }

    /// Number of grid steps covering `years`.
    pub fn steps_for(&self, years: f64) -> usize {
        (years / self.control.dt).round() as usize
    }
}
