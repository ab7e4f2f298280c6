//! Environment-parameter estimation from an observed surplus path.

mod em;
mod heuristic;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use em::{em_estimate, EmConfig};
pub use heuristic::{heuristic_estimate, HeuristicConfig};

use crate::params::EnvParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Heuristic,
    Em,
}

/// Whatever could be estimated before a regime turned out to be unidentifiable.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PartialEstimates {
    pub mu1: Option<f64>,
    pub mu2: Option<f64>,
    pub sigma: Option<f64>,
    pub q12: Option<f64>,
    pub q21: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub labeled_regime1: usize,
    pub labeled_regime2: usize,
    pub unlabeled: usize,
    /// Completed (uncensored) runs per regime used for holding times.
    pub runs_regime1: usize,
    pub runs_regime2: usize,
    pub censored_runs: usize,
    /// Unlabeled steps were forward-filled (then back-filled at the head).
    pub forward_filled: bool,
    pub em_iterations: usize,
    pub em_converged: bool,
    pub log_likelihood: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub estimates: EnvParams,
    /// Per-increment regime labels: 1, 2, or 0 for unlabeled.
    pub labels: Vec<u8>,
    pub method: Method,
    pub diagnostics: Diagnostics,
}
