use alloc::string::String;

use crate::estimate::PartialEstimates;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{what} = {value} is outside its domain")]
    Domain { what: &'static str, value: f64 },

    #[error("kappa quadratic has no admissible positive root (F2={f2}, F1={f1}, F0={f0}, disc={discriminant})")]
    NoPositiveRoot {
        f2: f64,
        f1: f64,
        f0: f64,
        discriminant: f64,
    },

    #[error("tridiagonal system is singular at row {row}")]
    SingularSystem { row: usize },

    #[error("split calibration did not converge after {iterations} iterations (residuals {residuals:?})")]
    NonConvergence {
        iterations: usize,
        residuals: [f64; 2],
    },

    #[error("regime {regime} received no labels; partial estimates available")]
    EstimationDegenerate {
        regime: u8,
        partial: PartialEstimates,
    },

    #[error("episode aborted: value surface undefined at current parameters")]
    EpisodeAborted,

    #[error("training failed after {consecutive} consecutive aborted episodes")]
    TrainingFailed { consecutive: usize },

    #[error("evaluation is degenerate: {0}")]
    DegenerateReport(String),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        !matches!(self, Error::Config(_) | Error::Domain { .. })
    }
}
