pub mod estimate;
pub mod evaluate;
pub mod fd;
pub mod simulate;
pub mod train;

use rayon::prelude::*;

/// Runs `f` over `0..n` on the rayon pool, returning results in index order.
pub fn par_indexed<T: Send>(n: usize, f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    (0..n as u64).into_par_iter().map(f).collect()
}

use podiv_core::rng::subseed;
use podiv_core::trainer::estimate_from_history;
use podiv_core::EnvParams;

use crate::config::{FilterChoice, RunConfig};
use crate::error::CliResult;

const FILTER_HISTORY_TAG: u64 = 0x00f1_17e7;

/// Parameters the belief filter runs with: the true environment, or heuristic estimates
/// from one simulated history of `train.history_years`.
pub fn filter_params(cfg: &RunConfig, choice: FilterChoice) -> CliResult<EnvParams> {
    match choice {
        FilterChoice::True => Ok(cfg.env),
        FilterChoice::Est => {
            let steps = cfg.steps_for(cfg.train.history_years);
            let seed = subseed(cfg.seed, FILTER_HISTORY_TAG);
            let report =
                estimate_from_history(&cfg.env, &cfg.control, &cfg.estimation.heuristic, steps, seed, 0)?;
            Ok(report.estimates)
        }
    }
}
