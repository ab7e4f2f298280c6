//! Out-of-sample evaluation of a frozen policy.
//!
//! Every reduction goes through [`order_free_sum`], so the report does not depend on
//! the order in which path outcomes arrive.

use alloc::string::String;
use alloc::vec::Vec;

use libm::{exp, sqrt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::order_free_sum;
use crate::params::{ControlConfig, EnvParams};
use crate::policy::ValueSurface;
use crate::trainer::{generate_episode, Termination};

/// Trading days per year used to annualize the per-step ratios.
pub const ANNUALIZATION: f64 = 252.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathOutcome {
    /// Discounted regularized reward over the horizon plus the discounted terminal
    /// value estimate (zero after ruin).
    pub value: f64,
    /// Discounted regularized reward over the horizon only.
    pub truncated: f64,
    /// Discounted raw dividends.
    pub dividends: f64,
    /// Per-step relative surplus changes of the surviving steps.
    pub returns: Vec<f64>,
    /// Per-step discounted reward increments.
    pub increments: Vec<f64>,
    pub ruined: bool,
    pub n_steps: usize,
}

/// Runs one test path.
pub fn evaluate_path<P: ValueSurface + ?Sized>(
    policy: &P,
    market: &EnvParams,
    filter: &EnvParams,
    cfg: &ControlConfig,
    seed: u64,
    index: u64,
) -> Result<PathOutcome> {
    let ep = generate_episode(policy, market, filter, cfg, seed, index)?;
    let dt = ep.dt;
    let n = ep.stop_index();
    let mut increments = Vec::with_capacity(n);
    let mut returns = Vec::with_capacity(n);
    let mut dividends = Vec::with_capacity(n);
    for (k, (s, lam)) in ep.steps.iter().zip(&ep.discounts).enumerate() {
        let disc = exp(-lam);
        increments.push(disc * s.reward * dt);
        dividends.push(disc * s.u * dt);
        let x_next = ep.steps.get(k + 1).map_or(ep.final_x, |n| n.x);
        returns.push((x_next - s.x) / s.x);
    }
    let ruined = ep.termination == Termination::Ruin;
    let terminal = if ruined || n == 0 {
        0.0
    } else {
        exp(-ep.discounts[n - 1]) * policy.value(ep.final_x, ep.final_p).0
    };
    let truncated = order_free_sum(&mut increments.clone());
    Ok(PathOutcome {
        value: truncated + terminal,
        truncated,
        dividends: order_free_sum(&mut dividends),
        returns,
        increments,
        ruined,
        n_steps: n,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mean_v: f64,
    pub var_v: f64,
    pub snr: f64,
    pub sharpe_sr: f64,
    pub sharpe_ri: f64,
    pub mean_v_truncated: f64,
    pub var_v_truncated: f64,
    pub mean_dividends: f64,
    pub ruin_fraction: f64,
    pub n_paths: usize,
    pub value_definition: String,
    pub sharpe_definition: String,
}

fn mean_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = order_free_sum(&mut values.to_vec()) / n;
    let mut sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = if values.len() > 1 { order_free_sum(&mut sq) / (n - 1.0) } else { 0.0 };
    (mean, var)
}

fn sharpe(series: &[f64]) -> f64 {
    let (m, v) = mean_var(series);
    m / sqrt(v) * sqrt(ANNUALIZATION)
}

/// Pools the outcomes into the reported metrics.
pub fn summarize(outcomes: &[PathOutcome]) -> Result<EvalReport> {
    if outcomes.len() < 2 {
        return Err(Error::DegenerateReport("at least two paths are required".into()));
    }
    if outcomes.iter().all(|o| o.n_steps == 0) {
        return Err(Error::DegenerateReport("every path was ruined before the first step".into()));
    }
    let values: Vec<f64> = outcomes.iter().map(|o| o.value).collect();
    let truncated: Vec<f64> = outcomes.iter().map(|o| o.truncated).collect();
    let divs: Vec<f64> = outcomes.iter().map(|o| o.dividends).collect();
    let (mean_v, var_v) = mean_var(&values);
    let (mean_v_truncated, var_v_truncated) = mean_var(&truncated);
    let (mean_dividends, _) = mean_var(&divs);
    let returns: Vec<f64> = outcomes.iter().flat_map(|o| o.returns.iter().copied()).collect();
    let increments: Vec<f64> = outcomes.iter().flat_map(|o| o.increments.iter().copied()).collect();
    let ruined = outcomes.iter().filter(|o| o.ruined).count();
    Ok(EvalReport {
        mean_v,
        var_v,
        snr: mean_v / sqrt(var_v),
        sharpe_sr: sharpe(&returns),
        sharpe_ri: sharpe(&increments),
        mean_v_truncated,
        var_v_truncated,
        mean_dividends,
        ruin_fraction: ruined as f64 / outcomes.len() as f64,
        n_paths: outcomes.len(),
        value_definition: "discounted regularized reward to the horizon plus discounted terminal value \
                           estimate (zero after ruin); truncated columns omit the terminal term"
            .into(),
        sharpe_definition: "per-step series pooled across paths, mean/std times sqrt(252)".into(),
    })
}

/// Sequential evaluation over paths `0..n_paths`. The `podiv` crate runs the same
/// per-path function in parallel.
pub fn evaluate<P: ValueSurface + ?Sized>(
    policy: &P,
    market: &EnvParams,
    filter: &EnvParams,
    cfg: &ControlConfig,
    n_paths: usize,
    seed: u64,
) -> Result<EvalReport> {
    let outcomes = (0..n_paths as u64)
        .map(|i| evaluate_path(policy, market, filter, cfg, seed, i))
        .collect::<Result<Vec<_>>>()?;
    summarize(&outcomes)
}
