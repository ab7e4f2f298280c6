//! Out-of-sample evaluation of one or more frozen policies on common test paths.

use std::path::PathBuf;

use podiv_core::eval::{evaluate_path, summarize, EvalReport};
use podiv_core::model::ParamModel;
use podiv_core::policy::ValueSurface;
use podiv_core::rng::subseed;
use podiv_core::trainer::Checkpoint;
use podiv_core::EnvParams;
use serde::Serialize;

use super::{fd, filter_params, par_indexed};
use crate::config::{FilterChoice, RunConfig};
use crate::error::{CliError, CliResult};
use crate::io::{output_path, read_json, write_csv, write_json};

const TEST_PATH_TAG: u64 = 0x7e57;

#[derive(Clone, Debug, PartialEq)]
pub enum PolicySource {
    /// The finite-difference benchmark at the configured cap and volatility.
    Optimal,
    Checkpoint(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicySpec {
    pub label: String,
    pub source: PolicySource,
    pub filter: FilterChoice,
}

impl PolicySpec {
    /// Parses `optimal[@filter]` or `label=checkpoint.json[@filter]`.
    pub fn parse(text: &str, default_filter: FilterChoice) -> CliResult<Self> {
        let (body, filter) = match text.rsplit_once('@') {
            Some((b, f)) => (b, f.parse()?),
            None => (text, default_filter),
        };
        if body == "optimal" {
            return Ok(PolicySpec { label: "optimal".into(), source: PolicySource::Optimal, filter });
        }
        match body.split_once('=') {
            Some((label, path)) if !label.is_empty() && !path.is_empty() => Ok(PolicySpec {
                label: label.into(),
                source: PolicySource::Checkpoint(PathBuf::from(path)),
                filter,
            }),
            _ => Err(CliError::Config(format!("policy '{text}' is neither 'optimal' nor 'label=path'"))),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct EvalRow {
    pub policy: String,
    pub filter: &'static str,
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
}

fn run_paths<P: ValueSurface + Sync>(cfg: &RunConfig, policy: &P, filter: &EnvParams, n_paths: usize) -> CliResult<EvalReport> {
    let seed = subseed(cfg.seed, TEST_PATH_TAG);
    let outcomes = par_indexed(n_paths, |i| evaluate_path(policy, &cfg.env, filter, &cfg.control, seed, i))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    Ok(summarize(&outcomes)?)
}

/// Evaluates one policy on the configured number of test paths.
pub fn evaluate_spec(cfg: &RunConfig, spec: &PolicySpec) -> CliResult<EvalReport> {
    let filter = filter_params(cfg, spec.filter)?;
    let n = cfg.evaluate.n_paths;
    match &spec.source {
        PolicySource::Optimal => run_paths(cfg, &fd::solve(cfg, cfg.control.cap_a, cfg.env.sigma)?, &filter, n),
        PolicySource::Checkpoint(path) => {
            let ck: Checkpoint = read_json(path)?;
            let model = ParamModel::new(
                &ck.theta,
                (cfg.env.delta1, cfg.env.delta2),
                cfg.control.lambda,
                cfg.control.cap_a,
                cfg.trainer.quadrature_intervals,
            )?;
            run_paths(cfg, &model, &filter, n)
        }
    }
}

/// Writes `evaluation.csv` with one row per policy and `eval_<label>_<filter>.json` reports.
pub fn run(cfg: &RunConfig, specs: &[PolicySpec]) -> CliResult<Vec<PathBuf>> {
    if specs.is_empty() {
        return Err(CliError::Config("no policies to evaluate".into()));
    }
    let mut rows = Vec::new();
    let mut written = Vec::new();
    for spec in specs {
        let r = evaluate_spec(cfg, spec)?;
        let path = output_path(&cfg.out_dir, &format!("eval_{}_{}.json", spec.label, spec.filter.label()))?;
        write_json(&path, &r)?;
        written.push(path);
        rows.push(EvalRow {
            policy: spec.label.clone(),
            filter: spec.filter.label(),
            mean_v: r.mean_v,
            var_v: r.var_v,
            snr: r.snr,
            sharpe_sr: r.sharpe_sr,
            sharpe_ri: r.sharpe_ri,
            mean_v_truncated: r.mean_v_truncated,
            var_v_truncated: r.var_v_truncated,
            mean_dividends: r.mean_dividends,
            ruin_fraction: r.ruin_fraction,
            n_paths: r.n_paths,
        });
    }
    let table = output_path(&cfg.out_dir, "evaluation.csv")?;
    write_csv(&table, &rows)?;
    written.push(table);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_specs() {
        let t = FilterChoice::True;
        assert_eq!(PolicySpec::parse("optimal", t).unwrap().source, PolicySource::Optimal);
        let s = PolicySpec::parse("ctd=out/ck.json@est", t).unwrap();
        assert_eq!(s.label, "ctd");
        assert_eq!(s.filter, FilterChoice::Est);
        assert_eq!(s.source, PolicySource::Checkpoint(PathBuf::from("out/ck.json")));
        assert!(PolicySpec::parse("nonsense", t).is_err());
        assert!(PolicySpec::parse("optimal@sometimes", t).is_err());
    }
}
