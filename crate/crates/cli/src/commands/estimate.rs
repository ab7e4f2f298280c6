//! Heuristic and EM estimates over a batch of simulated histories, summarized per method and parameter.

use std::path::PathBuf;

use podiv_core::estimate::{em_estimate, heuristic_estimate, Diagnostics, EstimationReport, PartialEstimates};
use podiv_core::market::simulate_path;
use podiv_core::rng::subseed;
use podiv_core::{ControlConfig, EnvParams, Error};
use serde::Serialize;

use super::par_indexed;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::io::{output_path, write_csv, write_json};

const HISTORY_TAG: u64 = 0x00e5_7100;

pub const PARAMS: [&str; 5] = ["mu1", "mu2", "sigma", "q12", "q21"];

/// Estimates from one history. A heuristic run on which a regime was unidentifiable
/// still contributes the parameters it did estimate.
#[derive(Clone, Debug)]
pub struct PathEstimates {
    pub heuristic: Result<EstimationReport, PartialEstimates>,
    pub em: Option<EstimationReport>,
}

fn values_of(e: &EnvParams) -> [Option<f64>; 5] {
    [Some(e.mu1), Some(e.mu2), Some(e.sigma), Some(e.q12), Some(e.q21)]
}

impl PathEstimates {
    pub fn heuristic_values(&self) -> [Option<f64>; 5] {
        match &self.heuristic {
            Ok(r) => values_of(&r.estimates),
            Err(p) => [p.mu1, p.mu2, p.sigma, p.q12, p.q21],
        }
    }

    pub fn em_values(&self) -> [Option<f64>; 5] {
        self.em.as_ref().map_or([None; 5], |r| values_of(&r.estimates))
    }
}

/// Uncontrolled histories are recorded without absorption.
pub fn history_control(control: &ControlConfig) -> ControlConfig {
    ControlConfig { ruin_eps: f64::NEG_INFINITY, ..*control }
}

pub fn estimate_path(cfg: &RunConfig, index: u64) -> CliResult<PathEstimates> {
    let n = cfg.steps_for(cfg.estimation.years);
    let seed = subseed(cfg.seed, HISTORY_TAG);
    let path = simulate_path(&cfg.env, &history_control(&cfg.control), n, 0.0, seed, index)?;
    let deltas = (cfg.env.delta1, cfg.env.delta2);
    let dt = cfg.control.dt;
    let heuristic = match heuristic_estimate(&path.surplus, dt, &cfg.estimation.heuristic, deltas) {
        Ok(r) => Ok(r),
        Err(Error::EstimationDegenerate { partial, .. }) => Err(partial),
        Err(e) => return Err(e.into()),
    };
    let em = match em_estimate(&path.surplus, dt, &cfg.estimation.em, deltas) {
        Ok(r) => Some(r),
        Err(e) if e.is_numerical() => None,
        Err(e) => return Err(e.into()),
    };
    Ok(PathEstimates { heuristic, em })
}

pub fn estimate_batch(cfg: &RunConfig) -> CliResult<Vec<PathEstimates>> {
    par_indexed(cfg.estimation.n_paths, |i| estimate_path(cfg, i)).into_iter().collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub method: &'static str,
    pub param: &'static str,
    pub mean: f64,
    pub sd: f64,
    /// Paths that produced this parameter.
    pub n: usize,
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn summary_rows(batch: &[PathEstimates]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for (method, get) in [
        ("heuristic", PathEstimates::heuristic_values as fn(&PathEstimates) -> [Option<f64>; 5]),
        ("em", PathEstimates::em_values),
    ] {
        let per_path: Vec<[Option<f64>; 5]> = batch.iter().map(get).collect();
        for (j, param) in PARAMS.iter().enumerate() {
            let vals: Vec<f64> = per_path.iter().filter_map(|v| v[j]).collect();
            let (mean, sd) = if vals.is_empty() { (f64::NAN, f64::NAN) } else { mean_sd(&vals) };
            rows.push(SummaryRow { method, param, mean, sd, n: vals.len() });
        }
    }
    rows
}

/// Averaged heuristic estimates as an environment (discount rates copied from the
/// true environment).
pub fn averaged_heuristic(cfg: &RunConfig, batch: &[PathEstimates]) -> CliResult<EnvParams> {
    let rows = summary_rows(batch);
    let get = |p: &str| rows.iter().find(|r| r.method == "heuristic" && r.param == p).map(|r| r.mean).unwrap();
    let env = EnvParams {
        mu1: get("mu1"),
        mu2: get("mu2"),
        sigma: get("sigma"),
        q12: get("q12"),
        q21: get("q21"),
        ..cfg.env
    };
    env.validate().map_err(|e| CliError::Config(format!("averaged heuristic estimates are unusable: {e}")))?;
    Ok(env)
}

/// One history's estimates in `estimates.json`; labels only in single-history mode.
#[derive(Debug, Serialize)]
struct PathRecord<'a> {
    path_index: u64,
    heuristic: Option<&'a EnvParams>,
    /// Present instead of `heuristic` when a regime was unidentifiable.
    heuristic_partial: Option<&'a PartialEstimates>,
    heuristic_diagnostics: Option<&'a Diagnostics>,
    em: Option<&'a EnvParams>,
    em_diagnostics: Option<&'a Diagnostics>,
}

impl<'a> PathRecord<'a> {
    fn new(path_index: u64, e: &'a PathEstimates) -> Self {
        PathRecord {
            path_index,
            heuristic: e.heuristic.as_ref().ok().map(|r| &r.estimates),
            heuristic_partial: e.heuristic.as_ref().err(),
            heuristic_diagnostics: e.heuristic.as_ref().ok().map(|r| &r.diagnostics),
            em: e.em.as_ref().map(|r| &r.estimates),
            em_diagnostics: e.em.as_ref().map(|r| &r.diagnostics),
        }
    }
}

#[derive(Debug, Serialize)]
struct LabelRow {
    k: usize,
    heuristic: u8,
    em: u8,
}

/// Writes `estimate_summary.csv` and the per-history `estimates.json`; with
/// `path_index` only that history is used and its per-step labels go to `labels.csv`.
pub fn run(cfg: &RunConfig, path_index: Option<u64>) -> CliResult<Vec<PathBuf>> {
    let batch = match path_index {
        Some(i) => vec![estimate_path(cfg, i)?],
        None => estimate_batch(cfg)?,
    };
    let table = output_path(&cfg.out_dir, "estimate_summary.csv")?;
    write_csv(&table, &summary_rows(&batch))?;
    let indices: Vec<u64> = match path_index {
        Some(i) => vec![i],
        None => (0..batch.len() as u64).collect(),
    };
    let records: Vec<PathRecord> = indices.iter().zip(&batch).map(|(&i, e)| PathRecord::new(i, e)).collect();
    let json = output_path(&cfg.out_dir, "estimates.json")?;
    write_json(&json, &records)?;
    let mut written = vec![table, json];
    if path_index.is_some() {
        let one = &batch[0];
        let h = one.heuristic.as_ref().map(|r| r.labels.clone()).unwrap_or_default();
        let e = one.em.as_ref().map(|r| r.labels.clone()).unwrap_or_default();
        let len = h.len().max(e.len());
        let rows: Vec<LabelRow> = (0..len)
            .map(|k| LabelRow { k, heuristic: h.get(k).copied().unwrap_or(0), em: e.get(k).copied().unwrap_or(0) })
            .collect();
        let labels = output_path(&cfg.out_dir, "labels.csv")?;
        write_csv(&labels, &rows)?;
        written.push(labels);
    }
    Ok(written)
}
