//! Raw path dumps.

use std::path::PathBuf;

use podiv_core::market::simulate_path;
use serde::Serialize;

use super::par_indexed;
use crate::config::RunConfig;
use crate::error::CliResult;
use crate::io::{output_path, write_csv};

#[derive(Debug, Serialize)]
pub struct PathRow {
    pub path_id: u64,
    pub k: usize,
    pub t: f64,
    pub x: f64,
    pub regime: u8,
    pub u: f64,
    /// 0 from the first grid time at which the surplus was at or below the ruin level.
    pub alive: u8,
}

pub fn rows(cfg: &RunConfig) -> CliResult<Vec<PathRow>> {
    let n = cfg.steps_for(cfg.simulate.years);
    let paths = par_indexed(cfg.simulate.n_paths, |i| {
        simulate_path(&cfg.env, &cfg.control, n, cfg.simulate.dividend_rate, cfg.seed, i)
    });
    let mut out = Vec::new();
    for (i, path) in paths.into_iter().enumerate() {
        let path = path?;
        let ruin = path.ruin_index(cfg.control.ruin_eps);
        for k in 0..path.len() {
            out.push(PathRow {
                path_id: i as u64,
                k,
                t: path.times[k],
                x: path.surplus[k],
                regime: path.regimes[k].label(),
                u: path.dividends[k],
                alive: u8::from(ruin.is_none_or(|r| k < r)),
            });
        }
    }
    Ok(out)
}

pub fn run(cfg: &RunConfig) -> CliResult<PathBuf> {
    let path = output_path(&cfg.out_dir, "paths.csv")?;
    write_csv(&path, &rows(cfg)?)?;
    Ok(path)
}
