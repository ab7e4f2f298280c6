//! Finite-difference benchmark: single solve or the (cap, volatility) sweep.

use std::path::PathBuf;

use podiv_core::fd::{benchmark_value, calibrate_splits, quadratic_fit, FdSolution, Monotonicity};
use podiv_core::EnvParams;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliResult;
use crate::io::{output_path, write_csv, write_json};

pub const SWEEP_CAPS: [f64; 3] = [0.6, 1.0, 3.0];
pub const SWEEP_SIGMAS: [f64; 2] = [0.3, 0.8];

/// Surplus levels used to classify the belief direction of the surface.
const MONOTONE_XS: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 5.0];

pub fn solve(cfg: &RunConfig, cap_a: f64, sigma: f64) -> CliResult<FdSolution> {
    let env = EnvParams { sigma, ..cfg.env };
    Ok(calibrate_splits(&env, cfg.control.lambda, cap_a, &cfg.fd.solver)?)
}

#[derive(Debug, Serialize)]
pub struct SummaryRow {
    pub cap_a: f64,
    pub sigma: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub split_at0: f64,
    pub split_at1: f64,
    pub residual0: f64,
    pub residual1: f64,
    pub iterations: usize,
    pub targets_attained: bool,
    pub comparison_violation: f64,
    pub monotonicity: Monotonicity,
}

#[derive(Debug, Serialize)]
pub struct SurfaceRow {
    pub cap_a: f64,
    pub sigma: f64,
    pub x: f64,
    pub p: f64,
    pub v: f64,
    pub vx: f64,
}

#[derive(Debug, Serialize)]
pub struct GRow {
    pub cap_a: f64,
    pub sigma: f64,
    pub p: f64,
    pub g1: f64,
    pub g2: f64,
    pub g1_fit: f64,
    pub g2_fit: f64,
}

#[derive(Debug, Serialize)]
pub struct FitRow {
    pub cap_a: f64,
    pub sigma: f64,
    pub component: u8,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub normalized_mae: f64,
}

pub struct FdTables {
    pub summary: Vec<SummaryRow>,
    pub surface: Vec<SurfaceRow>,
    pub g: Vec<GRow>,
    pub fits: Vec<FitRow>,
}

pub fn tables(cfg: &RunConfig, solutions: &[FdSolution]) -> FdTables {
    let mut t = FdTables { summary: Vec::new(), surface: Vec::new(), g: Vec::new(), fits: Vec::new() };
    let (nx, np) = (cfg.fd.x_points, cfg.fd.p_points);
    for sol in solutions {
        let (cap_a, sigma) = (sol.cap_a, sol.env.sigma);
        t.summary.push(SummaryRow {
            cap_a,
            sigma,
            kappa1: sol.kappa[0],
            kappa2: sol.kappa[1],
            split_at0: sol.splits.at0,
            split_at1: sol.splits.at1,
            residual0: sol.residuals[0],
            residual1: sol.residuals[1],
            iterations: sol.iterations,
            targets_attained: sol.targets_attained,
            comparison_violation: sol.comparison_violation(),
            monotonicity: sol.p_monotonicity(&MONOTONE_XS, 1e-12),
        });
        for i in 0..nx {
            let x = cfg.fd.x_max * i as f64 / (nx - 1) as f64;
            for j in 0..np {
                let p = j as f64 / (np - 1) as f64;
                let (v, vx) = benchmark_value(sol, x, p);
                t.surface.push(SurfaceRow { cap_a, sigma, x, p, v, vx });
            }
        }
        let fits = [quadratic_fit(&sol.g1), quadratic_fit(&sol.g2)];
        for (c, fit) in fits.iter().enumerate() {
            t.fits.push(FitRow {
                cap_a,
                sigma,
                component: c as u8 + 1,
                c0: fit.coeffs[0],
                c1: fit.coeffs[1],
                c2: fit.coeffs[2],
                normalized_mae: fit.normalized_mae,
            });
        }
        let eval = |c: &[f64; 3], p: f64| c[0] + c[1] * p + c[2] * p * p;
        for j in 0..np {
            let p = j as f64 / (np - 1) as f64;
            let g = sol.g_at(p);
            t.g.push(GRow {
                cap_a,
                sigma,
                p,
                g1: g[0],
                g2: g[1],
                g1_fit: eval(&fits[0].coeffs, p),
                g2_fit: eval(&fits[1].coeffs, p),
            });
        }
    }
    t
}

/// Solves at the configured (cap, sigma), or over the sweep grid, and writes
/// `fd_summary.csv`, `fd_surface.csv`, `fd_g.csv`, `fd_fit.csv` and one JSON solution
/// per configuration.
pub fn run(cfg: &RunConfig, sweep: bool) -> CliResult<Vec<PathBuf>> {
    let configs: Vec<(f64, f64)> = if sweep {
        SWEEP_CAPS.iter().flat_map(|&a| SWEEP_SIGMAS.iter().map(move |&s| (a, s))).collect()
    } else {
        vec![(cfg.control.cap_a, cfg.env.sigma)]
    };
    let solutions: Vec<FdSolution> =
        configs.par_iter().map(|&(a, s)| solve(cfg, a, s)).collect::<CliResult<_>>()?;
    let mut written = Vec::new();
    for sol in &solutions {
        let name = if sweep { format!("fd_solution_a{}_sigma{}.json", sol.cap_a, sol.env.sigma) } else { "fd_solution.json".into() };
        let path = output_path(&cfg.out_dir, &name)?;
        write_json(&path, sol)?;
        written.push(path);
    }
    let t = tables(cfg, &solutions);
    let summary = output_path(&cfg.out_dir, "fd_summary.csv")?;
    write_csv(&summary, &t.summary)?;
    let surface = output_path(&cfg.out_dir, "fd_surface.csv")?;
    write_csv(&surface, &t.surface)?;
    let g = output_path(&cfg.out_dir, "fd_g.csv")?;
    write_csv(&g, &t.g)?;
    let fits = output_path(&cfg.out_dir, "fd_fit.csv")?;
    write_csv(&fits, &t.fits)?;
    written.extend([summary, surface, g, fits]);
    Ok(written)
}
