//! Baum-Welch for a two-state hidden Markov model with Gaussian increments
//! N(mu_i dt, sigma^2 dt) and a shared sigma.

use alloc::vec::Vec;

use libm::{exp, log, sqrt};
use serde::{Deserialize, Serialize};

use super::{Diagnostics, EstimationReport, Method};
use crate::error::{Error, Result};
use crate::params::EnvParams;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmConfig {
    pub max_iterations: usize,
    /// Stop when the log-likelihood gain falls below `tol * (1 + |loglik|)`.
    pub tol: f64,
    /// Initial probability of staying in the same state over one step.
    pub initial_persistence: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig { max_iterations: 200, tol: 1e-8, initial_persistence: 0.99 }
    }
}

struct Model {
    mean: [f64; 2],
    var: f64,
    trans: [[f64; 2]; 2],
    start: [f64; 2],
}

fn density(y: f64, mean: f64, var: f64) -> f64 {
    let r = y - mean;
    exp(-0.5 * r * r / var) / sqrt(2.0 * core::f64::consts::PI * var)
}

/// Scaled forward-backward pass. Returns the log-likelihood, state posteriors and
/// summed transition posteriors.
fn e_step(y: &[f64], m: &Model) -> (f64, Vec<[f64; 2]>, [[f64; 2]; 2]) {
    let n = y.len();
    let mut alpha = alloc::vec![[0.0; 2]; n];
    let mut scale = alloc::vec![0.0; n];
    let mut emit = alloc::vec![[0.0; 2]; n];
    for k in 0..n {
        emit[k] = [density(y[k], m.mean[0], m.var), density(y[k], m.mean[1], m.var)];
    }
    let mut ll = 0.0;
    for k in 0..n {
        let prior = if k == 0 {
            m.start
        } else {
            let a = alpha[k - 1];
            [a[0] * m.trans[0][0] + a[1] * m.trans[1][0], a[0] * m.trans[0][1] + a[1] * m.trans[1][1]]
        };
        let un = [prior[0] * emit[k][0], prior[1] * emit[k][1]];
        let c = (un[0] + un[1]).max(f64::MIN_POSITIVE);
        scale[k] = c;
        alpha[k] = [un[0] / c, un[1] / c];
        ll += log(c);
    }
    let mut beta = [1.0, 1.0];
    let mut gamma = alloc::vec![[0.0; 2]; n];
    let mut xi = [[0.0; 2]; 2];
    gamma[n - 1] = alpha[n - 1];
    for k in (0..n - 1).rev() {
        let nb = [emit[k + 1][0] * beta[0] / scale[k + 1], emit[k + 1][1] * beta[1] / scale[k + 1]];
        for i in 0..2 {
            for j in 0..2 {
                xi[i][j] += alpha[k][i] * m.trans[i][j] * nb[j];
            }
        }
        beta = [
            m.trans[0][0] * nb[0] + m.trans[0][1] * nb[1],
            m.trans[1][0] * nb[0] + m.trans[1][1] * nb[1],
        ];
        let g = [alpha[k][0] * beta[0], alpha[k][1] * beta[1]];
        let s = g[0] + g[1];
        gamma[k] = [g[0] / s, g[1] / s];
    }
    (ll, gamma, xi)
}

fn m_step(y: &[f64], gamma: &[[f64; 2]], xi: &[[f64; 2]; 2], prev: &Model) -> Model {
    let mut mean = prev.mean;
    let mut weight = [0.0; 2];
    let mut sums = [0.0; 2];
    for (g, v) in gamma.iter().zip(y) {
        for i in 0..2 {
            weight[i] += g[i];
            sums[i] += g[i] * v;
        }
    }
    for i in 0..2 {
        if weight[i] > 1e-12 {
            mean[i] = sums[i] / weight[i];
        }
    }
    let ss: f64 = gamma
        .iter()
        .zip(y)
        .map(|(g, v)| g[0] * (v - mean[0]) * (v - mean[0]) + g[1] * (v - mean[1]) * (v - mean[1]))
        .sum();
    let var = (ss / y.len() as f64).max(f64::MIN_POSITIVE);
    let mut trans = prev.trans;
    for i in 0..2 {
        let row = xi[i][0] + xi[i][1];
        if row > 0.0 {
            trans[i] = [xi[i][0] / row, xi[i][1] / row];
        }
    }
    Model { mean, var, trans, start: gamma[0] }
}

/// EM estimate from a surplus path sampled every `dt`. Regime 1 is the state with the
/// larger fitted drift. Non-convergence is reported through the diagnostics.
pub fn em_estimate(surplus: &[f64], dt: f64, cfg: &EmConfig, deltas: (f64, f64)) -> Result<EstimationReport> {
    if surplus.len() < 3 {
        return Err(Error::config("EM needs at least two increments"));
    }
    let y: Vec<f64> = surplus.windows(2).map(|w| w[1] - w[0]).collect();
    let n = y.len();

    // Two-quantile split of the sorted increments.
    let mut sorted = y.clone();
    sorted.sort_by(f64::total_cmp);
    let half = n / 2;
    let lo = &sorted[..half.max(1)];
    let hi = &sorted[half.min(n - 1)..];
    let mean_of = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let (m_hi, m_lo) = (mean_of(hi), mean_of(lo));
    let ss: f64 = hi.iter().map(|v| (v - m_hi) * (v - m_hi)).sum::<f64>()
        + lo.iter().map(|v| (v - m_lo) * (v - m_lo)).sum::<f64>();
    let stay = cfg.initial_persistence;
    let mut model = Model {
        mean: [m_hi, m_lo],
        var: (ss / n as f64).max(f64::MIN_POSITIVE),
        trans: [[stay, 1.0 - stay], [1.0 - stay, stay]],
        start: [0.5, 0.5],
    };

    let mut trace = Vec::new();
    let mut converged = false;
    let mut gamma = Vec::new();
    for _ in 0..cfg.max_iterations {
        let (ll, g, xi) = e_step(&y, &model);
        let done = trace.last().is_some_and(|&prev: &f64| (ll - prev).abs() <= cfg.tol * (1.0 + ll.abs()));
        trace.push(ll);
        gamma = g;
        if done {
            converged = true;
            break;
        }
        model = m_step(&y, &gamma, &xi, &model);
    }

    let (one, two) = if model.mean[0] >= model.mean[1] { (0, 1) } else { (1, 0) };
    let labels = gamma.iter().map(|g| if g[one] >= g[two] { 1 } else { 2 }).collect();
    let estimates = EnvParams {
        mu1: model.mean[one] / dt,
        mu2: model.mean[two] / dt,
        sigma: sqrt(model.var / dt),
        q12: model.trans[one][two] / dt,
        q21: model.trans[two][one] / dt,
        delta1: deltas.0,
        delta2: deltas.1,
    };
    let diagnostics = Diagnostics {
        em_iterations: trace.len(),
        em_converged: converged,
        log_likelihood: trace,
        ..Diagnostics::default()
    };
    Ok(EstimationReport { estimates, labels, method: Method::Em, diagnostics })
}
