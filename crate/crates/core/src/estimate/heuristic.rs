//! Window-threshold regime classification followed by plug-in estimates.

use alloc::vec::Vec;

use libm::sqrt;
use serde::{Deserialize, Serialize};

use super::{Diagnostics, EstimationReport, Method, PartialEstimates};
use crate::error::{Error, Result};
use crate::num::median_in_place;
use crate::params::EnvParams;

/// Scales a median absolute deviation to a Gaussian standard deviation.
const MAD_TO_SD: f64 = 1.4826;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeuristicConfig {
    /// Lookback in steps.
    pub lookback: usize,
    pub eta_u: f64,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        HeuristicConfig { lookback: 252, eta_u: 0.15 }
    }
}

/// Estimates (mu1, mu2, sigma, q12, q21) from a surplus path sampled every `dt`.
/// Discount rates are copied from `deltas`.
pub fn heuristic_estimate(surplus: &[f64], dt: f64, cfg: &HeuristicConfig, deltas: (f64, f64)) -> Result<EstimationReport> {
    if surplus.len() <= cfg.lookback + 1 {
        return Err(Error::config("path must be longer than the lookback window"));
    }
    let k_len = surplus.len() - 1;
    let dx: Vec<f64> = surplus.windows(2).map(|w| w[1] - w[0]).collect();

    let mut scratch = dx.clone();
    let med = median_in_place(&mut scratch);
    for (s, d) in scratch.iter_mut().zip(&dx) {
        *s = (d - med).abs();
    }
    let mad = median_in_place(&mut scratch);
    let pilot = MAD_TO_SD * mad / sqrt(dt);
    let threshold = cfg.eta_u * pilot * sqrt(cfg.lookback as f64 * dt);

    let labels: Vec<u8> = (0..k_len)
        .map(|k| {
            let change = surplus[k] - surplus[k.saturating_sub(cfg.lookback)];
            if change >= threshold && change > 0.0 {
                1
            } else if change <= -threshold && change < 0.0 {
                2
            } else {
                0
            }
        })
        .collect();

    let mut diagnostics = Diagnostics { forward_filled: true, ..Diagnostics::default() };
    let mut sums = [0.0; 2];
    let mut counts = [0usize; 2];
    for (l, d) in labels.iter().zip(&dx) {
        match l {
            1 | 2 => {
                sums[*l as usize - 1] += d;
                counts[*l as usize - 1] += 1;
            }
            _ => diagnostics.unlabeled += 1,
        }
    }
    diagnostics.labeled_regime1 = counts[0];
    diagnostics.labeled_regime2 = counts[1];
    let mu = [0, 1].map(|i| (counts[i] > 0).then(|| sums[i] / (dt * counts[i] as f64)));

    let mut partial = PartialEstimates { mu1: mu[0], mu2: mu[1], ..PartialEstimates::default() };

    // Forward-fill unlabeled steps, then back-fill the head.
    let mut filled = labels.clone();
    let mut last = 0u8;
    for l in filled.iter_mut() {
        if *l == 0 {
            *l = last;
        } else {
            last = *l;
        }
    }
    if let Some(first) = filled.iter().copied().find(|&l| l != 0) {
        for l in filled.iter_mut().take_while(|l| **l == 0) {
            *l = first;
        }
    }

    if filled.iter().all(|&l| l != 0) {
        let ss: f64 = filled
            .iter()
            .zip(&dx)
            .map(|(l, d)| {
                let r = d - mu[*l as usize - 1].unwrap_or(0.0) * dt;
                r * r
            })
            .sum();
        partial.sigma = Some(sqrt(ss / (k_len as f64 * dt)));
    }

    // Holding times over maximal runs that do not touch either end of the path.
    let mut hold = [0.0; 2];
    let mut runs = [0usize; 2];
    let mut start = 0;
    while start < filled.len() {
        let mut end = start;
        while end + 1 < filled.len() && filled[end + 1] == filled[start] {
            end += 1;
        }
        let censored = start == 0 || end + 1 == filled.len();
        if filled[start] != 0 {
            if censored {
                diagnostics.censored_runs += 1;
            } else {
                let r = filled[start] as usize - 1;
                hold[r] += (end - start + 1) as f64 * dt;
                runs[r] += 1;
            }
        }
        start = end + 1;
    }
    diagnostics.runs_regime1 = runs[0];
    diagnostics.runs_regime2 = runs[1];
    if runs[0] > 0 {
        partial.q12 = Some(runs[0] as f64 / hold[0]);
    }
    if runs[1] > 0 {
        partial.q21 = Some(runs[1] as f64 / hold[1]);
    }

    for (regime, ok) in [(1u8, counts[0] > 0 && runs[0] > 0), (2u8, counts[1] > 0 && runs[1] > 0)] {
        if !ok {
            return Err(Error::EstimationDegenerate { regime, partial });
        }
    }
    let estimates = EnvParams {
        mu1: partial.mu1.unwrap_or_default(),
        mu2: partial.mu2.unwrap_or_default(),
        sigma: partial.sigma.unwrap_or_default(),
        q12: partial.q12.unwrap_or_default(),
        q21: partial.q21.unwrap_or_default(),
        delta1: deltas.0,
        delta2: deltas.1,
    };
    Ok(EstimationReport { estimates, labels, method: Method::Heuristic, diagnostics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::simulate_path;
    use crate::params::ControlConfig;

    fn cfg() -> ControlConfig {
        ControlConfig { x0: 1.0, ..ControlConfig::default() }
    }

    #[test]
    fn single_regime_path_is_degenerate_but_reports_drift() {
        let env = EnvParams { q12: 0.0, sigma: 0.05, ..EnvParams::default() };
        let c = ControlConfig { p0: 1.0 - 1e-12, ..cfg() };
        let path = simulate_path(&env, &c, 252 * 20, 0.0, 4, 0).unwrap();
        match heuristic_estimate(&path.surplus, c.dt, &HeuristicConfig::default(), (0.1, 0.3)) {
            Err(Error::EstimationDegenerate { regime, partial }) => {
                assert_eq!(regime, 1);
                let mu1 = partial.mu1.unwrap();
                assert!((mu1 / 1.2 - 1.0).abs() < 0.05, "{mu1}");
                assert_eq!(partial.mu2, None);
            }
            other => panic!("expected degenerate estimate, got {other:?}"),
        }
    }

    #[test]
    fn labels_ignore_level_shift_and_scale() {
        // Slow switching so that both regimes last longer than the lookback window.
        let env = EnvParams { mu2: -0.8, q12: 0.3, q21: 0.3, ..EnvParams::default() };
        let c = ControlConfig { ruin_eps: f64::NEG_INFINITY, ..cfg() };
        let path = simulate_path(&env, &c, 252 * 20, 0.0, 8, 2).unwrap();
        let base = heuristic_estimate(&path.surplus, 1.0 / 252.0, &HeuristicConfig::default(), (0.1, 0.3));
        let shifted: Vec<f64> = path.surplus.iter().map(|x| x + 17.0).collect();
        let scaled: Vec<f64> = path.surplus.iter().map(|x| x * 3.0).collect();
        let a = base.unwrap();
        let b = heuristic_estimate(&shifted, 1.0 / 252.0, &HeuristicConfig::default(), (0.1, 0.3)).unwrap();
        let c = heuristic_estimate(&scaled, 1.0 / 252.0, &HeuristicConfig::default(), (0.1, 0.3)).unwrap();
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.labels, c.labels);
        assert!((c.estimates.mu1 - 3.0 * a.estimates.mu1).abs() < 1e-9 * a.estimates.mu1.abs().max(1.0));
        assert!((c.estimates.sigma - 3.0 * a.estimates.sigma).abs() < 1e-9);
        assert!((c.estimates.q12 - a.estimates.q12).abs() < 1e-9);
    }

    #[test]
    fn too_short_path_is_rejected() {
        assert!(heuristic_estimate(&[0.0; 100], 1.0 / 252.0, &HeuristicConfig::default(), (0.1, 0.3)).is_err());
    }
}
