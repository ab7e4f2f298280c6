//! Discretized Wonham filter in log coordinates.

use libm::{exp, log};
use serde::{Deserialize, Serialize};

use crate::num::softplus;
use crate::params::EnvParams;

/// Floor for the log coordinates; keeps e^{-l} finite.
pub const LOG_FLOOR: f64 = -700.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeliefState {
    pub log_p1: f64,
    pub log_p2: f64,
}

impl BeliefState {
    pub fn new(p: f64) -> Self {
        let p = p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
        BeliefState { log_p1: log(p).max(LOG_FLOOR), log_p2: libm::log1p(-p).max(LOG_FLOOR) }
    }

    /// Probability of regime 1, strictly inside (0, 1).
    pub fn p(&self) -> f64 {
        let p = 1.0 / (1.0 + exp(self.log_p2 - self.log_p1));
        p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
    }
}

/// Innovation increment (dx - mu_hat dt) / sigma, with mu_hat the belief-weighted drift.
/// `dx` must already exclude any known control drift.
pub fn innovation_increment(dx: f64, p_prev: f64, env: &EnvParams, dt: f64) -> f64 {
    (dx - env.filtered_drift(p_prev) * dt) / env.sigma
}

/// One Euler-Maruyama step of both log coordinates, renormalized so that
/// `exp(log_p1) + exp(log_p2) = 1`.
pub fn wonham_step(belief: &BeliefState, dw_hat: f64, env: &EnvParams, dt: f64) -> BeliefState {
    let s = env.snr();
    let total = env.q12 + env.q21;
    let (l1, l2) = (belief.log_p1, belief.log_p2);
    let r1 = 1.0 - exp(l1);
    let r2 = 1.0 - exp(l2);
    let n1 = l1 + (env.q21 * exp(-l1) - total - 0.5 * s * s * r1 * r1) * dt + s * r1 * dw_hat;
    let n2 = l2 + (env.q12 * exp(-l2) - total - 0.5 * s * s * r2 * r2) * dt - s * r2 * dw_hat;
    // log-softmax of the updated pair
    BeliefState {
        log_p1: (-softplus(n2 - n1)).max(LOG_FLOOR),
        log_p2: (-softplus(n1 - n2)).max(LOG_FLOOR),
    }
}

/// Discount increment delta_hat(p) dt.
pub fn filtered_discount_step(p: f64, env: &EnvParams, dt: f64) -> f64 {
    env.filtered_discount(p) * dt
}
