use serde::{Deserialize, Serialize};

use super::entropy::f_lambda;
use crate::error::{Error, Result};
use crate::params::EnvParams;

/// Belief-space coefficients of the reduced equation for g:
/// `A = snr^2 p^2 (1-p)^2`, `B = q21 - (q12 + q21) p`, `C = filtered discount`,
/// `D = filtered drift`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientBundle {
    env: EnvParams,
    snr2: f64,
}

pub fn coefficients(env: &EnvParams) -> CoefficientBundle {
    let s = env.snr();
    CoefficientBundle { env: *env, snr2: s * s }
}

impl CoefficientBundle {
    pub fn a(&self, p: f64) -> f64 {
        let r = p * (1.0 - p);
        self.snr2 * r * r
    }

    pub fn b(&self, p: f64) -> f64 {
        self.env.q21 - (self.env.q12 + self.env.q21) * p
    }

    pub fn c(&self, p: f64) -> f64 {
        self.env.filtered_discount(p)
    }

    pub fn d(&self, p: f64) -> f64 {
        self.env.filtered_drift(p)
    }
}

/// Limits g(0), g(1) of the value as surplus grows, with the regime known to be 2
/// (p = 0) or 1 (p = 1).
pub fn boundary_targets(env: &EnvParams, lambda: f64, cap_a: f64) -> Result<(f64, f64)> {
    let den = (env.delta1 + env.q12) * (env.delta2 + env.q21) - env.q12 * env.q21;
    if !(den > 0.0) {
        return Err(Error::config("boundary-target denominator must be positive"));
    }
    let f0 = f_lambda(0.0, lambda, cap_a);
    let total = env.q12 + env.q21;
    Ok(((env.delta1 + total) * f0 / den, (env.delta2 + total) * f0 / den))
}
