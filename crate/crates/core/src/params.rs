use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Market environment of the two-regime surplus model. Regime 1 is the bull state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvParams {
    pub mu1: f64,
    pub mu2: f64,
    pub sigma: f64,
    pub q12: f64,
    pub q21: f64,
    pub delta1: f64,
    pub delta2: f64,
}

impl Default for EnvParams {
    fn default() -> Self {
        EnvParams {
            mu1: 1.2,
            mu2: 0.5,
            sigma: 0.3,
            q12: 0.36,
            q21: 2.89,
            delta1: 0.1,
            delta2: 0.3,
        }
    }
}

impl EnvParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.mu1,
            self.mu2,
            self.sigma,
            self.q12,
            self.q21,
            self.delta1,
            self.delta2,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("environment parameters must be finite"));
        }
        if self.mu1 == self.mu2 {
            return Err(Error::config("mu1 and mu2 must differ"));
        }
        if self.sigma <= 0.0 {
            return Err(Error::config("sigma must be positive"));
        }
        if self.q12 <= 0.0 || self.q21 <= 0.0 {
            return Err(Error::config("transition intensities must be positive"));
        }
        if self.delta1 <= 0.0 || self.delta2 <= 0.0 {
            return Err(Error::config("discount rates must be positive"));
        }
        Ok(())
    }

    /// Long-run probability of regime 1.
    pub fn stationary_p1(&self) -> f64 {
        self.q21 / (self.q12 + self.q21)
    }

    /// Signal-to-noise ratio (mu1 - mu2) / sigma of the drift difference.
    pub fn snr(&self) -> f64 {
        (self.mu1 - self.mu2) / self.sigma
    }

    /// Belief-weighted drift.
    pub fn filtered_drift(&self, p: f64) -> f64 {
        (self.mu1 - self.mu2) * p + self.mu2
    }

    /// Belief-weighted discount rate.
    pub fn filtered_discount(&self, p: f64) -> f64 {
        (self.delta1 - self.delta2) * p + self.delta2
    }

    /// The vector (sigma^2, mu1, mu2, q21, q12) targeted by the log-scale surrogates.
    pub fn surrogate_targets(&self) -> [f64; 5] {
        [self.sigma * self.sigma, self.mu1, self.mu2, self.q21, self.q12]
    }
}

/// Control and discretization settings shared by simulation, learning and evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlConfig {
    pub cap_a: f64,
    pub lambda: f64,
    pub horizon_t: f64,
    pub dt: f64,
    pub x0: f64,
    pub p0: f64,
    pub ruin_eps: f64,
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig {
            cap_a: 1.0,
            lambda: 1.0,
            horizon_t: 10.0,
            dt: 1.0 / 252.0,
            x0: 1.0,
            p0: 0.5,
            ruin_eps: 1e-8,
        }
    }
}

impl ControlConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cap_a > 0.0 && self.cap_a.is_finite()) {
            return Err(Error::config("cap_a must be positive"));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::config("lambda must be positive"));
        }
        if !(self.dt > 0.0 && self.horizon_t >= self.dt && self.horizon_t.is_finite()) {
            return Err(Error::config("need dt > 0 and horizon_t >= dt"));
        }
        if !(self.x0 >= 0.0 && self.x0.is_finite()) {
            return Err(Error::config("x0 must be nonnegative"));
        }
        if !(self.p0 > 0.0 && self.p0 < 1.0) {
            return Err(Error::config("p0 must lie strictly inside (0, 1)"));
        }
        if !(self.ruin_eps > 0.0) {
            return Err(Error::config("ruin_eps must be positive"));
        }
        Ok(())
    }

    /// Number of grid steps K1 covering the horizon.
    pub fn n_steps(&self) -> usize {
        libm::round(self.horizon_t / self.dt) as usize
    }
}
