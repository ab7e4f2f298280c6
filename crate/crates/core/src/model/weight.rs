//! The adjoint weight that removes g' terms from the belief-space projection, in the
//! closed form p^{b1-2} (1-p)^{-b1-2} exp(-(2/b0)(c3/p + c4/(1-p))) / b0.

use alloc::vec::Vec;

use libm::{exp, log};

use crate::error::{Error, Result};
use crate::params::EnvParams;

/// Shape constants of the closed-form weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogWeightShape {
    pub beta0: f64,
    pub beta1: f64,
    /// Coefficient of 1/p in the exponent (a transition rate into regime 1).
    pub c_up: f64,
    /// Coefficient of 1/(1-p) in the exponent (a transition rate out of regime 1).
    pub c_down: f64,
}

impl LogWeightShape {
    pub fn from_env(env: &EnvParams) -> Self {
        let beta0 = env.snr() * env.snr();
        LogWeightShape {
            beta0,
            beta1: 2.0 * (env.q21 - env.q12) / beta0,
            c_up: env.q21,
            c_down: env.q12,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta0 > 0.0 && self.beta0.is_finite()) {
            return Err(Error::Domain { what: "weight scale beta0", value: self.beta0 });
        }
        if !self.beta1.is_finite() {
            return Err(Error::Domain { what: "weight exponent beta1", value: self.beta1 });
        }
        Ok(())
    }

    /// Log of the unnormalized weight at interior p.
    pub fn ln_unnormalized(&self, p: f64) -> f64 {
        let q = 1.0 - p;
        -log(self.beta0) + (self.beta1 - 2.0) * log(p) - (self.beta1 + 2.0) * log(q)
            - 2.0 / self.beta0 * (self.c_up / p + self.c_down / q)
    }

    /// d/dp of [`Self::ln_unnormalized`].
    pub fn d_ln(&self, p: f64) -> f64 {
        let q = 1.0 - p;
        (self.beta1 - 2.0) / p + (self.beta1 + 2.0) / q
            + 2.0 / self.beta0 * (self.c_up / (p * p) - self.c_down / (q * q))
    }
}

/// Weight and its flux derivative Phi = (p(1-p)w)' on a uniform grid of `intervals`
/// cells, normalized so the trapezoid integral is one. Endpoint entries are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightGrid {
    pub intervals: usize,
    pub step: f64,
    pub w: Vec<f64>,
    pub phi: Vec<f64>,
}

impl WeightGrid {
    pub fn new(shape: &LogWeightShape, intervals: usize) -> Result<Self> {
        shape.validate()?;
        if intervals < 4 {
            return Err(Error::config("weight grid needs at least 4 intervals"));
        }
        let h = 1.0 / intervals as f64;
        let mut lw = alloc::vec![f64::NEG_INFINITY; intervals + 1];
        let mut top = f64::NEG_INFINITY;
        for j in 1..intervals {
            let v = shape.ln_unnormalized(j as f64 * h);
            lw[j] = v;
            if v > top {
                top = v;
            }
        }
        if !top.is_finite() {
            return Err(Error::Domain { what: "log weight maximum", value: top });
        }
        let mut w: Vec<f64> = lw.iter().map(|&v| if v.is_finite() { exp(v - top) } else { 0.0 }).collect();
        let mass: f64 = h * w.iter().sum::<f64>();
        for v in &mut w {
            *v /= mass;
        }
        let mut phi = alloc::vec![0.0; intervals + 1];
        for j in 1..intervals {
            let p = j as f64 * h;
            if w[j] > 0.0 {
                phi[j] = w[j] * ((1.0 - 2.0 * p) + p * (1.0 - p) * shape.d_ln(p));
            }
        }
        Ok(WeightGrid { intervals, step: h, w, phi })
    }

    pub fn from_env(env: &EnvParams, intervals: usize) -> Result<Self> {
        Self::new(&LogWeightShape::from_env(env), intervals)
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 * self.step
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::coefficients;
    use crate::num::trapezoid;

    #[test]
    fn normalized_positive_and_vanishing_at_ends() {
        let env = EnvParams::default();
        let g = WeightGrid::from_env(&env, 10_000).unwrap();
        assert!((trapezoid(&g.w, g.step) - 1.0).abs() < 1e-8);
        assert!(g.w[1..g.intervals].iter().all(|&v| v > 0.0 || v == 0.0));
        let interior_positive = g.w[100..9900].iter().all(|&v| v > 0.0);
        assert!(interior_positive);
        assert_eq!(g.w[0], 0.0);
        assert!(g.w[1] < 1e-100 && g.w[g.intervals - 1] < 1e-10);
    }

    #[test]
    fn annihilates_first_derivative_terms() {
        // (A w)' = 2 B w, checked with centered differences of A w.
        let env = EnvParams::default();
        let cb = coefficients(&env);
        let mut prev = f64::INFINITY;
        for &m in &[1000usize, 2000, 4000] {
            let g = WeightGrid::from_env(&env, m).unwrap();
            let aw: Vec<f64> = (0..=m).map(|j| cb.a(g.node(j)) * g.w[j]).collect();
            let mut worst: f64 = 0.0;
            for j in 1..m {
                let lhs = (aw[j + 1] - aw[j - 1]) / (2.0 * g.step);
                worst = worst.max((lhs - 2.0 * cb.b(g.node(j)) * g.w[j]).abs());
            }
            // second order: halving the step divides the residual by about 4
            assert!(worst < prev / 3.0, "m={m}: {worst} vs {prev}");
            prev = worst;
        }
    }

    #[test]
    fn phi_is_the_flux_derivative() {
        let env = EnvParams::default();
        let g = WeightGrid::from_env(&env, 4000).unwrap();
        for j in (200..3800).step_by(300) {
            let flux = |k: usize| {
                let p = g.node(k);
                p * (1.0 - p) * g.w[k]
            };
            let fd = (flux(j + 1) - flux(j - 1)) / (2.0 * g.step);
            assert!((fd - g.phi[j]).abs() < 1e-4 * (1.0 + g.phi[j].abs()));
        }
    }

    #[test]
    fn rejects_degenerate_scale() {
        let shape = LogWeightShape { beta0: 0.0, beta1: 1.0, c_up: 1.0, c_down: 1.0 };
        assert!(WeightGrid::new(&shape, 100).is_err());
    }
}
