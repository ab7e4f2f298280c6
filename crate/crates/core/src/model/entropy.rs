//! The optimized entropy-regularized dividend term f_lambda, the Gibbs policy it induces,
//! and the per-step entropy reward used by the learner.
//!
//! Everything is written in terms of u = cap_a * (1 - y) / lambda, the exponent of the
//! truncated-exponential density, so the y = 1 limit becomes u = 0.

use libm::{exp, expm1, log, log1p};

use crate::error::{Error, Result};

/// Width of the neighbourhood of y = 1 (u = 0) where series branches replace the closed
/// forms.
pub const BRANCH_TOL: f64 = 1e-8;

/// ln((e^u - 1) / u), total on the real line.
fn log_expm1_ratio(u: f64) -> f64 {
    if u.abs() < BRANCH_TOL {
        u / 2.0 + u * u / 24.0
    } else if u > 0.0 {
        // e^u overflows past 709; factor it out.
        u + log(-expm1(-u)) - log(u)
    } else {
        log(expm1(u) / u)
    }
}

/// 1 - 1/u + 1/(e^u - 1): the mean of the Gibbs density as a fraction of cap_a.
fn mean_fraction(u: f64) -> f64 {
    // The closed form loses about |ln u| digits near zero, so the series covers a
    // wider band than BRANCH_TOL.
    if u.abs() < 0.05 {
        let u2 = u * u;
        0.5 + u * (1.0 / 12.0 + u2 * (-1.0 / 720.0 + u2 * (1.0 / 30240.0 - u2 / 1209600.0)))
    } else if u > 0.0 {
        1.0 - 1.0 / u + 1.0 / expm1(u)
    } else {
        -1.0 / expm1(-u) - 1.0 / u
    }
}

/// 1/u^2 - e^u/(e^u - 1)^2, the variance of the Gibbs density over cap_a^2.
fn variance_fraction(u: f64) -> f64 {
    if u.abs() < 0.1 {
        let u2 = u * u;
        1.0 / 12.0
            + u2 * (-1.0 / 240.0 + u2 * (1.0 / 6048.0 + u2 * (-1.0 / 172800.0 + u2 / 5322240.0)))
    } else {
        let t = u.abs();
        let em = expm1(-t);
        1.0 / (u * u) - exp(-t) / (em * em)
    }
}

fn exponent(y: f64, lambda: f64, cap_a: f64) -> f64 {
    cap_a * (1.0 - y) / lambda
}

/// f_lambda(y) = lambda ln( lambda (e^{a(1-y)/lambda} - 1) / (1 - y) ), equal to
/// lambda ln a at y = 1.
pub fn f_lambda(y: f64, lambda: f64, cap_a: f64) -> f64 {
    let u = exponent(y, lambda, cap_a);
    lambda * (log(cap_a) + log_expm1_ratio(u))
}

/// Derivative of [`f_lambda`]; lies in (-cap_a, 0) and equals -cap_a/2 at y = 1.
pub fn f_lambda_prime(y: f64, lambda: f64, cap_a: f64) -> f64 {
    -cap_a * mean_fraction(exponent(y, lambda, cap_a))
}

/// Second derivative of [`f_lambda`]; positive, equal to cap_a^2 / (12 lambda) at y = 1.
pub fn f_lambda_second(y: f64, lambda: f64, cap_a: f64) -> f64 {
    cap_a * cap_a / lambda * variance_fraction(exponent(y, lambda, cap_a))
}

/// Truncated-exponential policy density on [0, cap_a] with exponent
/// `one_minus_vx / lambda`.
pub fn gibbs_density(u: f64, one_minus_vx: f64, lambda: f64, cap_a: f64) -> Result<f64> {
    if !(0.0..=cap_a).contains(&u) {
        return Err(Error::Domain { what: "action", value: u });
    }
    let rate = one_minus_vx / lambda;
    let t = rate * cap_a;
    Ok(if one_minus_vx.abs() < BRANCH_TOL {
        (1.0 + rate * (u - 0.5 * cap_a)) / cap_a
    } else if rate > 0.0 {
        rate * exp(rate * (u - cap_a)) / -expm1(-t)
    } else {
        -rate * exp(rate * u) / -expm1(t)
    })
}

/// Cumulative distribution of [`gibbs_density`].
pub fn gibbs_cdf(u: f64, one_minus_vx: f64, lambda: f64, cap_a: f64) -> f64 {
    let u = u.clamp(0.0, cap_a);
    let rate = one_minus_vx / lambda;
    if one_minus_vx.abs() < BRANCH_TOL {
        u / cap_a
    } else if rate > 0.0 {
        exp(rate * (u - cap_a)) * expm1(-rate * u) / expm1(-rate * cap_a)
    } else {
        expm1(rate * u) / expm1(rate * cap_a)
    }
}

/// Inverse-CDF draw from the Gibbs policy given a uniform `z`.
pub fn sample_action(one_minus_vx: f64, z: f64, lambda: f64, cap_a: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&z) {
        return Err(Error::Domain { what: "uniform draw", value: z });
    }
    let rate = one_minus_vx / lambda;
    let t = rate * cap_a;
    let u = if one_minus_vx.abs() < BRANCH_TOL {
        cap_a * z
    } else if rate > 0.0 {
        cap_a + log(z * -expm1(-t) + exp(-t)) / rate
    } else {
        log1p(z * expm1(t)) / rate
    };
    Ok(if u.is_nan() { cap_a * z } else { u.clamp(0.0, cap_a) })
}

/// Expected entropy-regularized reward of the Gibbs policy at marginal value `vx`,
/// f(vx) - vx f'(vx); equals cap_a/2 + lambda ln cap_a at vx = 1.
pub fn entropy_reward(vx: f64, lambda: f64, cap_a: f64) -> f64 {
    f_lambda(vx, lambda, cap_a) - vx * f_lambda_prime(vx, lambda, cap_a)
}

/// Derivative of [`entropy_reward`] in `vx`; equals -cap_a^2/(12 lambda) at vx = 1.
pub fn entropy_reward_sensitivity(vx: f64, lambda: f64, cap_a: f64) -> f64 {
    -vx * f_lambda_second(vx, lambda, cap_a)
}
