use libm::sqrt;

use crate::error::{Error, Result};

/// Positive root of `f2 k^2 + f1 k + f0 = 0` under the admissibility conditions
/// `f2 f0 < 0`, or `f2 f0 >= 0` with a real pair of roots and `f1 < 0`. In the second case
/// the larger root is returned. Uses the cancellation-free two-step formula.
pub fn kappa_from_quadratic(f2: f64, f1: f64, f0: f64) -> Result<f64> {
    let disc = f1 * f1 - 4.0 * f2 * f0;
    let fail = || Error::NoPositiveRoot { f2, f1, f0, discriminant: disc };
    if !(f2.is_finite() && f1.is_finite() && f0.is_finite()) {
        return Err(fail());
    }
    let prod = f2 * f0;
    let admissible = prod < 0.0 || (disc >= 0.0 && f1 < 0.0);
    if !admissible {
        return Err(fail());
    }
    if f2 == 0.0 {
        let k = -f0 / f1;
        return if k > 0.0 && k.is_finite() { Ok(k) } else { Err(fail()) };
    }
    let root = sqrt(disc.max(0.0));
    let q = -0.5 * (f1 + if f1 >= 0.0 { root } else { -root });
    if q == 0.0 {
        return Err(fail());
    }
    let k = (q / f2).max(f0 / q);
    if k > 0.0 && k.is_finite() {
        Ok(k)
    } else {
        Err(fail())
    }
}

/// Derivative of the selected root `kappa` given derivatives of the three coefficients,
/// by implicit differentiation.
pub fn kappa_sensitivity(f2: f64, f1: f64, kappa: f64, d_f2: f64, d_f1: f64, d_f0: f64) -> f64 {
    -(kappa * kappa * d_f2 + kappa * d_f1 + d_f0) / (2.0 * f2 * kappa + f1)
}
