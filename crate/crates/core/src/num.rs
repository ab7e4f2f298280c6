//! Small numerical kernels: quadrature, tridiagonal solves, order-independent sums.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Composite trapezoid rule for samples on a uniform grid of spacing `h`.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = values[1..n - 1].iter().sum();
            h * (inner + 0.5 * (values[0] + values[n - 1]))
        }
    }
}

/// Trapezoid rule of the pointwise product `a * b`.
pub fn trapezoid_product(a: &[f64], b: &[f64], h: f64) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    if n < 2 {
        return 0.0;
    }
    let mut s = 0.5 * (a[0] * b[0] + a[n - 1] * b[n - 1]);
    for j in 1..n - 1 {
        s += a[j] * b[j];
    }
    h * s
}

/// Solves `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`.
/// `lower[0]` and `upper[n-1]` are ignored.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    debug_assert!(lower.len() == n && upper.len() == n && rhs.len() == n);
    let mut c_star = alloc::vec![0.0; n];
    let mut d_star = alloc::vec![0.0; n];
    let mut denom = diag[0];
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::SingularSystem { row: 0 });
    }
    c_star[0] = if n > 1 { upper[0] / denom } else { 0.0 };
    d_star[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * c_star[i - 1];
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::SingularSystem { row: i });
        }
        if i + 1 < n {
            c_star[i] = upper[i] / denom;
        }
        d_star[i] = (rhs[i] - lower[i] * d_star[i - 1]) / denom;
    }
    let mut x = d_star;
    for i in (0..n - 1).rev() {
        x[i] -= c_star[i] * x[i + 1];
    }
    Ok(x)
}

/// ln(1 + e^x) without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + libm::log1p(libm::exp(-x))
    } else {
        libm::log1p(libm::exp(x))
    }
}

/// Sum whose result does not depend on the order of `values`.
pub fn order_free_sum(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum()
}

/// Median; sorts the input in place. NaN-free input assumed.
pub fn median_in_place(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Euclidean norm.
pub fn norm2(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}
