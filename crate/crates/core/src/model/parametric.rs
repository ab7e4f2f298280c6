//! The learner's parametric family: polynomial-exponential g's, the log-scale weight
//! surrogate, the projected kappa's, and their gradients with respect to every parameter.
//!
//! Flattened parameter layout: `[gamma_0..gamma_4 | phi1 | phi2]`, each phi block holding
//! `(m+1)^2` exponents indexed `j * (m+1) + k` for the basis `p^j (1-p)^k`.

use alloc::vec::Vec;

use libm::{exp, log};
use serde::{Deserialize, Serialize};

use super::entropy::{f_lambda, f_lambda_prime};
use super::quadratic::{kappa_from_quadratic, kappa_sensitivity};
use super::weight::{LogWeightShape, WeightGrid};
use crate::error::{Error, Result};
use crate::params::EnvParams;

pub const GAMMA_LEN: usize = 5;

/// Number of basis terms for polynomial order `m`.
pub fn basis_len(m: usize) -> usize {
    (m + 1) * (m + 1)
}

/// Writes the basis `p^j (1-p)^k`, `j, k <= m`, into `out`.
pub fn basis_values(m: usize, p: f64, out: &mut [f64]) {
    let q = 1.0 - p;
    for j in 0..=m {
        let pj = powi(p, j);
        for k in 0..=m {
            out[j * (m + 1) + k] = pj * powi(q, k);
        }
    }
}

fn powi(x: f64, n: usize) -> f64 {
    let mut r = 1.0;
    for _ in 0..n {
        r *= x;
    }
    r
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaParams {
    /// Logs of the surrogates for (sigma^2, mu1, mu2, q21, q12).
    pub gamma: [f64; GAMMA_LEN],
    pub phi1: Vec<f64>,
    pub phi2: Vec<f64>,
    pub poly_order: usize,
}

impl ThetaParams {
    /// Starting point of training: every phi at -3, gamma = (ln 0.07, 0, 0, 0, 0).
    pub fn initial(poly_order: usize) -> Self {
        let n = basis_len(poly_order);
        ThetaParams {
            gamma: [log(0.07), 0.0, 0.0, 0.0, 0.0],
            phi1: alloc::vec![-3.0; n],
            phi2: alloc::vec![-3.0; n],
            poly_order,
        }
    }

    /// Gamma at the logs of a given environment's surrogate targets.
    pub fn gamma_of(env: &EnvParams) -> [f64; GAMMA_LEN] {
        let t = env.surrogate_targets();
        [log(t[0]), log(t[1]), log(t[2]), log(t[3]), log(t[4])]
    }

    pub fn n_basis(&self) -> usize {
        basis_len(self.poly_order)
    }

    pub fn dim(&self) -> usize {
        GAMMA_LEN + 2 * self.n_basis()
    }

    pub fn phi(&self, component: usize) -> &[f64] {
        if component == 1 {
            &self.phi1
        } else {
            &self.phi2
        }
    }

    /// Offset of a component's phi block in the flattened vector.
    pub fn phi_offset(&self, component: usize) -> usize {
        GAMMA_LEN + (component - 1) * self.n_basis()
    }

    pub fn exp_gamma(&self) -> [f64; GAMMA_LEN] {
        self.gamma.map(exp)
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.extend_from_slice(&self.gamma);
        v.extend_from_slice(&self.phi1);
        v.extend_from_slice(&self.phi2);
        v
    }

    pub fn from_slice(poly_order: usize, v: &[f64]) -> Result<Self> {
        let n = basis_len(poly_order);
        if v.len() != GAMMA_LEN + 2 * n {
            return Err(Error::config("parameter vector length does not match polynomial order"));
        }
        let mut gamma = [0.0; GAMMA_LEN];
        gamma.copy_from_slice(&v[..GAMMA_LEN]);
        Ok(ThetaParams {
            gamma,
            phi1: v[GAMMA_LEN..GAMMA_LEN + n].to_vec(),
            phi2: v[GAMMA_LEN + n..].to_vec(),
            poly_order,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_basis();
        if self.phi1.len() != n || self.phi2.len() != n {
            return Err(Error::config("phi blocks must hold (m+1)^2 entries"));
        }
        if self.to_vec().iter().any(|v| !v.is_finite()) {
            return Err(Error::config("parameters must be finite"));
        }
        Ok(())
    }

    pub fn weight_shape(&self) -> LogWeightShape {
        let e = self.exp_gamma();
        let spread = e[1] - e[2];
        let beta0 = spread * spread / e[0];
        LogWeightShape { beta0, beta1: 2.0 * (e[3] - e[4]) / beta0, c_up: e[3], c_down: e[4] }
    }
}

/// g_i at belief `p` for the known discount rates `deltas`.
pub fn parametric_g(theta: &ThetaParams, deltas: (f64, f64), lambda: f64, cap_a: f64, p: f64, component: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain { what: "belief", value: p });
    }
    let delta = if component == 1 { deltas.0 } else { deltas.1 };
    let scale = f_lambda(0.0, lambda, cap_a) / delta;
    let mut b = alloc::vec![0.0; theta.n_basis()];
    basis_values(theta.poly_order, p, &mut b);
    Ok(scale * b.iter().zip(theta.phi(component)).map(|(bi, f)| bi * exp(*f)).sum::<f64>())
}

/// g_i at `p` with `scale = f_lambda(0) / delta_i`; writes d g_i / d phi^{(i)} into `out`.
pub fn component_g_with_grad(theta: &ThetaParams, scale: f64, p: f64, component: usize, out: &mut [f64]) -> f64 {
    basis_values(theta.poly_order, p, out);
    let mut g = 0.0;
    for (x, f) in out.iter_mut().zip(theta.phi(component)) {
        *x *= scale * exp(*f);
        g += *x;
    }
    g
}

/// The weight surrogate at interior `p`, normalized by trapezoid quadrature on a grid
/// of `intervals` cells.
pub fn parametric_w(theta: &ThetaParams, p: f64, intervals: usize) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain { what: "belief", value: p });
    }
    let shape = theta.weight_shape();
    shape.validate()?;
    let h = 1.0 / intervals as f64;
    let logs: Vec<f64> = (1..intervals).map(|j| shape.ln_unnormalized(j as f64 * h)).collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mass: f64 = h * logs.iter().map(|v| exp(v - top)).sum::<f64>();
    Ok(exp(shape.ln_unnormalized(p) - top) / mass)
}

/// One component's projected decay rate with its sensitivities.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentKappa {
    pub kappa: f64,
    /// (F2, F1, F0).
    pub f: [f64; 3],
    /// d(F2, F1, F0)/d gamma.
    pub df_dgamma: [[f64; GAMMA_LEN]; 3],
    /// d(F2, F1, F0)/d phi of this component.
    pub df_dphi: [Vec<f64>; 3],
    pub dkappa_dgamma: [f64; GAMMA_LEN],
    pub dkappa_dphi: Vec<f64>,
}

/// A parameter vector compiled into everything the value surface needs.
#[derive(Clone, Debug)]
pub struct ParamModel {
    pub theta: ThetaParams,
    pub deltas: (f64, f64),
    pub lambda: f64,
    pub cap_a: f64,
    pub f0: f64,
    pub components: [ComponentKappa; 2],
    /// Weight surrogate on the quadrature grid.
    pub weight: WeightGrid,
    /// d ln w / d gamma_j on the quadrature grid (zero at the endpoints).
    pub xi: [Vec<f64>; GAMMA_LEN],
}

/// Partial derivatives of (beta0, beta1, c_up, c_down) in each gamma coordinate.
fn shape_sensitivities(e: &[f64; GAMMA_LEN], shape: &LogWeightShape) -> [[f64; 4]; GAMMA_LEN] {
    let spread = e[1] - e[2];
    let b0 = shape.beta0;
    let db0 = [-b0, 2.0 * e[1] * b0 / spread, -2.0 * e[2] * b0 / spread, 0.0, 0.0];
    let mut out = [[0.0; 4]; GAMMA_LEN];
    for j in 0..GAMMA_LEN {
        let dc_up = if j == 3 { e[3] } else { 0.0 };
        let dc_down = if j == 4 { e[4] } else { 0.0 };
        let db1 = -shape.beta1 / b0 * db0[j] + 2.0 * (dc_up - dc_down) / b0;
        out[j] = [db0[j], db1, dc_up, dc_down];
    }
    out
}

impl ParamModel {
    /// Compiles `theta`. `intervals` is the quadrature grid size.
    pub fn new(theta: &ThetaParams, deltas: (f64, f64), lambda: f64, cap_a: f64, intervals: usize) -> Result<Self> {
        theta.validate()?;
        let m = theta.poly_order;
        let nb = theta.n_basis();
        let e = theta.exp_gamma();
        let shape = theta.weight_shape();
        let weight = WeightGrid::new(&shape, intervals)?;
        let h = weight.step;
        let f0 = f_lambda(0.0, lambda, cap_a);
        let fp0 = f_lambda_prime(0.0, lambda, cap_a);
        let sens = shape_sensitivities(&e, &shape);
        let b0 = shape.beta0;

        // xi_j before centering, and its p-derivative.
        let mut xi: [Vec<f64>; GAMMA_LEN] = core::array::from_fn(|_| alloc::vec![0.0; intervals + 1]);
        let mut dxi: [Vec<f64>; GAMMA_LEN] = core::array::from_fn(|_| alloc::vec![0.0; intervals + 1]);
        for j in 1..intervals {
            let p = j as f64 * h;
            let q = 1.0 - p;
            let odds = log(p) - log(q);
            let inv = shape.c_up / p + shape.c_down / q;
            let dinv = -shape.c_up / (p * p) + shape.c_down / (q * q);
            for (g, s) in sens.iter().enumerate() {
                let [db0, db1, dcu, dcd] = *s;
                xi[g][j] = -db0 / b0 + db1 * odds + 2.0 * db0 / (b0 * b0) * inv
                    - 2.0 / b0 * (dcu / p + dcd / q);
                dxi[g][j] = db1 * (1.0 / p + 1.0 / q) + 2.0 * db0 / (b0 * b0) * dinv
                    - 2.0 / b0 * (-dcu / (p * p) + dcd / (q * q));
            }
        }
        for g in 0..GAMMA_LEN {
            // d ln K / d gamma_j keeps the discrete normalization exact.
            let mean: f64 = h * (1..intervals).map(|j| weight.w[j] * xi[g][j]).sum::<f64>();
            for j in 1..intervals {
                xi[g][j] -= mean;
            }
        }

        // Basis moments against the weight and its sensitivities.
        let mut m2 = alloc::vec![0.0; nb];
        let mut m0 = alloc::vec![0.0; nb];
        let mut mphi = alloc::vec![0.0; nb];
        let mut md = alloc::vec![0.0; nb];
        let mut m2g = alloc::vec![[0.0f64; GAMMA_LEN]; nb];
        let mut m0g = m2g.clone();
        let mut mphig = m2g.clone();
        let mut mdg = m2g.clone();
        let mut mdd = m2g.clone();
        let mut basis = alloc::vec![0.0; nb];
        let spread = e[1] - e[2];
        for j in 1..intervals {
            let w = weight.w[j];
            let phi = weight.phi[j];
            if w == 0.0 && phi == 0.0 {
                continue;
            }
            let p = j as f64 * h;
            let q = 1.0 - p;
            basis_values(m, p, &mut basis);
            let c = deltas.0 * p + deltas.1 * q;
            let drift = fp0 + e[1] * p + e[2] * q;
            let flux = p * q * w;
            let mut dphi = [0.0; GAMMA_LEN];
            for g in 0..GAMMA_LEN {
                dphi[g] = phi * xi[g][j] + flux * dxi[g][j];
            }
            for r in 0..nb {
                let bw = basis[r] * w;
                m2[r] += bw;
                m0[r] += c * bw;
                mphi[r] += basis[r] * phi;
                md[r] += drift * bw;
                for g in 0..GAMMA_LEN {
                    let bwx = bw * xi[g][j];
                    m2g[r][g] += bwx;
                    m0g[r][g] += c * bwx;
                    mphig[r][g] += basis[r] * dphi[g];
                    mdg[r][g] += drift * bwx;
                }
                mdd[r][1] += e[1] * p * bw;
                mdd[r][2] += e[2] * q * bw;
            }
        }
        let scale_all = |v: &mut Vec<f64>| v.iter_mut().for_each(|x| *x *= h);
        scale_all(&mut m2);
        scale_all(&mut m0);
        scale_all(&mut mphi);
        scale_all(&mut md);
        for arr in [&mut m2g, &mut m0g, &mut mphig, &mut mdg, &mut mdd] {
            for row in arr.iter_mut() {
                for x in row.iter_mut() {
                    *x *= h;
                }
            }
        }

        let build = |component: usize| -> Result<ComponentKappa> {
            let delta = if component == 1 { deltas.0 } else { deltas.1 };
            let coef: Vec<f64> = theta.phi(component).iter().map(|&f| f0 / delta * exp(f)).collect();
            let dot = |a: &[f64]| coef.iter().zip(a).map(|(c, x)| c * x).sum::<f64>();
            let dotg = |a: &[[f64; GAMMA_LEN]], g: usize| coef.iter().zip(a).map(|(c, x)| c * x[g]).sum::<f64>();
            let f2 = 0.5 * e[0] * dot(&m2);
            let f0c = -dot(&m0);
            let int_phi = dot(&mphi);
            let f1 = spread * int_phi - dot(&md);
            let kappa = kappa_from_quadratic(f2, f1, f0c)?;

            let mut df_dgamma = [[0.0; GAMMA_LEN]; 3];
            for g in 0..GAMMA_LEN {
                let d_spread = match g {
                    1 => e[1],
                    2 => -e[2],
                    _ => 0.0,
                };
                df_dgamma[0][g] = if g == 0 { f2 } else { 0.0 } + 0.5 * e[0] * dotg(&m2g, g);
                df_dgamma[1][g] = d_spread * int_phi + spread * dotg(&mphig, g) - dotg(&mdd, g) - dotg(&mdg, g);
                df_dgamma[2][g] = -dotg(&m0g, g);
            }
            let df_dphi = [
                (0..nb).map(|r| 0.5 * e[0] * coef[r] * m2[r]).collect::<Vec<_>>(),
                (0..nb).map(|r| coef[r] * (spread * mphi[r] - md[r])).collect(),
                (0..nb).map(|r| -coef[r] * m0[r]).collect(),
            ];
            let sens = |d2: f64, d1: f64, d0: f64| kappa_sensitivity(f2, f1, kappa, d2, d1, d0);
            let dkappa_dgamma = core::array::from_fn(|g| sens(df_dgamma[0][g], df_dgamma[1][g], df_dgamma[2][g]));
            let dkappa_dphi = (0..nb).map(|r| sens(df_dphi[0][r], df_dphi[1][r], df_dphi[2][r])).collect();
            Ok(ComponentKappa { kappa, f: [f2, f1, f0c], df_dgamma, df_dphi, dkappa_dgamma, dkappa_dphi })
        };
        let components = [build(1)?, build(2)?];
        Ok(ParamModel { theta: theta.clone(), deltas, lambda, cap_a, f0, components, weight, xi })
    }

    pub fn kappa(&self, component: usize) -> f64 {
        self.components[component - 1].kappa
    }

    fn scale(&self, component: usize) -> f64 {
        self.f0 / if component == 1 { self.deltas.0 } else { self.deltas.1 }
    }

    /// g_1(p), g_2(p).
    pub fn g(&self, p: f64) -> [f64; 2] {
        const STACK: usize = 36;
        let nb = self.theta.n_basis();
        let mut stack = [0.0; STACK];
        let mut heap = Vec::new();
        let b = if nb <= STACK {
            &mut stack[..nb]
        } else {
            heap.resize(nb, 0.0);
            &mut heap[..]
        };
        basis_values(self.theta.poly_order, p, b);
        [1, 2].map(|i| self.scale(i) * b.iter().zip(self.theta.phi(i)).map(|(x, f)| x * exp(*f)).sum::<f64>())
    }

    /// Writes d g_i / d phi^{(i)} at `p` into `out` (length n_basis) and returns g_i.
    pub fn g_with_grad(&self, p: f64, component: usize, out: &mut [f64]) -> f64 {
        component_g_with_grad(&self.theta, self.scale(component), p, component, out)
    }

    /// Value and marginal value at (x, p).
    pub fn value(&self, x: f64, p: f64) -> (f64, f64) {
        let g = self.g(p);
        super::surface::value_surface(
            &super::surface::SurfaceTerms { g, kappa: [self.kappa(1), self.kappa(2)] },
            x,
        )
    }

    /// Value, marginal value and their gradients in the flattened parameter layout.
    pub fn value_with_grad(&self, x: f64, p: f64, grad_v: &mut [f64], grad_vx: &mut [f64]) -> (f64, f64) {
        let dim = self.theta.dim();
        debug_assert!(grad_v.len() == dim && grad_vx.len() == dim);
        grad_v.iter_mut().for_each(|v| *v = 0.0);
        grad_vx.iter_mut().for_each(|v| *v = 0.0);
        let nb = self.theta.n_basis();
        let mut v = 0.0;
        let mut vx = 0.0;
        let mut dg = alloc::vec![0.0; nb];
        for i in 1..=2 {
            let comp = &self.components[i - 1];
            let k = comp.kappa;
            let g = self.g_with_grad(p, i, &mut dg);
            let decay = exp(-k * x);
            v += g * (1.0 - decay);
            vx += g * k * decay;
            // d/d kappa of v and vx
            let dv_dk = g * x * decay;
            let dvx_dk = g * decay * (1.0 - k * x);
            for gi in 0..GAMMA_LEN {
                grad_v[gi] += dv_dk * comp.dkappa_dgamma[gi];
                grad_vx[gi] += dvx_dk * comp.dkappa_dgamma[gi];
            }
            let off = self.theta.phi_offset(i);
            for r in 0..nb {
                grad_v[off + r] += dg[r] * (1.0 - decay) + dv_dk * comp.dkappa_dphi[r];
                grad_vx[off + r] += dg[r] * k * decay + dvx_dk * comp.dkappa_dphi[r];
            }
        }
        (v, vx)
    }
}
