//! Known-parameter benchmark: finite-difference solves for g_1, g_2 on a belief grid,
//! projection onto the kappa quadratics, and the outer fixed point for the endpoint
//! splits.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    basis_len, basis_values, boundary_targets, coefficients, f_lambda, f_lambda_prime, kappa_from_quadratic,
    value_surface, SurfaceTerms, ThetaParams, WeightGrid,
};
use crate::num::{solve_tridiagonal, trapezoid, trapezoid_product};
use crate::params::EnvParams;

/// Peclet number above which the first-derivative term is upwinded.
const PECLET_SWITCH: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PGrid {
    pub intervals: usize,
}

impl PGrid {
    pub fn new(intervals: usize) -> Result<Self> {
        if intervals < 4 {
            return Err(Error::config("belief grid needs at least 4 intervals"));
        }
        Ok(PGrid { intervals })
    }

    pub fn n_points(&self) -> usize {
        self.intervals + 1
    }

    pub fn step(&self) -> f64 {
        1.0 / self.intervals as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 / self.intervals as f64
    }
}

/// Share of component 1 in the boundary targets at p = 0 and p = 1; component 2 takes
/// the complement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Splits {
    pub at0: f64,
    pub at1: f64,
}

impl Splits {
    pub fn component(&self, i: usize) -> (f64, f64) {
        if i == 1 {
            (self.at0, self.at1)
        } else {
            (1.0 - self.at0, 1.0 - self.at1)
        }
    }

    /// Interpolated share of component `i` at belief p.
    pub fn blend(&self, i: usize, p: f64) -> f64 {
        let (s0, s1) = self.component(i);
        (1.0 - p) * s0 + p * s1
    }

    fn validate(&self) -> Result<()> {
        if (0.0..=1.0).contains(&self.at0) && (0.0..=1.0).contains(&self.at1) {
            Ok(())
        } else {
            Err(Error::config("endpoint splits must lie in [0, 1]"))
        }
    }
}

/// Weight and flux derivative on the FD grid.
pub fn adjoint_weight(env: &EnvParams, grid: &PGrid) -> Result<WeightGrid> {
    WeightGrid::from_env(env, grid.intervals)
}

/// Tridiagonal stencil of the interior rows, `(lower, diag, upper)` per node.
pub fn stencil(env: &EnvParams, grid: &PGrid) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<bool>) {
    let cb = coefficients(env);
    let n = grid.n_points();
    let h = grid.step();
    let mut lower = alloc::vec![0.0; n];
    let mut diag = alloc::vec![1.0; n];
    let mut upper = alloc::vec![0.0; n];
    let mut upwind = alloc::vec![false; n];
    for j in 1..grid.intervals {
        let p = grid.node(j);
        let (a, b, c) = (cb.a(p), cb.b(p), cb.c(p));
        let diffusion = a / (2.0 * h * h);
        let peclet = if a > 0.0 { 2.0 * b.abs() * h / a } else { f64::INFINITY };
        diag[j] = -a / (h * h) - c;
        if peclet <= PECLET_SWITCH {
            lower[j] = diffusion - b / (2.0 * h);
            upper[j] = diffusion + b / (2.0 * h);
        } else if b >= 0.0 {
            // difference toward the direction the belief drifts
            lower[j] = diffusion;
            upper[j] = diffusion + b / h;
            diag[j] -= b / h;
            upwind[j] = true;
        } else {
            lower[j] = diffusion - b / h;
            upper[j] = diffusion;
            diag[j] += b / h;
            upwind[j] = true;
        }
    }
    (lower, diag, upper, upwind)
}

/// Solves for (g_1, g_2) on the grid with Dirichlet ends split according to `splits`.
pub fn solve_g_ode(env: &EnvParams, lambda: f64, cap_a: f64, splits: &Splits, grid: &PGrid) -> Result<[Vec<f64>; 2]> {
    splits.validate()?;
    let (g_at0, g_at1) = boundary_targets(env, lambda, cap_a)?;
    let f0 = f_lambda(0.0, lambda, cap_a);
    let (lower, diag, upper, _) = stencil(env, grid);
    let solve = |i: usize| -> Result<Vec<f64>> {
        let (s0, s1) = splits.component(i);
        let mut rhs = alloc::vec![0.0; grid.n_points()];
        rhs[0] = s0 * g_at0;
        rhs[grid.intervals] = s1 * g_at1;
        for (j, r) in rhs.iter_mut().enumerate().take(grid.intervals).skip(1) {
            *r = -splits.blend(i, grid.node(j)) * f0;
        }
        solve_tridiagonal(&lower, &diag, &upper, &rhs)
    };
    Ok([solve(1)?, solve(2)?])
}

/// Projected quadratic coefficients (F2, F1, F0) of component `i`.
pub fn kappa_coefficients(
    g: &[f64],
    weight: &WeightGrid,
    env: &EnvParams,
    lambda: f64,
    cap_a: f64,
    share: impl Fn(f64) -> f64,
) -> [f64; 3] {
    let h = weight.step;
    let f0 = f_lambda(0.0, lambda, cap_a);
    let fp0 = f_lambda_prime(0.0, lambda, cap_a);
    let n = g.len();
    let node = |j: usize| j as f64 * h;
    let shares: Vec<f64> = (0..n).map(|j| share(node(j))).collect();
    let drift_g: Vec<f64> = (0..n).map(|j| (fp0 + env.filtered_drift(node(j))) * g[j]).collect();
    let f2 = 0.5 * env.sigma * env.sigma * trapezoid_product(g, &weight.w, h);
    let f0c = -f0 * trapezoid_product(&shares, &weight.w, h);
    let f1 = (env.mu1 - env.mu2) * trapezoid_product(&weight.phi, g, h) - trapezoid_product(&drift_g, &weight.w, h);
    [f2, f1, f0c]
}

/// Decay rate of component `i` from its solved g.
pub fn project_kappa(
    g: &[f64],
    weight: &WeightGrid,
    env: &EnvParams,
    lambda: f64,
    cap_a: f64,
    splits: &Splits,
    component: usize,
) -> Result<f64> {
    let [f2, f1, f0] = kappa_coefficients(g, weight, env, lambda, cap_a, |p| splits.blend(component, p));
    kappa_from_quadratic(f2, f1, f0)
}

/// Marginal values at x = 0 in the two known-regime limits: (nu_x(0, 1), nu_x(0, 2)).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SlopeTargets {
    pub regime1: f64,
    pub regime2: f64,
}

impl Default for SlopeTargets {
    fn default() -> Self {
        SlopeTargets { regime1: 1.2, regime2: 1.6 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FdConfig {
    pub intervals: usize,
    pub initial_splits: Splits,
    pub relax: f64,
    pub residual_tol: f64,
    pub split_tol: f64,
    pub max_outer: usize,
    /// Relative gap below which the two kappas count as identical.
    pub degenerate_gap: f64,
    pub targets: SlopeTargets,
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig {
            intervals: 10_000,
            initial_splits: Splits { at0: 0.5, at1: 0.5 },
            relax: 0.01,
            residual_tol: 1e-12,
            split_tol: 1e-12,
            max_outer: 100_000,
            degenerate_gap: 1e-8,
            targets: SlopeTargets::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdSolution {
    pub env: EnvParams,
    pub lambda: f64,
    pub cap_a: f64,
    pub intervals: usize,
    pub g1: Vec<f64>,
    pub g2: Vec<f64>,
    pub kappa: [f64; 2],
    pub splits: Splits,
    pub weight: Vec<f64>,
    /// Fixed-point residuals at p = 0 and p = 1.
    pub residuals: [f64; 2],
    /// (F2, F1, F0) for each component.
    pub quadratic: [[f64; 3]; 2],
    pub boundary_targets: (f64, f64),
    pub iterations: usize,
    /// Whether both slope targets were met to tolerance, as opposed to the residuals
    /// only reaching their constrained least-squares minimum.
    pub targets_attained: bool,
}

/// One split update: returns (least-squares split, whether it is pinned by a bound or
/// the equal-kappa guard).
fn split_target(slope: f64, k1: f64, k2: f64, gap: f64) -> (f64, bool) {
    if (k1 - k2).abs() <= gap * k1.abs().max(k2.abs()).max(1.0) {
        return (0.5, true);
    }
    let raw = (slope - k2) / (k1 - k2);
    let clipped = raw.clamp(0.0, 1.0);
    (clipped, clipped != raw)
}

/// Solves at fixed splits and packages the result.
pub fn solve_at_splits(env: &EnvParams, lambda: f64, cap_a: f64, splits: Splits, intervals: usize) -> Result<FdSolution> {
    env.validate()?;
    let grid = PGrid::new(intervals)?;
    let weight = adjoint_weight(env, &grid)?;
    let [g1, g2] = solve_g_ode(env, lambda, cap_a, &splits, &grid)?;
    let q1 = kappa_coefficients(&g1, &weight, env, lambda, cap_a, |p| splits.blend(1, p));
    let q2 = kappa_coefficients(&g2, &weight, env, lambda, cap_a, |p| splits.blend(2, p));
    let kappa = [kappa_from_quadratic(q1[0], q1[1], q1[2])?, kappa_from_quadratic(q2[0], q2[1], q2[2])?];
    Ok(FdSolution {
        env: *env,
        lambda,
        cap_a,
        intervals,
        g1,
        g2,
        kappa,
        splits,
        weight: weight.w,
        residuals: [0.0; 2],
        quadratic: [q1, q2],
        boundary_targets: boundary_targets(env, lambda, cap_a)?,
        iterations: 0,
        targets_attained: false,
    })
}

/// Outer fixed point for the endpoint splits.
///
/// Converged means the relaxed update moved the splits by at most `split_tol` and each
/// residual is either within `residual_tol` or already at its least-squares minimum over
/// [0, 1] (split pinned at a bound, or the equal-kappa guard active).
pub fn calibrate_splits(env: &EnvParams, lambda: f64, cap_a: f64, cfg: &FdConfig) -> Result<FdSolution> {
    if !(cfg.targets.regime1 > 0.0 && cfg.targets.regime2 > 0.0) {
        return Err(Error::config("slope targets must be positive"));
    }
    let (g_at0, g_at1) = boundary_targets(env, lambda, cap_a)?;
    if !(g_at0 != 0.0 && g_at1 != 0.0 && g_at0.is_finite() && g_at1.is_finite()) {
        return Err(Error::config("split calibration needs nonzero boundary targets"));
    }
    let slopes = [cfg.targets.regime2 / g_at0, cfg.targets.regime1 / g_at1];
    let mut splits = cfg.initial_splits;
    let mut residuals = [f64::NAN; 2];
    for iteration in 1..=cfg.max_outer {
        let mut sol = solve_at_splits(env, lambda, cap_a, splits, cfg.intervals)?;
        let [k1, k2] = sol.kappa;
        let current = [splits.at0, splits.at1];
        let mut next = current;
        let mut settled = true;
        let mut attained = true;
        for j in 0..2 {
            residuals[j] = slopes[j] - (current[j] * k1 + (1.0 - current[j]) * k2);
            let (star, pinned) = split_target(slopes[j], k1, k2, cfg.degenerate_gap);
            next[j] = (1.0 - cfg.relax) * current[j] + cfg.relax * star;
            let within = residuals[j].abs() <= cfg.residual_tol;
            attained &= within;
            settled &= within || pinned;
        }
        let change = (next[0] - current[0]).abs().max((next[1] - current[1]).abs());
        if change <= cfg.split_tol && settled {
            sol.residuals = residuals;
            sol.iterations = iteration;
            sol.targets_attained = attained;
            return Ok(sol);
        }
        splits = Splits { at0: next[0], at1: next[1] };
    }
    Err(Error::NonConvergence { iterations: cfg.max_outer, residuals })
}

impl FdSolution {
    pub fn step(&self) -> f64 {
        1.0 / self.intervals as f64
    }

    /// Linear interpolation of (g_1, g_2) at belief p.
    pub fn g_at(&self, p: f64) -> [f64; 2] {
        let p = p.clamp(0.0, 1.0);
        let pos = p * self.intervals as f64;
        let j = (pos as usize).min(self.intervals - 1);
        let t = pos - j as f64;
        [
            self.g1[j] + t * (self.g1[j + 1] - self.g1[j]),
            self.g2[j] + t * (self.g2[j + 1] - self.g2[j]),
        ]
    }

    pub fn surface_terms(&self, p: f64) -> SurfaceTerms {
        SurfaceTerms { g: self.g_at(p), kappa: self.kappa }
    }

    /// Residual of the exploratory HJB equation at (x, grid node j), with analytic
    /// x-derivatives and centered differences in p.
    pub fn hjb_residual(&self, x: f64, j: usize) -> f64 {
        assert!(j >= 1 && j < self.intervals);
        let env = &self.env;
        let cb = coefficients(env);
        let h = self.step();
        let p = j as f64 * h;
        let (mut v, mut vx, mut vxx, mut vp, mut vpp, mut vxp) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for (g, k) in [(&self.g1, self.kappa[0]), (&self.g2, self.kappa[1])] {
            let e = libm::exp(-k * x);
            let gp = (g[j + 1] - g[j - 1]) / (2.0 * h);
            let gpp = (g[j + 1] - 2.0 * g[j] + g[j - 1]) / (h * h);
            v += g[j] * (1.0 - e);
            vx += k * g[j] * e;
            vxx -= k * k * g[j] * e;
            vp += gp * (1.0 - e);
            vpp += gpp * (1.0 - e);
            vxp += k * gp * e;
        }
        0.5 * env.sigma * env.sigma * vxx + f_lambda(vx, self.lambda, self.cap_a) + cb.d(p) * vx + 0.5 * cb.a(p) * vpp
            + cb.b(p) * vp
            + (env.mu1 - env.mu2) * p * (1.0 - p) * vxp
            - cb.c(p) * v
    }
}

/// Direction of the value surface in the belief at fixed surplus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Monotonicity {
    Constant,
    Nondecreasing,
    Nonincreasing,
    Mixed,
}

impl FdSolution {
    /// Range [0, f(0)/min delta] (or its mirror when f(0) < 0) every g_i must lie in.
    pub fn comparison_range(&self) -> (f64, f64) {
        let f0 = f_lambda(0.0, self.lambda, self.cap_a);
        let edge = f0 / self.env.delta1.min(self.env.delta2);
        if f0 >= 0.0 {
            (0.0, edge)
        } else {
            (edge, 0.0)
        }
    }

    /// Largest violation of [`Self::comparison_range`] over all nodes of both g's.
    pub fn comparison_violation(&self) -> f64 {
        let (lo, hi) = self.comparison_range();
        self.g1.iter().chain(&self.g2).map(|v| (lo - v).max(v - hi).max(0.0)).fold(0.0, f64::max)
    }

    /// Classifies p -> v(x, p) over the interior grid nodes for every x in `xs`. The
    /// endpoint nodes carry the Dirichlet data, which the degenerate equation does not
    /// attain, so a one-cell boundary layer there is excluded. Moves smaller than
    /// `rel_tol` times the largest |v| are treated as flat.
    pub fn p_monotonicity(&self, xs: &[f64], rel_tol: f64) -> Monotonicity {
        let (mut up, mut down) = (false, false);
        for &x in xs {
            let v: Vec<f64> = (1..self.intervals)
                .map(|j| benchmark_value(self, x, j as f64 / self.intervals as f64).0)
                .collect();
            let tol = rel_tol * v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
            for w in v.windows(2) {
                let d = w[1] - w[0];
                up |= d > tol;
                down |= d < -tol;
            }
        }
        match (up, down) {
            (false, false) => Monotonicity::Constant,
            (true, false) => Monotonicity::Nondecreasing,
            (false, true) => Monotonicity::Nonincreasing,
            (true, true) => Monotonicity::Mixed,
        }
    }
}

/// Benchmark value and marginal value at (x, p).
pub fn benchmark_value(fd: &FdSolution, x: f64, p: f64) -> (f64, f64) {
    value_surface(&fd.surface_terms(p), x)
}

/// Learner parameters mimicking the benchmark: gamma at the benchmark environment's
/// surrogate targets and each phi block fitted to the benchmark g_i by nonnegative
/// least squares on the basis coefficients e^phi (sampled at `samples` + 1 nodes).
pub fn surrogate_theta(fd: &FdSolution, poly_order: usize, samples: usize) -> ThetaParams {
    let nb = basis_len(poly_order);
    let f0 = f_lambda(0.0, fd.lambda, fd.cap_a);
    let mut theta = ThetaParams::initial(poly_order);
    theta.gamma = ThetaParams::gamma_of(&fd.env);
    let mut row = alloc::vec![0.0; nb];
    for component in 1..=2 {
        let scale = f0 / if component == 1 { fd.env.delta1 } else { fd.env.delta2 };
        let mut gram = alloc::vec![0.0; nb * nb];
        let mut rhs = alloc::vec![0.0; nb];
        for s in 0..=samples {
            let p = s as f64 / samples as f64;
            basis_values(poly_order, p, &mut row);
            let y = fd.g_at(p)[component - 1] / scale;
            for a in 0..nb {
                rhs[a] += row[a] * y;
                for b in 0..nb {
                    gram[a * nb + b] += row[a] * row[b];
                }
            }
        }
        let coef = nonnegative_least_squares(&gram, &rhs, nb);
        let phi: Vec<f64> = coef.iter().map(|c| libm::log(c.max(1e-12))).collect();
        if component == 1 {
            theta.phi1 = phi;
        } else {
            theta.phi2 = phi;
        }
    }
    theta
}

/// Cyclic coordinate descent for min 1/2 c'Gc - b'c subject to c >= 0.
fn nonnegative_least_squares(gram: &[f64], rhs: &[f64], n: usize) -> Vec<f64> {
    let mut c = alloc::vec![0.0; n];
    for _ in 0..20_000 {
        let mut moved = 0.0f64;
        for a in 0..n {
            let d = gram[a * n + a];
            if d <= 0.0 {
                continue;
            }
            let grad: f64 = (0..n).map(|b| gram[a * n + b] * c[b]).sum::<f64>() - rhs[a];
            let next = (c[a] - grad / d).max(0.0);
            moved = moved.max((next - c[a]).abs());
            c[a] = next;
        }
        if moved < 1e-15 {
            break;
        }
    }
    c
}

/// Least-squares quadratic in p fitted to a grid function, with its mean absolute error
/// normalized by the mean absolute value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticFit {
    pub coeffs: [f64; 3],
    pub normalized_mae: f64,
}

pub fn quadratic_fit(values: &[f64]) -> QuadraticFit {
    let n = values.len();
    let h = 1.0 / (n - 1) as f64;
    // Regress on the centered variable t = p - 1/2 for conditioning.
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for (j, &y) in values.iter().enumerate() {
        let t = j as f64 * h - 0.5;
        let row = [1.0, t, t * t];
        for a in 0..3 {
            atb[a] += row[a] * y;
            for b in 0..3 {
                ata[a][b] += row[a] * row[b];
            }
        }
    }
    let c = solve3(ata, atb);
    // back to powers of p
    let coeffs = [c[0] - 0.5 * c[1] + 0.25 * c[2], c[1] - c[2], c[2]];
    let (mut err, mut mag) = (0.0, 0.0);
    for (j, &y) in values.iter().enumerate() {
        let p = j as f64 * h;
        err += (y - (coeffs[0] + coeffs[1] * p + coeffs[2] * p * p)).abs();
        mag += y.abs();
    }
    QuadraticFit { coeffs, normalized_mae: if mag > 0.0 { err / mag } else { 0.0 } }
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Trapezoid mass of a grid function (used by reports).
pub fn grid_integral(values: &[f64]) -> f64 {
    trapezoid(values, 1.0 / (values.len() - 1) as f64)
}
