//! End-to-end acceptance checks, one test per criterion. Each prints a single
//! `criterion N: PASS|FAIL ...` line to the real stdout (not the captured one).
//!
//! Set `PODIV_LONG_RUN=1` to add the full 10^4-iteration training reproduction to
//! criterion 7.

use std::io::Write;
use std::path::Path;
use std::process::Command;

use podiv::commands::estimate::estimate_batch;
use podiv::commands::filter_params;
use podiv::commands::evaluate::{evaluate_spec, PolicySource, PolicySpec};
use podiv::config::FilterChoice;
use podiv::RunConfig;
use podiv_core::fd::{calibrate_splits, surrogate_theta, FdConfig, Monotonicity};
use podiv_core::filter::{innovation_increment, wonham_step, BeliefState};
use podiv_core::market::simulate_path;
use podiv_core::model::{
    f_lambda, f_lambda_prime, gibbs_cdf, gibbs_density, sample_action, ParamModel, ThetaParams, WeightGrid,
    GAMMA_LEN,
};
use podiv_core::rng::{stream, Purpose};
use podiv_core::trainer::{
    ctd_direction, generate_episode, train, FilterSource, TrainerConfig,
};
use podiv_core::{ControlConfig, EnvParams};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

struct Checks {
    criterion: u32,
    items: Vec<(String, bool)>,
}

impl Checks {
    fn new(criterion: u32) -> Self {
        Checks { criterion, items: Vec::new() }
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        self.items.push((what.into(), ok));
    }

    fn finish(self) {
        let pass = self.items.iter().all(|(_, ok)| *ok);
        let detail: Vec<String> =
            self.items.iter().map(|(w, ok)| format!("{}{}", if *ok { "" } else { "!! " }, w)).collect();
        let line = format!(
            "criterion {}: {} [{}]\n",
            self.criterion,
            if pass { "PASS" } else { "FAIL" },
            detail.join("; ")
        );
        let _ = std::io::stdout().write_all(line.as_bytes());
        assert!(pass, "{line}");
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

#[test]
fn criterion_01_entropy_function() {
    let mut c = Checks::new(1);
    let grid: Vec<f64> = (0..=4000).map(|i| -10.0 + i as f64 * 0.005).collect();
    let (mut decreasing, mut convex, mut slope_in_range) = (true, true, true);
    for (lambda, cap_a) in [(1.0, 1.0), (1.0, 2.0), (0.3, 0.6), (2.5, 3.0)] {
        let f: Vec<f64> = grid.iter().map(|&y| f_lambda(y, lambda, cap_a)).collect();
        decreasing &= f.windows(2).all(|w| w[1] < w[0]);
        convex &= f.windows(3).all(|w| w[0] + w[2] - 2.0 * w[1] >= -1e-12);
        slope_in_range &= grid.iter().all(|&y| {
            let d = f_lambda_prime(y, lambda, cap_a);
            d < 0.0 && d > -cap_a
        });
    }
    c.check(decreasing, "strictly decreasing");
    c.check(convex, "convex");
    c.check(slope_in_range, "f' in (-a, 0)");
    let gaps: Vec<f64> = [(1.0, 1.0), (1.0, 2.0), (0.5, 3.0), (2.0, 0.6), (1.0, 0.6), (0.7, 10.0)]
        .iter()
        .map(|&(l, a)| f_lambda(1.0, l, a) - l * libm::log(a))
        .collect();
    // Exact against the logarithm the library itself uses; the platform ln may differ
    // from it by one ulp.
    c.check(gaps.iter().all(|g| *g == 0.0), format!("f(1) - lambda ln a = {gaps:?}"));
    let worst = [(1.0, 1.0), (1.0, 2.0), (0.5, 3.0), (2.0, 0.6)]
        .iter()
        .map(|&(l, a)| (f_lambda_prime(1.0, l, a) + a / 2.0).abs())
        .fold(0.0, f64::max);
    c.check(worst < 1e-10, format!("|f'(1) + a/2| = {worst:.1e}"));
    // f(1) = ln 2 > 0 and f decreases, so bisect for the root to the right of 1.
    let (mut lo, mut hi) = (1.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f_lambda(mid, 1.0, 2.0) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    c.check(lo > 1.0 && lo < 2.0, format!("root at a = 2: {lo:.6} in (1, 2)"));
    c.finish();
}

#[test]
fn criterion_02_gibbs_policy() {
    let mut c = Checks::new(2);
    let mut rng = stream(2, 0, Purpose::Action);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let lambda = rng.random_range(0.2..3.0);
        let cap_a = rng.random_range(0.3..3.0);
        let one_minus_vx = rng.random_range(-20.0..20.0) * lambda / cap_a;
        let mass = simpson(|u| gibbs_density(u, one_minus_vx, lambda, cap_a).unwrap(), 0.0, cap_a, 20_000);
        worst = worst.max((mass - 1.0).abs());
    }
    c.check(worst < 1e-10, format!("max |mass - 1| over 20 branches = {worst:.1e}"));
    for (one_minus_vx, cap_a) in [(-2.0, 1.0), (0.7, 1.0), (0.0, 2.0)] {
        let n = 100_000;
        let mut draws: Vec<f64> = (0..n)
            .map(|_| sample_action(one_minus_vx, rng.random::<f64>(), 1.0, cap_a).unwrap())
            .collect();
        draws.sort_by(f64::total_cmp);
        let ks = draws
            .iter()
            .enumerate()
            .map(|(i, &u)| {
                let cdf = gibbs_cdf(u, one_minus_vx, 1.0, cap_a);
                (cdf - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - cdf).abs())
            })
            .fold(0.0, f64::max);
        c.check(ks < 0.01, format!("KS at 1 - v_x = {one_minus_vx}: {ks:.4}"));
    }
    c.finish();
}

const GRAD_INTERVALS: usize = 4000;
const GRAD_STEP: f64 = 1e-5;
const GRAD_TOL: f64 = 1e-5;

fn grad_model(theta: &ThetaParams) -> ParamModel {
    ParamModel::new(theta, (0.1, 0.3), 1.0, 1.0, GRAD_INTERVALS).unwrap()
}

fn bumped(theta: &ThetaParams, coord: usize, h: f64) -> ThetaParams {
    let mut v = theta.to_vec();
    v[coord] += h;
    ThetaParams::from_slice(theta.poly_order, &v).unwrap()
}

/// Relative error with an absolute floor `scale` for derivatives that vanish.
fn rel_err(analytic: f64, numeric: f64, scale: f64) -> f64 {
    (analytic - numeric).abs() / numeric.abs().max(scale)
}

#[test]
fn criterion_03_parameter_gradients() {
    let mut c = Checks::new(3);
    let mut rng = stream(3, 0, Purpose::Start);
    let truth = ThetaParams::gamma_of(&EnvParams::default());
    let (mut kappa_err, mut weight_err, mut value_err, mut g_err) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..10 {
        let mut gamma = truth;
        gamma.iter_mut().for_each(|g| *g += rng.random_range(-0.15..0.15));
        let phi1: Vec<f64> = (0..9).map(|_| rng.random_range(-3.0..0.0)).collect();
        let phi2: Vec<f64> = (0..9).map(|_| rng.random_range(-3.0..0.0)).collect();
        let theta = ThetaParams { gamma, phi1, phi2, poly_order: 2 };
        let (x, p) = (rng.random_range(0.05..3.0), rng.random_range(0.0..1.0));
        let model = grad_model(&theta);
        let dim = theta.dim();
        let nb = theta.n_basis();
        let (mut gv, mut gvx) = (vec![0.0; dim], vec![0.0; dim]);
        let (v, vx) = model.value_with_grad(x, p, &mut gv, &mut gvx);
        let mut dg = vec![0.0; nb];
        for coord in 0..dim {
            let t_up = bumped(&theta, coord, GRAD_STEP);
            let t_dn = bumped(&theta, coord, -GRAD_STEP);
            let (up, dn) = (grad_model(&t_up), grad_model(&t_dn));
            for i in 0..2 {
                let comp = &model.components[i];
                let own = theta.phi_offset(i + 1);
                let in_own = (own..own + nb).contains(&coord);
                for r in 0..3 {
                    let numeric = (up.components[i].f[r] - dn.components[i].f[r]) / (2.0 * GRAD_STEP);
                    let analytic = if coord < GAMMA_LEN {
                        comp.df_dgamma[r][coord]
                    } else if in_own {
                        comp.df_dphi[r][coord - own]
                    } else {
                        0.0
                    };
                    kappa_err = kappa_err.max(rel_err(analytic, numeric, comp.f[r].abs() * 1e-3));
                }
                let numeric = (up.components[i].kappa - dn.components[i].kappa) / (2.0 * GRAD_STEP);
                let analytic = if coord < GAMMA_LEN {
                    comp.dkappa_dgamma[coord]
                } else if in_own {
                    comp.dkappa_dphi[coord - own]
                } else {
                    0.0
                };
                kappa_err = kappa_err.max(rel_err(analytic, numeric, comp.kappa * 1e-3));
                if in_own {
                    model.g_with_grad(p, i + 1, &mut dg);
                    let numeric = (up.g(p)[i] - dn.g(p)[i]) / (2.0 * GRAD_STEP);
                    g_err = g_err.max(rel_err(dg[coord - own], numeric, 1e-9));
                }
            }
            let (vu, vxu) = up.value(x, p);
            let (vd, vxd) = dn.value(x, p);
            value_err = value_err.max(rel_err(gv[coord], (vu - vd) / (2.0 * GRAD_STEP), v.abs() * 1e-3));
            value_err =
                value_err.max(rel_err(gvx[coord], (vxu - vxd) / (2.0 * GRAD_STEP), vx.abs() * 1e-3 + 1e-12));
            if coord < GAMMA_LEN {
                let wu = WeightGrid::new(&t_up.weight_shape(), GRAD_INTERVALS).unwrap();
                let wd = WeightGrid::new(&t_dn.weight_shape(), GRAD_INTERVALS).unwrap();
                for j in (1..GRAD_INTERVALS).step_by(97) {
                    if model.weight.w[j] < 1e-200 || wu.w[j] < 1e-200 || wd.w[j] < 1e-200 {
                        continue;
                    }
                    let numeric = (wu.w[j].ln() - wd.w[j].ln()) / (2.0 * GRAD_STEP);
                    weight_err = weight_err.max(rel_err(model.xi[coord][j], numeric, 1e-3));
                }
            }
        }
    }
    c.check(kappa_err < GRAD_TOL, format!("quadratic coefficients and kappa: {kappa_err:.1e}"));
    c.check(weight_err < GRAD_TOL, format!("log-weight sensitivities: {weight_err:.1e}"));
    c.check(g_err < GRAD_TOL, format!("g components: {g_err:.1e}"));
    c.check(value_err < GRAD_TOL, format!("v and v_x: {value_err:.1e}"));
    c.finish();
}

#[test]
fn criterion_04_finite_difference_benchmark() {
    let mut c = Checks::new(4);
    let env = EnvParams::default();
    let cfg = FdConfig::default();
    c.check(cfg.intervals == 10_000, "belief step 1e-4");
    let xs = [0.1, 0.5, 1.0, 2.0, 5.0];
    let cases = [
        (0.6, Monotonicity::Nonincreasing),
        (1.0, Monotonicity::Nondecreasing),
        (3.0, Monotonicity::Nondecreasing),
    ];
    for (cap_a, want) in cases {
        let sol = match calibrate_splits(&env, 1.0, cap_a, &cfg) {
            Ok(s) => s,
            Err(e) => {
                c.check(false, format!("a = {cap_a}: outer iteration failed: {e}"));
                continue;
            }
        };
        c.check(true, format!("a = {cap_a}: converged in {} outer steps", sol.iterations));
        let viol = sol.comparison_violation();
        c.check(viol == 0.0, format!("a = {cap_a}: bound violation {viol:.1e}"));
        let got = sol.p_monotonicity(&xs, 1e-12);
        c.check(got == want, format!("a = {cap_a}: {got:?}"));
        let fits = [podiv_core::fd::quadratic_fit(&sol.g1), podiv_core::fd::quadratic_fit(&sol.g2)];
        let mae = fits[0].normalized_mae.max(fits[1].normalized_mae);
        c.check(mae < 0.03, format!("a = {cap_a}: quadratic fit normalized MAE {mae:.1e}"));
    }
    c.finish();
}

#[test]
fn criterion_05_filter() {
    let mut c = Checks::new(5);
    let env = EnvParams::default();
    let dt: f64 = 1.0 / 252.0;
    let mut rng = stream(5, 0, Purpose::Noise);
    let mut b = BeliefState::new(0.5);
    let mut interior = true;
    for _ in 0..1_000_000 {
        let z: f64 = StandardNormal.sample(&mut rng);
        b = wonham_step(&b, z * dt.sqrt(), &env, dt);
        interior &= b.p() > 0.0 && b.p() < 1.0;
    }
    c.check(interior, "interior over 1e6 steps");

    let flat = EnvParams { mu2: env.mu1, ..env };
    let target = env.stationary_p1();
    let mut ends = Vec::new();
    for p0 in [0.02, 0.5, 0.98] {
        let mut b = BeliefState::new(p0);
        for _ in 0..(20.0 / dt) as usize {
            let z: f64 = StandardNormal.sample(&mut rng);
            b = wonham_step(&b, z * dt.sqrt(), &flat, dt);
        }
        ends.push(b.p());
    }
    let drift = ends.iter().map(|p| (p - 0.8892).abs()).fold(0.0, f64::max);
    c.check(drift < 0.02, format!("zero-signal limit {target:.4}, reached {ends:.4?}"));

    // The filter parameters the `est` pipeline uses: heuristic estimates from one
    // seeded 20-year history.
    let run = RunConfig::default();
    let est = filter_params(&run, FilterChoice::Est).unwrap();
    let control = ControlConfig { ruin_eps: f64::NEG_INFINITY, ..ControlConfig::default() };
    let n = control.n_steps();
    let mut gaps = Vec::new();
    for i in 0..20 {
        let path = simulate_path(&env, &control, n, 0.0, 56, i).unwrap();
        let (mut bt, mut be) = (BeliefState::new(control.p0), BeliefState::new(control.p0));
        let mut gap = 0.0;
        for k in 0..n {
            let dx = path.surplus[k + 1] - path.surplus[k];
            bt = wonham_step(&bt, innovation_increment(dx, bt.p(), &env, dt), &env, dt);
            be = wonham_step(&be, innovation_increment(dx, be.p(), &est, dt), &est, dt);
            gap += (bt.p() - be.p()).abs();
        }
        gaps.push(gap / n as f64);
    }
    let worst = gaps.iter().cloned().fold(0.0, f64::max);
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    c.check(worst < 0.15, format!(
            "belief gap under estimates (mu = {:.3}/{:.3}, q = {:.3}/{:.3}): mean {mean:.3}, worst path {worst:.3}",
            est.mu1, est.mu2, est.q12, est.q21
        ));
    c.finish();
}

#[test]
fn criterion_06_estimation() {
    let mut c = Checks::new(6);
    let cfg = RunConfig::default();
    c.check(cfg.estimation.n_paths == 100 && cfg.estimation.years == 20.0, "100 paths of 20 years");
    let batch = estimate_batch(&cfg).unwrap();
    let column = |k: usize| -> (f64, usize) {
        let v: Vec<f64> = batch.iter().filter_map(|b| b.heuristic_values()[k]).collect();
        (v.iter().sum::<f64>() / v.len() as f64, v.len())
    };
    let (mu1, n_mu1) = column(0);
    let (sigma, n_sigma) = column(2);
    c.check((0.294..=0.306).contains(&sigma), format!("heuristic sigma mean {sigma:.4} over {n_sigma} paths"));
    c.check((1.05..=1.25).contains(&mu1), format!("heuristic mu1 mean {mu1:.4} over {n_mu1} paths"));
    let mut monotone = 0;
    let mut ran = 0;
    let mut worst_drop = 0.0f64;
    for b in &batch {
        if let Some(em) = &b.em {
            ran += 1;
            let ll = &em.diagnostics.log_likelihood;
            let drop = ll.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max);
            worst_drop = worst_drop.max(drop);
            monotone += usize::from(drop <= 1e-9 * ll[0].abs());
        }
    }
    c.check(ran == batch.len(), format!("EM ran on {ran}/{} paths", batch.len()));
    c.check(
        monotone == ran,
        format!("EM log-likelihood nondecreasing on {monotone}/{ran} paths (largest drop {worst_drop:.1e})"),
    );
    c.finish();
}

/// Published learned exp(gamma) for CTD(0) with true-parameter filtering.
const CTD_TRUE_ROW: [f64; 5] = [0.0900, 1.2000, 0.5100, 2.8900, 0.4749];

fn training_check(c: &mut Checks, n: usize, tol: f64) {
    let env = EnvParams::default();
    let cfg = TrainerConfig { n_iterations: n, ..TrainerConfig::default() };
    let (theta, log) = train(&cfg, &env, &FilterSource::Fixed(env), &ControlConfig::default(), 42).unwrap();
    let eg = theta.exp_gamma();
    let worst = eg.iter().zip(CTD_TRUE_ROW).map(|(g, t)| (g / t - 1.0).abs()).fold(0.0, f64::max);
    c.check(
        worst <= tol,
        format!("N = {n}: exp(gamma) {eg:.4?}, worst relative gap {:.1}% (limit {:.0}%)", 100.0 * worst, 100.0 * tol),
    );
    let ma: Vec<f64> = log.records.iter().map(|r| r.loss_ma).filter(|m| m.is_finite()).collect();
    if let (Some(first), Some(last)) = (ma.first(), ma.last()) {
        c.check(last * 100.0 <= *first, format!("N = {n}: loss moving average {first:.3e} -> {last:.3e}"));
    } else {
        c.check(false, format!("N = {n}: no finite loss recorded"));
    }
}

#[test]
fn criterion_07_training() {
    let mut c = Checks::new(7);
    training_check(&mut c, 2000, 0.15);
    if std::env::var_os("PODIV_LONG_RUN").is_some() {
        training_check(&mut c, 10_000, 0.10);
    }
    c.finish();
}

#[test]
fn criterion_08_out_of_sample() {
    let mut c = Checks::new(8);
    let mut cfg = RunConfig::default();
    cfg.evaluate.n_paths = 10_000;
    let spec = PolicySpec { label: "optimal".into(), source: PolicySource::Optimal, filter: FilterChoice::True };
    let r = evaluate_spec(&cfg, &spec).unwrap();
    let mean_gap = r.mean_v / 4.356172 - 1.0;
    let sharpe_gap = r.sharpe_ri / 45.2549 - 1.0;
    c.check(mean_gap.abs() <= 0.03, format!("mean V {:.4} ({:+.2}%)", r.mean_v, 100.0 * mean_gap));
    c.check(sharpe_gap.abs() <= 0.05, format!("Sharpe-RI {:.3} ({:+.2}%)", r.sharpe_ri, 100.0 * sharpe_gap));
    let identity = (r.snr * r.snr * r.var_v - r.mean_v * r.mean_v).abs() / (r.mean_v * r.mean_v);
    c.check(identity < 1e-12, format!("snr^2 var = mean^2 to {identity:.1e}"));
    c.finish();
}

#[test]
fn criterion_09_martingale_condition() {
    let mut c = Checks::new(9);
    let env = EnvParams::default();
    let control = ControlConfig::default();
    let fd = calibrate_splits(&env, control.lambda, control.cap_a, &FdConfig::default()).unwrap();
    let theta = surrogate_theta(&fd, 2, 1000);
    let model = ParamModel::new(&theta, (env.delta1, env.delta2), control.lambda, control.cap_a, 10_000).unwrap();
    let means: Vec<f64> = (0..1000u64)
        .filter_map(|i| {
            let ep = generate_episode(&model, &env, &env, &control, 9, i).ok()?;
            let (_, _, errors) = ctd_direction(&ep, &model, 0.0);
            (!errors.is_empty()).then(|| errors.iter().sum::<f64>() / errors.len() as f64)
        })
        .collect();
    let n = means.len() as f64;
    let mean = means.iter().sum::<f64>() / n;
    let se = (means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    c.check(means.len() >= 990, format!("{} episodes", means.len()));
    c.check(mean.abs() <= 3.0 * se, format!("mean TD error {mean:.2e}, standard error {se:.2e}"));
    c.finish();
}

fn podiv(base: &[&str], extra: &[&str]) {
    let args = [base, extra].concat();
    let status = Command::new(env!("CARGO_BIN_EXE_podiv")).args(&args).output().unwrap();
    assert!(status.status.success(), "podiv {args:?}: {}", String::from_utf8_lossy(&status.stderr));
}

fn run_all(dir: &Path, config: &Path, workers: &str) {
    let d = dir.to_str().unwrap();
    let base = ["--config", config.to_str().unwrap(), "--out", d, "--workers", workers];
    podiv(&base, &["simulate", "--n-paths", "3", "--years", "2", "--dividend-rate", "0.5"]);
    podiv(&base, &["estimate"]);
    podiv(&base, &["estimate", "--path-index", "1"]);
    podiv(&base, &["fd", "--sweep"]);
    podiv(&base, &["train", "--iterations", "20"]);
    let ck = format!("ctd={d}/checkpoint.json");
    podiv(&base, &["evaluate", "--policy", "optimal", "--policy", &ck, "--policy", "optimal@est"]);
}

#[test]
fn criterion_10_determinism() {
    let mut c = Checks::new(10);
    let root = tempfile::tempdir().unwrap();
    let config = root.path().join("run.toml");
    std::fs::write(
        &config,
        "seed = 7\n[estimation]\nn_paths = 4\n[fd.solver]\nintervals = 2000\n[train]\ncheckpoint_every = 10\nhistory_years = 5.0\n[evaluate]\nn_paths = 40\n",
    )
    .unwrap();
    let (a, b) = (root.path().join("a"), root.path().join("b"));
    run_all(&a, &config, "1");
    run_all(&b, &config, "3");
    let mut names: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    let differing: Vec<String> = names
        .iter()
        .filter(|n| std::fs::read(a.join(n)).ok() != std::fs::read(b.join(n)).ok())
        .map(|n| n.to_string_lossy().into_owned())
        .collect();
    c.check(names.len() >= 15, format!("{} output files", names.len()));
    c.check(differing.is_empty(), format!("differing: {differing:?}"));
    c.finish();
}
