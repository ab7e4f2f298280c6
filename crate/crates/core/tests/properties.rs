//! Property tests for the model functions, the filter, the simulator and the learners.

use podiv_core::filter::{innovation_increment, wonham_step, BeliefState};
use podiv_core::market::simulate_path;
use podiv_core::model::{
    entropy_reward, f_lambda, f_lambda_prime, f_lambda_second, gibbs_density, ParamModel, ThetaParams,
};
use podiv_core::rng::{stream, Purpose};
use podiv_core::trainer::{
    ctd_direction, generate_episode, ml_gradient, ml_residuals, regularizer, train, FilterSource, TrainerConfig,
};
use podiv_core::{ControlConfig, EnvParams};
use proptest::prelude::*;
use rand_distr::{Distribution, StandardNormal};

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

fn trained_like_theta() -> ThetaParams {
    ThetaParams {
        gamma: ThetaParams::gamma_of(&EnvParams::default()),
        phi1: vec![-0.6, -2.5, -2.5, -2.3, -3.0, -3.0, -2.3, -3.0, -3.0],
        phi2: vec![-2.6, -2.9, -2.9, -2.8, -3.0, -3.0, -2.8, -3.0, -3.0],
        poly_order: 2,
    }
}

fn model(theta: &ThetaParams) -> ParamModel {
    ParamModel::new(theta, (0.1, 0.3), 1.0, 1.0, 4000).unwrap()
}

fn short_cfg() -> ControlConfig {
    ControlConfig { horizon_t: 1.0, ..ControlConfig::default() }
}

proptest! {
    #[test]
    fn f_lambda_is_decreasing_convex_and_lipschitz(
        y1 in -5.0f64..5.0, y2 in -5.0f64..5.0, lambda in 0.1f64..5.0, cap_a in 0.2f64..5.0,
    ) {
        let d = f_lambda_prime(y1, lambda, cap_a);
        prop_assert!(d < 0.0 && d > -cap_a, "f'({y1}) = {d}");
        prop_assert!(f_lambda_second(y1, lambda, cap_a) > 0.0);
        let (lo, hi) = if y1 < y2 { (y1, y2) } else { (y2, y1) };
        if hi - lo > 1e-9 {
            prop_assert!(f_lambda(lo, lambda, cap_a) > f_lambda(hi, lambda, cap_a));
        }
        let gap = (f_lambda(y1, lambda, cap_a) - f_lambda(y2, lambda, cap_a)).abs();
        prop_assert!(gap <= cap_a * (y1 - y2).abs() * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn gibbs_density_integrates_to_one(shift in -30.0f64..30.0, lambda in 0.2f64..3.0, cap_a in 0.3f64..3.0) {
        let y = shift * lambda / cap_a;
        let mass = simpson(|u| gibbs_density(u, y, lambda, cap_a).unwrap(), 0.0, cap_a, 20_000);
        prop_assert!((mass - 1.0).abs() < 1e-10, "mass {mass}");
    }

    #[test]
    fn entropy_reward_is_expected_payout_plus_entropy(vx in -2.0f64..3.0, lambda in 0.3f64..2.0) {
        // Oracle: E[u] + lambda * differential entropy by quadrature of the density.
        let cap_a = 1.0;
        let dens = |u: f64| gibbs_density(u, 1.0 - vx, lambda, cap_a).unwrap();
        let mean = simpson(|u| u * dens(u), 0.0, cap_a, 4000);
        let ent = simpson(|u| { let d = dens(u); -d * d.ln() }, 0.0, cap_a, 4000);
        prop_assert!((entropy_reward(vx, lambda, cap_a) - (mean + lambda * ent)).abs() < 1e-9);
    }

    #[test]
    fn belief_stays_interior(seed in any::<u64>(), snr_scale in 0.5f64..20.0) {
        let env = EnvParams { sigma: 0.7 / snr_scale, ..EnvParams::default() };
        let dt: f64 = 1.0 / 252.0;
        let mut rng = stream(seed, 0, Purpose::Noise);
        let mut b = BeliefState::new(0.5);
        for k in 0..20_000 {
            // Occasional wild innovations stress the renormalization.
            let z: f64 = StandardNormal.sample(&mut rng);
            let dw = if k % 997 == 0 { 50.0 * z } else { z * dt.sqrt() };
            b = wonham_step(&b, dw, &env, dt);
            let p = b.p();
            prop_assert!(p > 0.0 && p < 1.0 && p.is_finite());
        }
    }

    #[test]
    fn ml_suffix_sums_reproduce_one_step_decomposition(index in 0u64..1000) {
        let theta = trained_like_theta();
        let m = model(&theta);
        let env = EnvParams::default();
        let ep = generate_episode(&m, &env, &env, &short_cfg(), 11, index).unwrap();
        let r = ml_residuals(&ep, &m);
        let n = ep.stop_index();
        for k in 0..n.saturating_sub(1) {
            let s = &ep.steps[k];
            let s1 = &ep.steps[k + 1];
            let (v, vx) = m.value(s.x, s.p);
            let (v1, _) = m.value(s1.x, s1.p);
            let (d0, d1) = ((-ep.discounts[k]).exp(), (-ep.discounts[k + 1]).exp());
            let expected = d0 * v - d1 * v1 - d0 * entropy_reward(vx, 1.0, 1.0) * ep.dt;
            prop_assert!((r.residuals[k] - r.residuals[k + 1] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_rho_trace_is_the_instantaneous_gradient(index in 0u64..1000) {
        // With rho = 0 the direction is sum_k e^{-L_k} grad v_k dt Delta_k.
        let theta = trained_like_theta();
        let m = model(&theta);
        let env = EnvParams::default();
        let ep = generate_episode(&m, &env, &env, &short_cfg(), 12, index).unwrap();
        let (dir, _, errors) = ctd_direction(&ep, &m, 0.0);
        let dim = theta.dim();
        let mut expected = vec![0.0; dim];
        let (mut gv, mut gvx) = (vec![0.0; dim], vec![0.0; dim]);
        for (k, s) in ep.steps.iter().enumerate() {
            m.value_with_grad(s.x, s.p, &mut gv, &mut gvx);
            let w = (-ep.discounts[k]).exp() * ep.dt * errors[k];
            for (e, g) in expected.iter_mut().zip(&gv) {
                *e += w * g;
            }
        }
        for (a, b) in dir.iter().zip(&expected) {
            prop_assert!((a - b).abs() <= 1e-10 * b.abs().max(1e-6));
        }
    }
}

#[test]
fn belief_survives_a_million_steps() {
    let env = EnvParams::default();
    let dt: f64 = 1.0 / 252.0;
    let mut rng = stream(3, 0, Purpose::Noise);
    let mut b = BeliefState::new(0.5);
    for _ in 0..1_000_000 {
        let z: f64 = StandardNormal.sample(&mut rng);
        b = wonham_step(&b, z * dt.sqrt(), &env, dt);
        let p = b.p();
        assert!(p > 0.0 && p < 1.0);
    }
}

#[test]
fn belief_step_variance_peaks_at_maximal_uncertainty() {
    // Symmetric innovations +-sqrt(dt) give the one-step second moment of the belief move.
    let env = EnvParams::default();
    let dt: f64 = 1.0 / 252.0;
    let second_moment = |p: f64| {
        let b = BeliefState::new(p);
        let up = wonham_step(&b, dt.sqrt(), &env, dt).p() - p;
        let dn = wonham_step(&b, -dt.sqrt(), &env, dt).p() - p;
        0.5 * (up * up + dn * dn) - (0.5 * (up + dn)).powi(2)
    };
    let centre = second_moment(0.5);
    for p in [0.05, 0.2, 0.35, 0.45, 0.55, 0.65, 0.8, 0.95] {
        assert!(second_moment(p) < centre, "p = {p}");
    }
}

#[test]
fn innovation_is_zero_on_the_filtered_drift() {
    let env = EnvParams::default();
    for p in [0.0, 0.3, 1.0] {
        let dx = env.filtered_drift(p) / 252.0;
        assert!(innovation_increment(dx, p, &env, 1.0 / 252.0).abs() < 1e-15);
    }
}

#[test]
fn mean_uncontrolled_surplus_gain_matches_stationary_drift() {
    // Starting the chain from its stationary law makes E[X_T - x0] = T * average drift.
    let env = EnvParams::default();
    let pi = env.stationary_p1();
    let cfg = ControlConfig { p0: pi, horizon_t: 2.0, ruin_eps: f64::NEG_INFINITY, ..ControlConfig::default() };
    let n = cfg.n_steps();
    let gains: Vec<f64> = (0..10_000)
        .map(|i| {
            let path = simulate_path(&env, &cfg, n, 0.0, 21, i).unwrap();
            path.surplus[n] - path.surplus[0]
        })
        .collect();
    let len = gains.len() as f64;
    let mean = gains.iter().sum::<f64>() / len;
    let sd = (gains.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (len - 1.0)).sqrt();
    let oracle = cfg.horizon_t * (pi * env.mu1 + (1.0 - pi) * env.mu2);
    assert!((mean - oracle).abs() < 3.0 * sd / len.sqrt(), "{mean} vs {oracle}");
}

#[test]
fn regularized_ml_gradient_matches_finite_differences() {
    let theta = trained_like_theta();
    let env = EnvParams::default();
    let control = short_cfg();
    let m = model(&theta);
    let ep = generate_episode(&m, &env, &env, &control, 5, 0).unwrap();
    let cfg = TrainerConfig::default();
    let reg = regularizer(&cfg, &env, (0.1, 0.3), &control).unwrap();
    let objective = |t: &ThetaParams| {
        let (_, loss) = ml_gradient(&ep, &model(t));
        loss + reg.evaluate(t).0
    };
    let (data, _) = ml_gradient(&ep, &m);
    let (_, reg_grad) = reg.evaluate(&theta);
    let h = 1e-5;
    for coord in 0..theta.dim() {
        let mut up = theta.to_vec();
        let mut dn = theta.to_vec();
        up[coord] += h;
        dn[coord] -= h;
        let numeric = (objective(&ThetaParams::from_slice(2, &up).unwrap())
            - objective(&ThetaParams::from_slice(2, &dn).unwrap()))
            / (2.0 * h);
        let analytic = data[coord] + reg_grad[coord];
        assert!((analytic - numeric).abs() <= 1e-4 * numeric.abs().max(1e-6), "coord {coord}: {analytic} vs {numeric}");
    }
}

#[test]
fn zero_iterations_return_the_initial_parameters() {
    let env = EnvParams::default();
    let cfg = TrainerConfig { n_iterations: 0, ..TrainerConfig::default() };
    let (theta, log) = train(&cfg, &env, &FilterSource::Fixed(env), &ControlConfig::default(), 1).unwrap();
    assert_eq!(theta, ThetaParams::initial(2));
    assert!(log.records.is_empty());
}

#[test]
fn smoke_training_is_finite_and_deterministic() {
    let env = EnvParams::default();
    let cfg = TrainerConfig { n_iterations: 100, quadrature_intervals: 2000, ..TrainerConfig::default() };
    let control = ControlConfig::default();
    let (ta, a) = train(&cfg, &env, &FilterSource::Fixed(env), &control, 9).unwrap();
    let (tb, b) = train(&cfg, &env, &FilterSource::Fixed(env), &control, 9).unwrap();
    assert_eq!(ta, tb);
    assert_eq!(a, b);
    assert!(a.records.iter().all(|r| r.loss_ma.is_finite()));
    // The initial parameters give a degenerate weight; every later iterate is usable.
    assert!(a.records.iter().all(|r| r.value.is_finite()));
    assert!(a.records.iter().all(|r| r.exp_gamma.iter().all(|e| *e > 0.0)));
}
