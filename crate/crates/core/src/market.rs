//! Ground-truth environment: the hidden two-state chain and the surplus diffusion.

use alloc::vec::Vec;

use libm::{log, sqrt};
use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{ControlConfig, EnvParams};
use crate::rng::{stream, Purpose};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// High-drift state, probability p under the belief.
    One,
    Two,
}

impl Regime {
    pub fn label(self) -> u8 {
        match self {
            Regime::One => 1,
            Regime::Two => 2,
        }
    }

    pub fn drift(self, env: &EnvParams) -> f64 {
        match self {
            Regime::One => env.mu1,
            Regime::Two => env.mu2,
        }
    }

    pub fn discount(self, env: &EnvParams) -> f64 {
        match self {
            Regime::One => env.delta1,
            Regime::Two => env.delta2,
        }
    }

    fn leave_rate(self, env: &EnvParams) -> f64 {
        match self {
            Regime::One => env.q12,
            Regime::Two => env.q21,
        }
    }

    fn other(self) -> Regime {
        match self {
            Regime::One => Regime::Two,
            Regime::Two => Regime::One,
        }
    }
}

fn exponential<R: RngCore>(rate: f64, rng: &mut R) -> f64 {
    if rate <= 0.0 {
        return f64::INFINITY;
    }
    // 1 - U lies in (0, 1]
    let u: f64 = rng.random();
    -log(1.0 - u) / rate
}

/// Continuous-time regime process sampled by exponential holding times.
#[derive(Clone, Debug)]
pub struct RegimeClock {
    regime: Regime,
    next_switch: f64,
}

impl RegimeClock {
    pub fn new<R: RngCore>(initial: Regime, env: &EnvParams, rng: &mut R) -> Self {
        RegimeClock { regime: initial, next_switch: exponential(initial.leave_rate(env), rng) }
    }

    /// Regime in force at time `t`; times must be nondecreasing across calls.
    pub fn at<R: RngCore>(&mut self, t: f64, env: &EnvParams, rng: &mut R) -> Regime {
        while self.next_switch <= t {
            self.regime = self.regime.other();
            self.next_switch += exponential(self.regime.leave_rate(env), rng);
        }
        self.regime
    }
}

fn check_rates(env: &EnvParams, dt: f64) -> Result<()> {
    if env.q12 * dt >= 1.0 || env.q21 * dt >= 1.0 {
        return Err(Error::config("transition intensity times dt must stay below 1"));
    }
    if env.q12 < 0.0 || env.q21 < 0.0 {
        return Err(Error::config("transition intensities must be nonnegative"));
    }
    Ok(())
}

/// Draws the initial regime as regime 1 with probability `p0`.
pub fn initial_regime<R: RngCore>(p0: f64, rng: &mut R) -> Regime {
    let u: f64 = rng.random();
    if u < p0 {
        Regime::One
    } else {
        Regime::Two
    }
}

/// Regime at each grid time `k dt`, `k = 0..=n_steps`.
pub fn simulate_regime_chain<R: RngCore>(
    env: &EnvParams,
    n_steps: usize,
    dt: f64,
    initial: Regime,
    rng: &mut R,
) -> Result<Vec<Regime>> {
    check_rates(env, dt)?;
    let mut clock = RegimeClock::new(initial, env, rng);
    Ok((0..=n_steps).map(|k| clock.at(k as f64 * dt, env, rng)).collect())
}

/// Snapshot of one surplus path.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathState {
    pub t: f64,
    pub x: f64,
    pub regime: Regime,
    pub alive: bool,
}

/// A simulated path on the uniform grid. Entry `k` of every vector refers to time
/// `k dt`; `increments[k]` and `dividends[k]` drive the move from `k` to `k + 1`
/// (the final entries are zero).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawPath {
    pub dt: f64,
    pub times: Vec<f64>,
    pub surplus: Vec<f64>,
    pub regimes: Vec<Regime>,
    pub increments: Vec<f64>,
    pub dividends: Vec<f64>,
}

impl RawPath {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the first grid time at which the path is absorbed.
    pub fn ruin_index(&self, ruin_eps: f64) -> Option<usize> {
        self.surplus.iter().position(|&x| x <= ruin_eps)
    }
}

/// One Euler-Maruyama step of the surplus, with absorption.
pub fn surplus_step(state: &mut PathState, env: &EnvParams, u: f64, dt: f64, dw: f64, ruin_eps: f64) {
    if !state.alive {
        state.t += dt;
        return;
    }
    state.x += (state.regime.drift(env) - u) * dt + env.sigma * dw;
    state.t += dt;
    if state.x <= ruin_eps {
        state.x = 0.0;
        state.alive = false;
    }
}

/// Surplus path under given regimes and dividend rates (one per step).
pub fn simulate_surplus<R: RngCore>(
    env: &EnvParams,
    cfg: &ControlConfig,
    regimes: &[Regime],
    dividends: &[f64],
    rng: &mut R,
) -> Result<RawPath> {
    let n = regimes.len();
    if n == 0 {
        return Err(Error::config("regime sequence is empty"));
    }
    if dividends.len() + 1 < n {
        return Err(Error::config("need one dividend rate per step"));
    }
    if let Some(&u) = dividends.iter().find(|&&u| !(0.0..=cfg.cap_a).contains(&u)) {
        return Err(Error::Domain { what: "dividend rate", value: u });
    }
    let sd = sqrt(cfg.dt);
    let mut state = PathState { t: 0.0, x: cfg.x0, regime: regimes[0], alive: cfg.x0 > cfg.ruin_eps };
    if !state.alive {
        state.x = 0.0;
    }
    let mut path = RawPath {
        dt: cfg.dt,
        times: Vec::with_capacity(n),
        surplus: Vec::with_capacity(n),
        regimes: regimes.to_vec(),
        increments: alloc::vec![0.0; n],
        dividends: alloc::vec![0.0; n],
    };
    for k in 0..n {
        path.times.push(k as f64 * cfg.dt);
        path.surplus.push(state.x);
        if k + 1 == n {
            break;
        }
        let xi: f64 = StandardNormal.sample(rng);
        let dw = sd * xi;
        let u = if state.alive { dividends[k] } else { 0.0 };
        state.regime = regimes[k];
        surplus_step(&mut state, env, u, cfg.dt, dw, cfg.ruin_eps);
        path.increments[k] = dw;
        path.dividends[k] = u;
    }
    Ok(path)
}

/// Full path for `path_index` under a constant dividend rate: initial regime drawn from
/// `cfg.p0`, regimes from exponential clocks, then the surplus.
pub fn simulate_path(
    env: &EnvParams,
    cfg: &ControlConfig,
    n_steps: usize,
    dividend_rate: f64,
    master_seed: u64,
    path_index: u64,
) -> Result<RawPath> {
    let mut start = stream(master_seed, path_index, Purpose::Start);
    let mut regime_rng = stream(master_seed, path_index, Purpose::Regime);
    let mut noise = stream(master_seed, path_index, Purpose::Noise);
    let initial = initial_regime(cfg.p0, &mut start);
    let regimes = simulate_regime_chain(env, n_steps, cfg.dt, initial, &mut regime_rng)?;
    let dividends = alloc::vec![dividend_rate; n_steps];
    simulate_surplus(env, cfg, &regimes, &dividends, &mut noise)
}
