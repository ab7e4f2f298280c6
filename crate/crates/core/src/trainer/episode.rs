use alloc::vec::Vec;

use libm::sqrt;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{filtered_discount_step, innovation_increment, wonham_step, BeliefState};
use crate::market::{initial_regime, RegimeClock};
use crate::model::{entropy_reward, sample_action};
use crate::params::{ControlConfig, EnvParams};
use crate::policy::ValueSurface;
use crate::rng::{stream, Purpose};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Termination {
    Ruin,
    Horizon,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStep {
    pub t: f64,
    pub x: f64,
    pub p: f64,
    pub u: f64,
    /// Marginal value used to shape the action density.
    pub vx: f64,
    /// Entropy-regularized reward rate at this step.
    pub reward: f64,
    /// Filtered discount rate at this step.
    pub discount_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub steps: Vec<EpisodeStep>,
    /// Cumulative discount through step k inclusive.
    pub discounts: Vec<f64>,
    /// State reached after the last recorded step.
    pub final_x: f64,
    pub final_p: f64,
    pub termination: Termination,
    pub dt: f64,
}

impl Episode {
    pub fn stop_index(&self) -> usize {
        self.steps.len()
    }
}

/// Runs the frozen policy `policy` for one episode. The hidden market evolves under
/// `market`; the belief is filtered with `filter`. Randomness comes from the streams of
/// `(seed, index)`.
pub fn generate_episode<P: ValueSurface + ?Sized>(
    policy: &P,
    market: &EnvParams,
    filter: &EnvParams,
    cfg: &ControlConfig,
    seed: u64,
    index: u64,
) -> Result<Episode> {
    let mut start = stream(seed, index, Purpose::Start);
    let mut regime_rng = stream(seed, index, Purpose::Regime);
    let mut noise = stream(seed, index, Purpose::Noise);
    let mut actions = stream(seed, index, Purpose::Action);
    let dt = cfg.dt;
    let sd = sqrt(dt);
    let n = cfg.n_steps();
    let mut clock = RegimeClock::new(initial_regime(cfg.p0, &mut start), market, &mut regime_rng);
    let mut belief = BeliefState::new(cfg.p0);
    let mut x = cfg.x0;
    let mut lambda_acc = 0.0;
    let mut steps = Vec::with_capacity(n);
    let mut discounts = Vec::with_capacity(n);
    let mut termination = Termination::Horizon;
    for k in 0..n {
        if x <= cfg.ruin_eps {
            termination = Termination::Ruin;
            break;
        }
        let t = k as f64 * dt;
        let p = belief.p();
        let (_, vx) = policy.value(x, p);
        if !vx.is_finite() {
            return Err(Error::EpisodeAborted);
        }
        let z: f64 = actions.random();
        let u = sample_action(1.0 - vx, z, cfg.lambda, cfg.cap_a)?;
        let rate = filter.filtered_discount(p);
        lambda_acc += filtered_discount_step(p, filter, dt);
        steps.push(EpisodeStep {
            t,
            x,
            p,
            u,
            vx,
            reward: entropy_reward(vx, cfg.lambda, cfg.cap_a),
            discount_rate: rate,
        });
        discounts.push(lambda_acc);

        let regime = clock.at(t, market, &mut regime_rng);
        let xi: f64 = StandardNormal.sample(&mut noise);
        let x_next = x + (regime.drift(market) - u) * dt + market.sigma * sd * xi;
        // The insurer knows its own payout, so the filter sees the premium-driven part.
        let dw_hat = innovation_increment(x_next - x + u * dt, p, filter, dt);
        belief = wonham_step(&belief, dw_hat, filter, dt);
        x = x_next;
    }
    if x <= cfg.ruin_eps {
        termination = Termination::Ruin;
        x = 0.0;
    }
    Ok(Episode { steps, discounts, final_x: x, final_p: belief.p(), termination, dt })
}
