//! The training loop: episode generation under the current policy, one evaluation
//! update per iteration, diagnostics and checkpoints.

use alloc::vec::Vec;

use libm::pow;
use serde::{Deserialize, Serialize};

use super::ctd::{ctd_direction, ctd_update};
use super::episode::generate_episode;
use super::ml::{ml_gradient, ml_update};
use crate::error::{Error, Result};
use crate::estimate::{heuristic_estimate, EstimationReport, HeuristicConfig};
use crate::market::simulate_path;
use crate::model::{boundary_targets, component_g_with_grad, f_lambda, ParamModel, ThetaParams, GAMMA_LEN};
use crate::num::norm2;
use crate::params::{ControlConfig, EnvParams};
use crate::rng::subseed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PeMode {
    /// Regularized martingale-loss descent.
    Ml,
    /// Episodic online CTD(rho) ascent.
    Ctd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerConfig {
    pub mode: PeMode,
    pub rho: f64,
    pub lr_phi1: f64,
    pub lr_phi2: f64,
    pub lr_gamma: [f64; GAMMA_LEN],
    pub lr_decay_exponent: f64,
    pub reg_env_weights: [f64; GAMMA_LEN],
    pub reg_bc_weights: [f64; 2],
    /// Environment the surrogates and boundary values are pulled toward.
    pub env_reference: EnvParams,
    pub batch_size: usize,
    pub n_iterations: usize,
    pub poly_order: usize,
    /// Quadrature cells for the belief integrals.
    pub quadrature_intervals: usize,
    /// Global norm above which the update direction is rescaled.
    pub clip_norm: f64,
    /// Trailing window of the logged loss average.
    pub loss_window: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            mode: PeMode::Ctd,
            rho: 0.0,
            lr_phi1: 3e-4,
            lr_phi2: 3e-4,
            lr_gamma: [3e-2, 5e-3, 5e-3, 5e-3, 5e-3],
            lr_decay_exponent: 0.1,
            reg_env_weights: [7.0, 0.5, 0.5, 0.2, 0.2],
            reg_bc_weights: [60.0, 60.0],
            env_reference: EnvParams::default(),
            batch_size: 1,
            n_iterations: 10_000,
            poly_order: 2,
            quadrature_intervals: 10_000,
            clip_norm: 1e3,
            loss_window: 5,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::config("rho must lie in [0, 1]"));
        }
        let nonneg = [self.lr_phi1, self.lr_phi2, self.lr_decay_exponent, self.clip_norm]
            .iter()
            .chain(&self.lr_gamma)
            .chain(&self.reg_env_weights)
            .chain(&self.reg_bc_weights)
            .all(|v| *v >= 0.0 && v.is_finite());
        if !nonneg {
            return Err(Error::config("learning rates and weights must be nonnegative"));
        }
        if self.batch_size == 0 || self.loss_window == 0 {
            return Err(Error::config("batch size and loss window must be positive"));
        }
        self.env_reference.validate()
    }

    /// Per-coordinate base rates in the flattened layout.
    pub fn rates(&self, theta: &ThetaParams) -> Vec<f64> {
        let nb = theta.n_basis();
        let mut r = self.lr_gamma.to_vec();
        r.extend(core::iter::repeat_n(self.lr_phi1, nb));
        r.extend(core::iter::repeat_n(self.lr_phi2, nb));
        r
    }
}

/// Parameters the filter runs with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FilterSource {
    Fixed(EnvParams),
    /// Re-estimate from a fresh historical path every iteration. When
    /// `reference_follows` is set the regularization target tracks the estimate too.
    Reestimate { heuristic: HeuristicConfig, history_steps: usize, reference_follows: bool },
}

/// Reference used by the regularizer.
pub type RegReference = EnvParams;

/// Environment and boundary penalties.
#[derive(Clone, Debug, PartialEq)]
pub struct Regularizer {
    pub env_weights: [f64; GAMMA_LEN],
    pub bc_weights: [f64; 2],
    pub targets: [f64; GAMMA_LEN],
    pub boundary: (f64, f64),
    pub deltas: (f64, f64),
    pub f0: f64,
}

pub fn regularizer(cfg: &TrainerConfig, reference: &RegReference, deltas: (f64, f64), control: &ControlConfig) -> Result<Regularizer> {
    let reference = EnvParams { delta1: deltas.0, delta2: deltas.1, ..*reference };
    Ok(Regularizer {
        env_weights: cfg.reg_env_weights,
        bc_weights: cfg.reg_bc_weights,
        targets: reference.surrogate_targets(),
        boundary: boundary_targets(&reference, control.lambda, control.cap_a)?,
        deltas,
        f0: f_lambda(0.0, control.lambda, control.cap_a),
    })
}

impl Regularizer {
    /// Boundary mismatches g1(i) + g2(i) - g(i) at i = 0, 1.
    pub fn boundary_errors(&self, theta: &ThetaParams) -> [f64; 2] {
        let mut scratch = alloc::vec![0.0; theta.n_basis()];
        let mut out = [0.0; 2];
        for (slot, (p, target)) in [(0.0, self.boundary.0), (1.0, self.boundary.1)].into_iter().enumerate() {
            let g1 = component_g_with_grad(theta, self.f0 / self.deltas.0, p, 1, &mut scratch);
            let g2 = component_g_with_grad(theta, self.f0 / self.deltas.1, p, 2, &mut scratch);
            out[slot] = g1 + g2 - target;
        }
        out
    }

    /// Penalty value and its gradient in the flattened layout.
    pub fn evaluate(&self, theta: &ThetaParams) -> (f64, Vec<f64>) {
        let mut grad = alloc::vec![0.0; theta.dim()];
        let mut penalty = 0.0;
        let e = theta.exp_gamma();
        for j in 0..GAMMA_LEN {
            let gap = e[j] - self.targets[j];
            penalty += 0.5 * self.env_weights[j] * gap * gap;
            grad[j] = self.env_weights[j] * gap * e[j];
        }
        let nb = theta.n_basis();
        let mut dg = alloc::vec![0.0; nb];
        let errors = self.boundary_errors(theta);
        for (slot, p) in [0.0, 1.0].into_iter().enumerate() {
            let w = self.bc_weights[slot];
            penalty += 0.5 * w * errors[slot] * errors[slot];
            for i in 1..=2 {
                let scale = self.f0 / if i == 1 { self.deltas.0 } else { self.deltas.1 };
                component_g_with_grad(theta, scale, p, i, &mut dg);
                let off = theta.phi_offset(i);
                for r in 0..nb {
                    grad[off + r] += w * errors[slot] * dg[r];
                }
            }
        }
        (penalty, grad)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub iteration: usize,
    /// v(x0, p0) at the parameters after this iteration's update.
    pub value: f64,
    /// Data loss plus penalties at the parameters used in this iteration.
    pub loss: f64,
    /// Trailing average of `loss`.
    pub loss_ma: f64,
    pub exp_gamma: [f64; GAMMA_LEN],
    pub grad_norm: f64,
    /// No episode could be generated (value surface undefined); only the
    /// regularizer moved the parameters.
    pub aborted: bool,
    /// The update was discarded because the direction was not finite.
    pub rejected: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<TrainRecord>,
}

/// Resumable training state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub next_iteration: usize,
    pub theta: ThetaParams,
    pub recent_losses: Vec<f64>,
    pub consecutive_aborts: usize,
}

impl Checkpoint {
    pub fn initial(cfg: &TrainerConfig) -> Self {
        Checkpoint {
            next_iteration: 0,
            theta: ThetaParams::initial(cfg.poly_order),
            recent_losses: Vec::new(),
            consecutive_aborts: 0,
        }
    }
}

/// Heuristic estimate from a simulated uncontrolled history of `history_steps` steps.
/// Histories on which a regime is unidentifiable are redrawn (up to 100 times) from
/// deterministic follow-up streams.
pub fn estimate_from_history(
    market: &EnvParams,
    control: &ControlConfig,
    heuristic: &HeuristicConfig,
    history_steps: usize,
    seed: u64,
    index: u64,
) -> Result<EstimationReport> {
    let history_cfg = ControlConfig { ruin_eps: f64::NEG_INFINITY, ..*control };
    let mut last = Error::config("no history attempted");
    for attempt in 0..100u64 {
        let path = simulate_path(market, &history_cfg, history_steps, 0.0, seed, index * 100 + attempt)?;
        match heuristic_estimate(&path.surplus, control.dt, heuristic, (market.delta1, market.delta2)) {
            Ok(rep) => return Ok(rep),
            Err(e @ Error::EstimationDegenerate { .. }) => last = e,
            Err(e) => return Err(e),
        }
    }
    Err(last)
}

fn clip(direction: &mut [f64], max_norm: f64) -> f64 {
    let n = norm2(direction);
    if n > max_norm && max_norm > 0.0 {
        let s = max_norm / n;
        direction.iter_mut().for_each(|d| *d *= s);
    }
    n
}

const EPISODE_SEED_TAG: u64 = 0x5eed_0001;
const HISTORY_SEED_TAG: u64 = 0x5eed_0002;

/// Trains from the initial parameters.
pub fn train(
    cfg: &TrainerConfig,
    market: &EnvParams,
    filter: &FilterSource,
    control: &ControlConfig,
    seed: u64,
) -> Result<(ThetaParams, TrainLog)> {
    let (ck, log) = train_from(cfg, market, filter, control, seed, Checkpoint::initial(cfg), 0, &mut |_| {})?;
    Ok((ck.theta, log))
}

/// Continues training from `state` up to `cfg.n_iterations`. `on_checkpoint` receives
/// the state after every `checkpoint_every` iterations (never when it is 0).
#[allow(clippy::too_many_arguments)]
pub fn train_from(
    cfg: &TrainerConfig,
    market: &EnvParams,
    filter: &FilterSource,
    control: &ControlConfig,
    seed: u64,
    mut state: Checkpoint,
    checkpoint_every: usize,
    on_checkpoint: &mut dyn FnMut(&Checkpoint),
) -> Result<(Checkpoint, TrainLog)> {
    cfg.validate()?;
    control.validate()?;
    state.theta.validate()?;
    let deltas = (market.delta1, market.delta2);
    let episode_seed = subseed(seed, EPISODE_SEED_TAG);
    let history_seed = subseed(seed, HISTORY_SEED_TAG);
    let base_rates = cfg.rates(&state.theta);
    let abort_limit = (cfg.n_iterations / 2).max(10);
    let build = |theta: &ThetaParams| {
        ParamModel::new(theta, deltas, control.lambda, control.cap_a, cfg.quadrature_intervals)
    };
    let mut model = build(&state.theta);
    let mut log = TrainLog::default();
    let fixed_reg = match filter {
        FilterSource::Fixed(_) | FilterSource::Reestimate { reference_follows: false, .. } => {
            Some(regularizer(cfg, &cfg.env_reference, deltas, control)?)
        }
        FilterSource::Reestimate { .. } => None,
    };

    for n in state.next_iteration..cfg.n_iterations {
        let (filter_env, reg) = match filter {
            FilterSource::Fixed(env) => (*env, fixed_reg.clone().unwrap()),
            FilterSource::Reestimate { heuristic, history_steps, reference_follows } => {
                let est = estimate_from_history(market, control, heuristic, *history_steps, history_seed, n as u64)?
                    .estimates;
                let reg = if *reference_follows {
                    regularizer(cfg, &est, deltas, control)?
                } else {
                    fixed_reg.clone().unwrap()
                };
                (est, reg)
            }
        };

        let dim = state.theta.dim();
        let mut data = alloc::vec![0.0; dim];
        let mut data_loss = 0.0;
        let mut used = 0usize;
        if let Ok(m) = &model {
            for b in 0..cfg.batch_size {
                let index = (n * cfg.batch_size + b) as u64;
                let episode = match generate_episode(m, market, &filter_env, control, episode_seed, index) {
                    Ok(ep) => ep,
                    Err(Error::EpisodeAborted) => continue,
                    Err(e) => return Err(e),
                };
                if episode.stop_index() == 0 {
                    continue;
                }
                let (g, loss) = match cfg.mode {
                    PeMode::Ml => ml_gradient(&episode, m),
                    PeMode::Ctd => {
                        let (g, loss, _) = ctd_direction(&episode, m, cfg.rho);
                        (g, loss)
                    }
                };
                for (d, gi) in data.iter_mut().zip(&g) {
                    *d += gi;
                }
                data_loss += loss;
                used += 1;
            }
        }
        let aborted = used == 0;
        if used > 0 {
            let s = 1.0 / used as f64;
            data.iter_mut().for_each(|d| *d *= s);
            data_loss *= s;
        }
        state.consecutive_aborts = if aborted { state.consecutive_aborts + 1 } else { 0 };
        if state.consecutive_aborts > abort_limit {
            return Err(Error::TrainingFailed { consecutive: state.consecutive_aborts });
        }

        let (penalty, reg_grad) = reg.evaluate(&state.theta);
        // Combined direction in "descent" orientation: theta <- theta - eta * direction.
        let mut direction: Vec<f64> = match cfg.mode {
            PeMode::Ml => data.iter().zip(&reg_grad).map(|(d, r)| d + r).collect(),
            PeMode::Ctd => data.iter().zip(&reg_grad).map(|(d, r)| r - d).collect(),
        };
        let finite = direction.iter().all(|d| d.is_finite());
        let grad_norm = if finite { clip(&mut direction, cfg.clip_norm) } else { f64::NAN };
        let decay = pow(1.0 + n as f64, -cfg.lr_decay_exponent);
        if finite {
            let rates: Vec<f64> = base_rates.iter().map(|r| r * decay).collect();
            let theta_vec = state.theta.to_vec();
            let zeros = alloc::vec![0.0; dim];
            let next = match cfg.mode {
                PeMode::Ml => ml_update(&theta_vec, &direction, &zeros, &rates),
                PeMode::Ctd => ctd_update(&theta_vec, &zeros, &direction, &rates),
            };
            state.theta = ThetaParams::from_slice(state.theta.poly_order, &next)?;
            model = build(&state.theta);
        }

        let loss = data_loss + penalty;
        state.recent_losses.push(loss);
        if state.recent_losses.len() > cfg.loss_window {
            state.recent_losses.remove(0);
        }
        let loss_ma = state.recent_losses.iter().sum::<f64>() / state.recent_losses.len() as f64;
        let value = match &model {
            Ok(m) => m.value(control.x0, control.p0).0,
            Err(_) => f64::NAN,
        };
        log.records.push(TrainRecord {
            iteration: n,
            value,
            loss,
            loss_ma,
            exp_gamma: state.theta.exp_gamma(),
            grad_norm,
            aborted,
            rejected: !finite,
        });
        state.next_iteration = n + 1;
        if checkpoint_every > 0 && state.next_iteration % checkpoint_every == 0 {
            on_checkpoint(&state);
        }
    }
    Ok((state, log))
}
