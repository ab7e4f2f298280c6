//! Martingale-loss policy evaluation.

use alloc::vec::Vec;

use libm::exp;

use super::episode::Episode;
use crate::model::{entropy_reward, entropy_reward_sensitivity, ParamModel};

/// Per-step residuals m_k and their parameter gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct MlResiduals {
    pub residuals: Vec<f64>,
    pub gradients: Vec<Vec<f64>>,
}

/// m_k = e^{-L_k} v(x_k, p_k) - sum_{j >= k} e^{-L_j} H_j dt, with gradients, by one
/// backward pass over suffix sums.
pub fn ml_residuals(episode: &Episode, model: &ParamModel) -> MlResiduals {
    let k_len = episode.stop_index();
    let dim = model.theta.dim();
    let dt = episode.dt;
    let (lambda, cap_a) = (model.lambda, model.cap_a);
    let mut residuals = alloc::vec![0.0; k_len];
    let mut gradients = alloc::vec![Vec::new(); k_len];
    let mut reward_tail = 0.0;
    let mut sens_tail = alloc::vec![0.0; dim];
    let mut gv = alloc::vec![0.0; dim];
    let mut gvx = alloc::vec![0.0; dim];
    for k in (0..k_len).rev() {
        let s = &episode.steps[k];
        let disc = exp(-episode.discounts[k]);
        let (v, vx) = model.value_with_grad(s.x, s.p, &mut gv, &mut gvx);
        reward_tail += disc * entropy_reward(vx, lambda, cap_a) * dt;
        let w = disc * entropy_reward_sensitivity(vx, lambda, cap_a) * dt;
        for (t, g) in sens_tail.iter_mut().zip(&gvx) {
            *t += w * g;
        }
        residuals[k] = disc * v - reward_tail;
        gradients[k] = gv.iter().zip(&sens_tail).map(|(a, b)| disc * a - b).collect();
    }
    MlResiduals { residuals, gradients }
}

/// Gradient of (1/2) sum m_k^2 dt and the loss itself.
pub fn ml_gradient(episode: &Episode, model: &ParamModel) -> (Vec<f64>, f64) {
    let dim = model.theta.dim();
    let r = ml_residuals(episode, model);
    let dt = episode.dt;
    let mut grad = alloc::vec![0.0; dim];
    let mut loss = 0.0;
    for (m, g) in r.residuals.iter().zip(&r.gradients) {
        loss += 0.5 * m * m * dt;
        for (acc, gi) in grad.iter_mut().zip(g) {
            *acc += m * dt * gi;
        }
    }
    (grad, loss)
}

/// One descent step `theta - rates * (data gradient + regularizer gradient)` in the
/// flattened layout.
pub fn ml_update(theta: &[f64], data_gradient: &[f64], reg_gradient: &[f64], rates: &[f64]) -> Vec<f64> {
    theta
        .iter()
        .zip(data_gradient)
        .zip(reg_gradient)
        .zip(rates)
        .map(|(((t, d), r), eta)| t - eta * (d + r))
        .collect()
}
