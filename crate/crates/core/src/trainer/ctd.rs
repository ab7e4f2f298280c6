//! Continuous-time TD(rho) with eligibility traces.

use alloc::vec::Vec;

use libm::{exp, pow};

use super::episode::Episode;
use crate::model::{entropy_reward, ParamModel};

/// Returns (G_TD, (1/2) sum (e^{-L_k} Delta_k)^2, per-step TD errors Delta_k).
pub fn ctd_direction(episode: &Episode, model: &ParamModel, rho: f64) -> (Vec<f64>, f64, Vec<f64>) {
    let k_len = episode.stop_index();
    let dim = model.theta.dim();
    let dt = episode.dt;
    // 0^0 = 1, and rho^dt with dt > 0 vanishes at rho = 0.
    let decay = if rho == 0.0 { 0.0 } else { pow(rho, dt) };
    let mut trace = alloc::vec![0.0; dim];
    let mut direction = alloc::vec![0.0; dim];
    let mut gv = alloc::vec![0.0; dim];
    let mut gvx = alloc::vec![0.0; dim];
    let mut errors = Vec::with_capacity(k_len);
    let mut loss = 0.0;
    if k_len == 0 {
        return (direction, loss, errors);
    }
    let (mut v, mut vx) = model.value_with_grad(episode.steps[0].x, episode.steps[0].p, &mut gv, &mut gvx);
    for k in 0..k_len {
        let s = &episode.steps[k];
        for (t, g) in trace.iter_mut().zip(&gv) {
            *t = decay * *t + g * dt;
        }
        let reward = entropy_reward(vx, model.lambda, model.cap_a);
        let (v_next, vx_next) = if k + 1 < k_len {
            let n = &episode.steps[k + 1];
            model.value_with_grad(n.x, n.p, &mut gv, &mut gvx)
        } else if episode.final_x > 0.0 {
            model.value(episode.final_x, episode.final_p)
        } else {
            (0.0, 0.0)
        };
        let delta = v_next - v - s.discount_rate * v * dt + reward * dt;
        let disc = exp(-episode.discounts[k]);
        for (d, t) in direction.iter_mut().zip(&trace) {
            *d += disc * t * delta;
        }
        loss += 0.5 * (disc * delta) * (disc * delta);
        errors.push(delta);
        v = v_next;
        vx = vx_next;
    }
    (direction, loss, errors)
}

/// One ascent step `theta + rates * (G_TD - regularizer gradient)`.
pub fn ctd_update(theta: &[f64], direction: &[f64], reg_gradient: &[f64], rates: &[f64]) -> Vec<f64> {
    theta
        .iter()
        .zip(direction)
        .zip(reg_gradient)
        .zip(rates)
        .map(|(((t, d), r), eta)| t + eta * (d - r))
        .collect()
}
