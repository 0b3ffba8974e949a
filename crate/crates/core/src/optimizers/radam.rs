//! Rectified Adam (Liu et al., 2020).

use super::adam::bias_correction;
use super::{OptimizerConfig, OptimizerState, StepInfo, VChange};
use crate::numerics::Tensor;

/// Rectification threshold: at or below it the step is plain momentum.
pub const RHO_THRESHOLD: f64 = 4.0;

/// `rho_inf = 2 / (1 - b2) - 1`.
pub fn rho_inf(beta2: f64) -> f64 {
    2.0 / (1.0 - beta2) - 1.0
}

/// Length of the approximated simple moving average at step `t`.
pub fn rho(beta2: f64, t: u64) -> f64 {
    let pow = (t as f64 * beta2.ln()).exp();
    rho_inf(beta2) - 2.0 * t as f64 * pow / bias_correction(beta2, t)
}

/// Variance rectification factor; only meaningful for `rho > 4`.
pub fn rectifier(beta2: f64, t: u64) -> f64 {
    let r = rho(beta2, t);
    let inf = rho_inf(beta2);
    (((r - 4.0) * (r - 2.0) * inf) / ((inf - 4.0) * (inf - 2.0) * r)).sqrt()
}

#[allow(clippy::too_many_arguments)]
pub(super) fn step(
    state: &mut OptimizerState,
    params: &mut [Tensor],
    grads: &[Tensor],
    cfg: &OptimizerConfig,
    beta1: f64,
    beta2: f64,
    t: u64,
    lr: f64,
) -> StepInfo {
    let bc1 = bias_correction(beta1, t);
    let bc2 = bias_correction(beta2, t);
    let bc2_prev = if t > 1 { bias_correction(beta2, t - 1) } else { 1.0 };
    let adaptive = rho(beta2, t) > RHO_THRESHOLD;
    let r = if adaptive { rectifier(beta2, t) } else { 0.0 };
    let eps = cfg.eps;
    let mut change = VChange::default();
    for ((param, grad), slot) in params.iter_mut().zip(grads).zip(state.slots.iter_mut()) {
        let decay = cfg.decay_for(param.kind());
        let m = slot.m.data_mut();
        let v = slot.v.data_mut();
        for (i, (theta, &g)) in param.data_mut().iter_mut().zip(grad.data()).enumerate() {
            let v_hat_prev = v[i] / bc2_prev;
            m[i] = beta1 * m[i] + (1.0 - beta1) * g;
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            change.observe(v_hat_prev, v_hat);
            let update = if adaptive {
                r * m_hat / (v_hat.sqrt() + eps)
            } else {
                m_hat
            };
            *theta -= lr * (update + decay * *theta);
        }
    }
    let beta2_hat = if t == 1 {
        0.0
    } else {
        beta2 * bias_correction(beta2, t - 1) / bc2
    };
    StepInfo {
        t,
        lr,
        beta2_hat: Some(beta2_hat),
        v_rel_change: Some(change.ratio(eps)),
    }
}
