use super::{OptimizerConfig, OptimizerState, StepInfo, VChange};
use crate::numerics::Tensor;
use crate::schedules::DecaySchedule;

/// Schedule-driven Adam:
///
/// ```text
/// m = b1(t) m + (1 - b1(t)) g
/// v = b2(t) v + (1 - b2(t)) g^2
/// theta -= lr (m / (sqrt(v) + eps) + lambda_l theta)
/// ```
///
/// No separate bias correction: with `b(1) = 0` the first update copies
/// `g` and `g^2` into the moments.
pub(super) fn step_generalized(
    state: &mut OptimizerState,
    params: &mut [Tensor],
    grads: &[Tensor],
    cfg: &OptimizerConfig,
    schedule: &DecaySchedule,
    t: u64,
    lr: f64,
) -> StepInfo {
    let c = schedule.coefficients(t);
    let eps = cfg.eps;
    let mut change = VChange::default();
    for ((param, grad), slot) in params.iter_mut().zip(grads).zip(state.slots.iter_mut()) {
        let decay = cfg.decay_for(param.kind());
        let m = slot.m.data_mut();
        let v = slot.v.data_mut();
        for (i, (theta, &g)) in param.data_mut().iter_mut().zip(grad.data()).enumerate() {
            m[i] = c.beta1_hat * m[i] + c.one_minus_beta1_hat * g;
            let v_new = c.beta2_hat * v[i] + c.one_minus_beta2_hat * g * g;
            change.observe(v[i], v_new);
            v[i] = v_new;
            let u = m[i] / (v_new.sqrt() + eps);
            *theta -= lr * (u + decay * *theta);
        }
    }
    StepInfo {
        t,
        lr,
        beta2_hat: Some(c.beta2_hat),
        v_rel_change: Some(change.ratio(eps)),
    }
}

/// `1 - b^t`, evaluated stably.
pub(super) fn bias_correction(beta: f64, t: u64) -> f64 {
    -(t as f64 * beta.ln()).exp_m1()
}

/// Bias-corrected Adam with raw EMA buffers. Also serves AdamW, which only
/// differs in which parameters receive weight decay.
#[allow(clippy::too_many_arguments)]
pub(super) fn step_classic(
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
            *theta -= lr * (m_hat / (v_hat.sqrt() + eps) + decay * *theta);
        }
    }
    StepInfo {
        t,
        lr,
        beta2_hat: Some(beta2 * bias_ratio(beta2, t)),
        v_rel_change: Some(change.ratio(eps)),
    }
}

/// `(1 - b^(t-1)) / (1 - b^t)`, so that `b * bias_ratio` is the implied decay rate.
fn bias_ratio(beta: f64, t: u64) -> f64 {
    if t == 1 {
        0.0
    } else {
        bias_correction(beta, t - 1) / bias_correction(beta, t)
    }
}
