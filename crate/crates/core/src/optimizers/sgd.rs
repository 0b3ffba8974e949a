use super::{OptimizerConfig, OptimizerState, StepInfo};
use crate::numerics::Tensor;

pub(super) fn step_sgd(
    params: &mut [Tensor],
    grads: &[Tensor],
    cfg: &OptimizerConfig,
    t: u64,
    lr: f64,
) -> StepInfo {
    for (param, grad) in params.iter_mut().zip(grads) {
        let decay = cfg.decay_for(param.kind());
        for (theta, &g) in param.data_mut().iter_mut().zip(grad.data()) {
            *theta -= lr * (g + decay * *theta);
        }
    }
    StepInfo {
        t,
        lr,
        beta2_hat: None,
        v_rel_change: None,
    }
}

/// Heavy ball with the learning rate applied to the buffer; the buffer
/// lives in the `m` slot.
pub(super) fn step_momentum(
    state: &mut OptimizerState,
    params: &mut [Tensor],
    grads: &[Tensor],
    cfg: &OptimizerConfig,
    mu: f64,
    t: u64,
    lr: f64,
) -> StepInfo {
    for ((param, grad), slot) in params.iter_mut().zip(grads).zip(state.slots.iter_mut()) {
        let decay = cfg.decay_for(param.kind());
        let buf = slot.m.data_mut();
        for (i, (theta, &g)) in param.data_mut().iter_mut().zip(grad.data()).enumerate() {
            buf[i] = mu * buf[i] + g;
            *theta -= lr * (buf[i] + decay * *theta);
        }
    }
    StepInfo {
        t,
        lr,
        beta2_hat: None,
        v_rel_change: None,
    }
}
