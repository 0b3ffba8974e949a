//! Lion (Chen et al., 2023): sign of an interpolated momentum.

use super::{OptimizerConfig, OptimizerState, StepInfo};
use crate::numerics::{sign, Tensor};

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
    for ((param, grad), slot) in params.iter_mut().zip(grads).zip(state.slots.iter_mut()) {
        let decay = cfg.decay_for(param.kind());
        let m = slot.m.data_mut();
        for (i, (theta, &g)) in param.data_mut().iter_mut().zip(grad.data()).enumerate() {
            let c = beta1 * m[i] + (1.0 - beta1) * g;
            *theta -= lr * (sign(c) + decay * *theta);
            m[i] = beta2 * m[i] + (1.0 - beta2) * g;
        }
    }
    StepInfo {
        t,
        lr,
        beta2_hat: None,
        v_rel_change: None,
    }
}
