//! Parameter-update rules.
//!
//! All Adam-type behaviour that only differs in the second-moment decay
//! rate (Adam written in recursive form, AdamNX, and the AdaX/Adafactor
//! ablations) goes through [`Rule::GeneralizedAdam`]. The textbook
//! bias-corrected Adam is kept as a separate rule so the two forms can be
//! checked against each other.
//!
//! Weight decay is decoupled: `theta -= lr * (update + lambda_l * theta)`,
//! where `lambda_l = lambda` for matrix (rank-2) parameters and `0`
//! otherwise. AdamW is the one rule that decays every parameter.

mod adam;
mod lion;
pub mod radam;
mod sgd;

use crate::numerics::{ParamKind, Tensor};
use crate::schedules::{DecaySchedule, LrSchedule, ADAM_DEFAULT_BETA2, DEFAULT_BETA1};
use thiserror::Error;

pub const DEFAULT_EPS: f64 = 1e-8;
pub const DEFAULT_MOMENTUM: f64 = 0.9;
pub const LION_DEFAULT_BETAS: (f64, f64) = (0.9, 0.99);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimError {
    #[error("non-finite gradient at step {step} (parameter {param}, element {index})")]
    NonFiniteGradient { step: u64, param: usize, index: usize },
    #[error("expected {expected} gradients, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("parameter {param}: gradient shape {grad:?} does not match parameter shape {param_shape:?}")]
    ShapeMismatch {
        param: usize,
        param_shape: Vec<usize>,
        grad: Vec<usize>,
    },
    #[error("invalid optimizer config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, OptimError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rule {
    /// Adam driven by an arbitrary second-moment decay schedule.
    GeneralizedAdam(DecaySchedule),
    AdamClassic { beta1: f64, beta2: f64 },
    AdamW { beta1: f64, beta2: f64 },
    Sgd,
    /// Heavy ball: `b = mu * b + g; theta -= lr * b`.
    MomentumSgd { mu: f64 },
    RAdam { beta1: f64, beta2: f64 },
    Lion { beta1: f64, beta2: f64 },
}

impl Rule {
    pub fn adamnx() -> Self {
        Rule::GeneralizedAdam(DecaySchedule::adamnx())
    }

    pub fn adam_classic() -> Self {
        Rule::AdamClassic {
            beta1: DEFAULT_BETA1,
            beta2: ADAM_DEFAULT_BETA2,
        }
    }

    pub fn adamw() -> Self {
        Rule::AdamW {
            beta1: DEFAULT_BETA1,
            beta2: ADAM_DEFAULT_BETA2,
        }
    }

    pub fn momentum_sgd() -> Self {
        Rule::MomentumSgd {
            mu: DEFAULT_MOMENTUM,
        }
    }

    pub fn radam() -> Self {
        Rule::RAdam {
            beta1: DEFAULT_BETA1,
            beta2: ADAM_DEFAULT_BETA2,
        }
    }

    pub fn lion() -> Self {
        Rule::Lion {
            beta1: LION_DEFAULT_BETAS.0,
            beta2: LION_DEFAULT_BETAS.1,
        }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        let unit = |name: &str, x: f64| {
            if (0.0..1.0).contains(&x) {
                Ok(())
            } else {
                Err(format!("{name} must lie in [0, 1), got {x}"))
            }
        };
        match *self {
            Rule::GeneralizedAdam(_) | Rule::Sgd => Ok(()),
            Rule::MomentumSgd { mu } => unit("mu", mu),
            Rule::AdamClassic { beta1, beta2 }
            | Rule::AdamW { beta1, beta2 }
            | Rule::RAdam { beta1, beta2 } => {
                unit("beta1", beta1)?;
                unit("beta2", beta2)?;
                if beta2 == 0.0 {
                    return Err("beta2 must be > 0 for bias correction".into());
                }
                if beta1 == 0.0 {
                    return Err("beta1 must be > 0 for bias correction".into());
                }
                Ok(())
            }
            Rule::Lion { beta1, beta2 } => {
                unit("beta1", beta1)?;
                unit("beta2", beta2)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub rule: Rule,
    pub lr: LrSchedule,
    /// Decoupled weight-decay rate `lambda`.
    pub weight_decay: f64,
    pub eps: f64,
}

impl OptimizerConfig {
    pub fn new(rule: Rule, lr: LrSchedule) -> Self {
        Self {
            rule,
            lr,
            weight_decay: 0.0,
            eps: DEFAULT_EPS,
        }
    }

    pub fn with_weight_decay(mut self, weight_decay: f64) -> Self {
        self.weight_decay = weight_decay;
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            problems.push(format!("eps must be > 0, got {}", self.eps));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            problems.push(format!("weight_decay must be >= 0, got {}", self.weight_decay));
        }
        if let Err(e) = self.rule.validate() {
            problems.push(e);
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(OptimError::Config(problems.join("; ")))
        }
    }

    /// Decay applied to a parameter of the given kind.
    pub fn decay_for(&self, kind: ParamKind) -> f64 {
        match (self.rule, kind) {
            (Rule::AdamW { .. }, _) | (_, ParamKind::Matrix) => self.weight_decay,
            _ => 0.0,
        }
    }
}

/// Moment buffers for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Slot {
    /// First moment; the momentum buffer for heavy-ball SGD and Lion.
    pub m: Tensor,
    /// Second moment. Unused (all zeros) for SGD, heavy-ball and Lion.
    pub v: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub slots: Vec<Slot>,
    /// Number of completed updates; the next update runs at `t + 1`.
    pub t: u64,
    pub best_loss: f64,
    pub best_params: Option<Vec<Tensor>>,
    /// Step at which `best_loss` was observed.
    pub best_step: Option<u64>,
}

impl Default for OptimizerState {
    fn default() -> Self {
        Self::new()
    }
}

impl OptimizerState {
    pub fn new() -> Self {
        Self {
            slots: Vec::new(),
            t: 0,
            best_loss: f64::INFINITY,
            best_params: None,
            best_step: None,
        }
    }

    fn ensure_slots(&mut self, params: &[Tensor]) -> Result<()> {
        if self.slots.is_empty() {
            self.slots = params
                .iter()
                .map(|p| Slot {
                    m: p.zeros_like(),
                    v: p.zeros_like(),
                })
                .collect();
        }
        if self.slots.len() != params.len() {
            return Err(OptimError::ArityMismatch {
                expected: self.slots.len(),
                got: params.len(),
            });
        }
        for (i, (slot, p)) in self.slots.iter().zip(params).enumerate() {
            if slot.m.shape() != p.shape() {
                return Err(OptimError::ShapeMismatch {
                    param: i,
                    param_shape: p.shape().to_vec(),
                    grad: slot.m.shape().to_vec(),
                });
            }
        }
        Ok(())
    }

    /// Keeps a deep copy of `params` when `loss` strictly improves on the best so far.
    pub fn track_best(&mut self, loss: f64, params: &[Tensor]) -> bool {
        if loss < self.best_loss {
            self.best_loss = loss;
            self.best_params = Some(params.to_vec());
            self.best_step = Some(self.t);
            true
        } else {
            false
        }
    }
}

/// What one update did, for logging.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub t: u64,
    pub lr: f64,
    /// Effective second-moment decay rate, for rules that have one.
    pub beta2_hat: Option<f64>,
    /// `max|v_t - v_{t-1}| / (max|v_t| + eps)` over all parameters, using
    /// the bias-corrected second moment where the rule keeps a raw one.
    pub v_rel_change: Option<f64>,
}

/// Running max of `|v_new - v_old|` and `|v_new|` across parameter slots.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct VChange {
    diff: f64,
    scale: f64,
}

impl VChange {
    #[inline]
    pub(crate) fn observe(&mut self, old: f64, new: f64) {
        self.diff = self.diff.max((new - old).abs());
        self.scale = self.scale.max(new.abs());
    }

    pub(crate) fn ratio(&self, eps: f64) -> f64 {
        self.diff / (self.scale + eps)
    }
}

/// A configured optimizer together with its state.
#[derive(Debug, Clone)]
pub struct Optimizer {
    config: OptimizerConfig,
    state: OptimizerState,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            state: OptimizerState::new(),
        })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn state(&self) -> &OptimizerState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut OptimizerState {
        &mut self.state
    }

    /// Applies one update in place. On error neither `params` nor the state change.
    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) -> Result<StepInfo> {
        check_inputs(params, grads, self.state.t + 1)?;
        self.state.ensure_slots(params)?;
        let t = self.state.t + 1;
        let lr = self.config.lr.lr_at(t);
        let info = match self.config.rule {
            Rule::GeneralizedAdam(schedule) => {
                adam::step_generalized(&mut self.state, params, grads, &self.config, &schedule, t, lr)
            }
            Rule::AdamClassic { beta1, beta2 } | Rule::AdamW { beta1, beta2 } => {
                adam::step_classic(&mut self.state, params, grads, &self.config, beta1, beta2, t, lr)
            }
            Rule::Sgd => sgd::step_sgd(params, grads, &self.config, t, lr),
            Rule::MomentumSgd { mu } => {
                sgd::step_momentum(&mut self.state, params, grads, &self.config, mu, t, lr)
            }
            Rule::RAdam { beta1, beta2 } => {
                radam::step(&mut self.state, params, grads, &self.config, beta1, beta2, t, lr)
            }
            Rule::Lion { beta1, beta2 } => {
                lion::step(&mut self.state, params, grads, &self.config, beta1, beta2, t, lr)
            }
        };
        self.state.t = t;
        Ok(info)
    }

    pub fn track_best(&mut self, loss: f64, params: &[Tensor]) -> bool {
        self.state.track_best(loss, params)
    }
}

fn check_inputs(params: &[Tensor], grads: &[Tensor], step: u64) -> Result<()> {
    if params.len() != grads.len() {
        return Err(OptimError::ArityMismatch {
            expected: params.len(),
            got: grads.len(),
        });
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() {
            return Err(OptimError::ShapeMismatch {
                param: i,
                param_shape: p.shape().to_vec(),
                grad: g.shape().to_vec(),
            });
        }
        if let Some(index) = g.data().iter().position(|x| !x.is_finite()) {
            return Err(OptimError::NonFiniteGradient {
                step,
                param: i,
                index,
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests;
