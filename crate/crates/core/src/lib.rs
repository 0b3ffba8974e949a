//! AdamNX optimizer, baseline update rules, decay-rate schedules, synthetic
//! test problems and a Monte-Carlo lab for second-moment statistics.

pub mod noiselab;
pub mod numerics;
pub mod optimizers;
pub mod problems;
pub mod schedules;

pub use numerics::{ParamKind, Rng, Tensor};
pub use optimizers::{Optimizer, OptimizerConfig, OptimizerState, Rule, StepInfo};
pub use schedules::{DecayFamily, DecaySchedule, LrSchedule};
