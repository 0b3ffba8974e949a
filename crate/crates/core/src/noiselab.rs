//! Monte-Carlo check of second-moment statistics under Gaussian gradient noise.
//!
//! Gradients are `g_t = grad(t) + sigma * xi_t` with i.i.d. standard-normal
//! `xi_t`, independent across coordinates and steps. Chains evolve the
//! bias-corrected second moment `v_hat_t` either through a decay schedule
//! (`v_hat = b(t) v_hat + (1 - b(t)) g^2`) or through the raw EMA followed by
//! division by `1 - beta2^t`.
//!
//! With a constant deterministic gradient `G` every term of the moment
//! analysis has a closed form:
//!
//! ```text
//! E[v_hat_t]   = sigma^2 + G^2
//! Var[v_hat_t] = K (1 - b)(1 + b^t) / ((1 + b)(1 - b^t)),  K = 2 sigma^4 + 4 sigma^2 G^2
//!              -> K (1 - b) / (1 + b)  as t -> inf
//! ```
//!
//! The same variance formula covers AdamNX and AdaX chains with `b`
//! replaced by their effective rate (see [`effective_rate`]): all three
//! weight the squared gradients by the powers `1, rho, ..., rho^(t-1)`,
//! only in a different order.

use crate::numerics::{mix_seed, Rng, Tensor};
use crate::schedules::{DecayFamily, DecaySchedule};
use rayon::prelude::*;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NoiseError {
    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, NoiseError>;

type GradFn = Arc<dyn Fn(u64) -> Vec<f64> + Send + Sync>;

#[derive(Clone)]
enum FullGrad {
    Constant(Vec<f64>),
    Function(GradFn),
}

/// `g_t = full_grad(t) + sigma * xi`.
#[derive(Clone)]
pub struct NoiseModel {
    dim: usize,
    sigma: f64,
    full_grad: FullGrad,
}

impl fmt::Debug for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let grad = match &self.full_grad {
            FullGrad::Constant(g) => format!("constant {g:?}"),
            FullGrad::Function(_) => "fn(t)".to_string(),
        };
        f.debug_struct("NoiseModel")
            .field("dim", &self.dim)
            .field("sigma", &self.sigma)
            .field("full_grad", &grad)
            .finish()
    }
}

impl NoiseModel {
    /// Every coordinate of the full gradient equals `g`.
    pub fn constant(dim: usize, g: f64, sigma: f64) -> Result<Self> {
        Self::check(dim, sigma)?;
        Ok(Self {
            dim,
            sigma,
            full_grad: FullGrad::Constant(vec![g; dim]),
        })
    }

    pub fn from_fn(
        dim: usize,
        sigma: f64,
        full_grad: impl Fn(u64) -> Vec<f64> + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::check(dim, sigma)?;
        Ok(Self {
            dim,
            sigma,
            full_grad: FullGrad::Function(Arc::new(full_grad)),
        })
    }

    fn check(dim: usize, sigma: f64) -> Result<()> {
        if dim == 0 {
            return Err(NoiseError::Domain("dimension must be >= 1".into()));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(NoiseError::Domain(format!("sigma must be >= 0, got {sigma}")));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn full_grad(&self, t: u64) -> Vec<f64> {
        match &self.full_grad {
            FullGrad::Constant(g) => g.clone(),
            FullGrad::Function(f) => {
                let g = f(t);
                assert_eq!(g.len(), self.dim, "full gradient has wrong dimension");
                g
            }
        }
    }

    /// One stochastic gradient sample at step `t`.
    pub fn noisy_grad(&self, t: u64, rng: &mut Rng) -> Tensor {
        let mut g = self.full_grad(t);
        for x in &mut g {
            *x += self.sigma * rng.standard_normal();
        }
        Tensor::vector(g)
    }

    /// Writes a sample into `out` without allocating in the constant case.
    fn sample_into(&self, t: u64, rng: &mut Rng, out: &mut [f64]) {
        match &self.full_grad {
            FullGrad::Constant(g) => {
                for (o, &gi) in out.iter_mut().zip(g) {
                    *o = gi + self.sigma * rng.standard_normal();
                }
            }
            FullGrad::Function(_) => {
                let g = self.full_grad(t);
                for (o, gi) in out.iter_mut().zip(g) {
                    *o = gi + self.sigma * rng.standard_normal();
                }
            }
        }
    }
}

/// How a chain turns squared gradients into `v_hat`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChainMode {
    Schedule(DecaySchedule),
    /// Raw EMA with fixed `beta2`, divided by `1 - beta2^t`.
    BiasCorrected { beta2: f64 },
}

impl ChainMode {
    fn validate(&self) -> Result<()> {
        match *self {
            ChainMode::BiasCorrected { beta2 } if !(beta2 > 0.0 && beta2 < 1.0) => Err(
                NoiseError::Domain(format!("beta2 must lie in (0, 1), got {beta2}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            ChainMode::Schedule(s) => format!("schedule:{}", s.family().name()),
            ChainMode::BiasCorrected { beta2 } => format!("bias-corrected:{beta2}"),
        }
    }
}

/// Per-step update coefficients `(keep, take)` for `t = 1..=steps`,
/// with `v_new = keep * v + take * g^2`.
fn coefficient_table(mode: &ChainMode, steps: u64) -> Vec<(f64, f64)> {
    match *mode {
        ChainMode::Schedule(s) => (1..=steps)
            .map(|t| {
                let c = s.coefficients(t);
                (c.beta2_hat, c.one_minus_beta2_hat)
            })
            .collect(),
        ChainMode::BiasCorrected { beta2 } => vec![(beta2, 1.0 - beta2); steps as usize],
    }
}

fn bias_correction(beta2: f64, t: u64) -> f64 {
    -(t as f64 * beta2.ln()).exp_m1()
}

/// `v_hat_t` for `t = 1..=steps`, one tensor of length `dim` per step.
pub fn second_moment_chain(
    model: &NoiseModel,
    mode: &ChainMode,
    steps: u64,
    rng: &mut Rng,
) -> Result<Vec<Tensor>> {
    mode.validate()?;
    if steps == 0 {
        return Err(NoiseError::Domain("need at least one step".into()));
    }
    let table = coefficient_table(mode, steps);
    let mut v = vec![0.0; model.dim];
    let mut g = vec![0.0; model.dim];
    let mut out = Vec::with_capacity(steps as usize);
    for t in 1..=steps {
        model.sample_into(t, rng, &mut g);
        let (keep, take) = table[(t - 1) as usize];
        for (vi, gi) in v.iter_mut().zip(&g) {
            *vi = keep * *vi + take * gi * gi;
        }
        let v_hat = match *mode {
            ChainMode::Schedule(_) => v.clone(),
            ChainMode::BiasCorrected { beta2 } => {
                let bc = bias_correction(beta2, t);
                v.iter().map(|x| x / bc).collect()
            }
        };
        out.push(Tensor::vector(v_hat));
    }
    Ok(out)
}

/// Empirical per-coordinate mean and unbiased variance of `v_hat_t` across chains.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainStats {
    pub t: u64,
    pub mean: Tensor,
    pub var: Tensor,
    pub n_chains: usize,
}

impl ChainStats {
    /// Coordinate-averaged mean.
    pub fn mean_avg(&self) -> f64 {
        self.mean.mean()
    }

    /// Coordinate-averaged variance.
    pub fn var_avg(&self) -> f64 {
        self.var.mean()
    }
}

/// Runs `n_chains` independent chains to `t_probe` and summarizes `v_hat_{t_probe}`.
pub fn mc_moments(
    model: &NoiseModel,
    mode: &ChainMode,
    t_probe: u64,
    n_chains: usize,
    seed: u64,
) -> Result<ChainStats> {
    Ok(mc_moments_paired(model, std::slice::from_ref(mode), t_probe, n_chains, seed)?.remove(0))
}

/// Like [`mc_moments`], but every chain feeds the same gradient stream to
/// all `modes`, so the resulting statistics are directly comparable.
///
/// Chain `i` draws from `Rng::new(mix_seed(seed, i))`, and results are
/// reduced in chain order, so the output does not depend on the number of
/// worker threads.
pub fn mc_moments_paired(
    model: &NoiseModel,
    modes: &[ChainMode],
    t_probe: u64,
    n_chains: usize,
    seed: u64,
) -> Result<Vec<ChainStats>> {
    if n_chains < 2 {
        return Err(NoiseError::Domain(format!("need at least 2 chains, got {n_chains}")));
    }
    if t_probe == 0 {
        return Err(NoiseError::Domain("t_probe must be >= 1".into()));
    }
    if modes.is_empty() {
        return Err(NoiseError::Domain("no chain modes given".into()));
    }
    for m in modes {
        m.validate()?;
    }
    let dim = model.dim;
    let tables: Vec<Vec<(f64, f64)>> = modes
        .iter()
        .map(|m| match m {
            // constant coefficients: skip the table
            ChainMode::BiasCorrected { .. } => Vec::new(),
            ChainMode::Schedule(_) => coefficient_table(m, t_probe),
        })
        .collect();
    let finals: Vec<f64> = modes
        .iter()
        .map(|m| match *m {
            ChainMode::BiasCorrected { beta2 } => 1.0 / bias_correction(beta2, t_probe),
            ChainMode::Schedule(_) => 1.0,
        })
        .collect();

    // Per chain: v_hat at t_probe, laid out [mode][coordinate].
    let per_chain: Vec<Vec<f64>> = (0..n_chains)
        .into_par_iter()
        .map(|chain| {
            let mut rng = Rng::new(mix_seed(seed, chain as u64));
            let mut v = vec![0.0; modes.len() * dim];
            let mut g = vec![0.0; dim];
            for t in 1..=t_probe {
                model.sample_into(t, &mut rng, &mut g);
                for (k, mode) in modes.iter().enumerate() {
                    let (keep, take) = match *mode {
                        ChainMode::BiasCorrected { beta2 } => (beta2, 1.0 - beta2),
                        ChainMode::Schedule(_) => tables[k][(t - 1) as usize],
                    };
                    for (vi, gi) in v[k * dim..(k + 1) * dim].iter_mut().zip(&g) {
                        *vi = keep * *vi + take * gi * gi;
                    }
                }
            }
            for (k, scale) in finals.iter().enumerate() {
                v[k * dim..(k + 1) * dim].iter_mut().for_each(|x| *x *= scale);
            }
            v
        })
        .collect();

    let n = n_chains as f64;
    let stats = (0..modes.len())
        .map(|k| {
            let mut mean = vec![0.0; dim];
            for chain in &per_chain {
                for (m, x) in mean.iter_mut().zip(&chain[k * dim..(k + 1) * dim]) {
                    *m += x;
                }
            }
            mean.iter_mut().for_each(|m| *m /= n);
            let mut var = vec![0.0; dim];
            for chain in &per_chain {
                for ((s, x), m) in var.iter_mut().zip(&chain[k * dim..(k + 1) * dim]).zip(&mean) {
                    *s += (x - m) * (x - m);
                }
            }
            var.iter_mut().for_each(|s| *s /= n - 1.0);
            ChainStats {
                t: t_probe,
                mean: Tensor::vector(mean),
                var: Tensor::vector(var),
                n_chains,
            }
        })
        .collect();
    Ok(stats)
}

fn check_beta2(beta2: f64) -> Result<()> {
    if beta2 > 0.0 && beta2 < 1.0 {
        Ok(())
    } else {
        Err(NoiseError::Domain(format!("beta2 must lie in (0, 1), got {beta2}")))
    }
}

/// `E[v_hat_t]` for a constant full gradient `g`: `sigma^2 + g^2`, for every `t`.
pub fn closed_form_exp(beta2: f64, sigma: f64, g: f64, _t: u64) -> Result<f64> {
    check_beta2(beta2)?;
    Ok(sigma * sigma + g * g)
}

/// Time horizon for [`closed_form_var`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    Step(u64),
    Infinite,
}

/// `Var[v_hat_t]` for a constant full gradient `g`.
pub fn closed_form_var(beta2: f64, sigma: f64, g: f64, horizon: Horizon) -> Result<f64> {
    check_beta2(beta2)?;
    if let Horizon::Step(0) = horizon {
        return Err(NoiseError::Domain("t must be >= 1".into()));
    }
    let k = 2.0 * sigma.powi(4) + 4.0 * sigma * sigma * g * g;
    let limit = (1.0 - beta2) / (1.0 + beta2);
    Ok(match horizon {
        Horizon::Infinite => limit * k,
        Horizon::Step(t) => {
            // (1 - b^2t) / (1 - b^t)^2 = (1 + b^t) / (1 - b^t)
            let pow = (t as f64 * beta2.ln()).exp();
            limit * k * (1.0 + pow) / bias_correction(beta2, t)
        }
    })
}

/// Rate `rho` such that the chain's `v_hat_t` weights `g_1^2 .. g_t^2` by a
/// permutation of `1, rho, .., rho^(t-1)` (normalized). `None` for families
/// that are not of this form.
pub fn effective_rate(mode: &ChainMode) -> Option<f64> {
    match *mode {
        ChainMode::BiasCorrected { beta2 } => Some(beta2),
        ChainMode::Schedule(s) => match s.family() {
            DecayFamily::AdamClassic { beta2 } => Some(beta2),
            DecayFamily::AdamNX { beta2 } => Some(((1.0 - beta2) * beta2.ln()).exp()),
            DecayFamily::AdaX { beta2 } => Some(1.0 / (1.0 + beta2)),
            DecayFamily::Adafactor { .. } | DecayFamily::Constant { .. } => None,
        },
    }
}
