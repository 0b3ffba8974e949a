//! Objectives with analytic gradients, synthetic data and evaluation helpers.

mod analytic;
mod classifier;
mod data;

pub use analytic::{Quadratic, Rosenbrock};
pub use classifier::{LogReg, Mlp};
pub use data::{make_blobs, Dataset, CENTER_RADIUS};

use crate::numerics::{Rng, Tensor};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("dataset csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ProblemError>;

/// Which samples a loss evaluation averages over.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Batch {
    /// Every sample (or the whole deterministic objective).
    Full,
    Indices(Vec<usize>),
}

impl Batch {
    pub fn len_in(&self, n: usize) -> usize {
        match self {
            Batch::Full => n,
            Batch::Indices(ix) => ix.len(),
        }
    }
}

/// A differentiable objective. Data-free objectives ignore the batch.
pub trait Problem: Send + Sync {
    fn name(&self) -> &str;

    /// Starting parameters. Shapes (and therefore kinds) are fixed per problem.
    fn init_params(&self, rng: &mut Rng) -> Vec<Tensor>;

    fn loss_and_grad(&self, params: &[Tensor], batch: &Batch) -> (f64, Vec<Tensor>);

    fn loss(&self, params: &[Tensor], batch: &Batch) -> f64 {
        self.loss_and_grad(params, batch).0
    }

    /// Training data, for problems that have any.
    fn dataset(&self) -> Option<&Dataset> {
        None
    }

    /// Class probabilities (`n x C`) over the full dataset.
    fn predict_probs(&self, _params: &[Tensor]) -> Option<Tensor> {
        None
    }
}

/// One epoch of shuffle-and-chunk mini-batches. The last batch may be short.
pub fn epoch_batches(n: usize, batch_size: usize, rng: &mut Rng) -> Result<Vec<Batch>> {
    if batch_size == 0 || batch_size > n {
        return Err(ProblemError::Domain(format!(
            "batch size must lie in [1, {n}], got {batch_size}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    Ok(order
        .chunks(batch_size)
        .map(|c| Batch::Indices(c.to_vec()))
        .collect())
}

/// Central differences `(f(x + h e_i) - f(x - h e_i)) / 2h`, coordinate by coordinate.
pub fn fd_gradient(problem: &dyn Problem, params: &[Tensor], batch: &Batch, h: f64) -> Vec<Tensor> {
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut work = params.to_vec();
    let mut out: Vec<Tensor> = params.iter().map(Tensor::zeros_like).collect();
    for (p, grad) in out.iter_mut().enumerate() {
        for i in 0..params[p].len() {
            let x = params[p].data()[i];
            work[p].data_mut()[i] = x + h;
            let plus = problem.loss(&work, batch);
            work[p].data_mut()[i] = x - h;
            let minus = problem.loss(&work, batch);
            work[p].data_mut()[i] = x;
            grad.data_mut()[i] = (plus - minus) / (2.0 * h);
        }
    }
    out
}

pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// `||a - b|| / max(||a||, ||b||)` over all tensors jointly; 0 when both vanish.
pub fn relative_error(a: &[Tensor], b: &[Tensor]) -> f64 {
    let mut diff = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        for (&u, &v) in x.data().iter().zip(y.data()) {
            diff += (u - v) * (u - v);
            na += u * u;
            nb += v * v;
        }
    }
    let scale = na.max(nb).sqrt();
    if scale == 0.0 {
        0.0
    } else {
        diff.sqrt() / scale
    }
}

/// Fraction of rows whose label is not among the `k` largest probabilities.
///
/// Ties go to the lower class index: class `j` outranks the label `y` when
/// `p[j] > p[y]`, or `p[j] == p[y]` and `j < y`.
pub fn topk_error(probs: &Tensor, labels: &[usize], k: usize) -> Result<f64> {
    let shape = probs.shape();
    if shape.len() != 2 || shape[0] != labels.len() {
        return Err(ProblemError::ShapeMismatch(format!(
            "probabilities {shape:?} vs {} labels",
            labels.len()
        )));
    }
    let (n, classes) = (shape[0], shape[1]);
    if k == 0 || k > classes {
        return Err(ProblemError::Domain(format!("k must lie in [1, {classes}], got {k}")));
    }
    if !probs.is_finite() {
        return Err(ProblemError::Domain("non-finite probabilities".into()));
    }
    let mut misses = 0usize;
    for (row, &y) in probs.data().chunks(classes).zip(labels) {
        if y >= classes {
            return Err(ProblemError::Domain(format!("label {y} out of range")));
        }
        let py = row[y];
        let ahead = row
            .iter()
            .enumerate()
            .filter(|&(j, &p)| p > py || (p == py && j < y))
            .count();
        if ahead >= k {
            misses += 1;
        }
    }
    Ok(misses as f64 / n as f64)
}

#[cfg(test)]
mod tests;
