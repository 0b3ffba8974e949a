use super::{Batch, Problem};
use crate::numerics::{Rng, Tensor};

/// `f(x) = 0.5 * x' D x` with `D` diagonal, log-spaced from 1 to the condition number.
///
/// Starts at the all-ones vector.
#[derive(Debug, Clone)]
pub struct Quadratic {
    diag: Vec<f64>,
}

impl Quadratic {
    pub fn new(dim: usize, condition_number: f64) -> Self {
        assert!(dim >= 1, "dimension must be >= 1");
        assert!(condition_number >= 1.0, "condition number must be >= 1");
        let diag = (0..dim)
            .map(|i| {
                if dim == 1 {
                    1.0
                } else {
                    condition_number.powf(i as f64 / (dim - 1) as f64)
                }
            })
            .collect();
        Self { diag }
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }
}

impl Problem for Quadratic {
    fn name(&self) -> &str {
        "quadratic"
    }

    fn init_params(&self, _rng: &mut Rng) -> Vec<Tensor> {
        vec![Tensor::full(&[self.diag.len()], 1.0)]
    }

    fn loss_and_grad(&self, params: &[Tensor], _batch: &Batch) -> (f64, Vec<Tensor>) {
        let x = params[0].data();
        let mut loss = 0.0;
        let mut grad = params[0].zeros_like();
        for ((g, &xi), &d) in grad.data_mut().iter_mut().zip(x).zip(&self.diag) {
            loss += 0.5 * d * xi * xi;
            *g = d * xi;
        }
        (loss, vec![grad])
    }
}

/// Chained Rosenbrock: `sum_i 100 (x[i+1] - x[i]^2)^2 + (1 - x[i])^2` for
/// `i = 0..n-1`. Any `n >= 2` works; odd `n` needs no special pairing.
///
/// Starts at `(-1.2, 1, -1.2, 1, ...)`.
#[derive(Debug, Clone)]
pub struct Rosenbrock {
    n: usize,
}

impl Rosenbrock {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2, "Rosenbrock needs n >= 2");
        Self { n }
    }
}

impl Problem for Rosenbrock {
    fn name(&self) -> &str {
        "rosenbrock"
    }

    fn init_params(&self, _rng: &mut Rng) -> Vec<Tensor> {
        let x = (0..self.n).map(|i| if i % 2 == 0 { -1.2 } else { 1.0 }).collect();
        vec![Tensor::vector(x)]
    }

    fn loss_and_grad(&self, params: &[Tensor], _batch: &Batch) -> (f64, Vec<Tensor>) {
        let x = params[0].data();
        let mut grad = params[0].zeros_like();
        let g = grad.data_mut();
        let mut loss = 0.0;
        for i in 0..x.len() - 1 {
            let a = x[i + 1] - x[i] * x[i];
            let b = 1.0 - x[i];
            loss += 100.0 * a * a + b * b;
            g[i] += -400.0 * x[i] * a - 2.0 * b;
            g[i + 1] += 200.0 * a;
        }
        (loss, vec![grad])
    }
}
