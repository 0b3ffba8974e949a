//! Softmax classifiers with hand-written backpropagation.

use super::{Batch, Dataset, Problem};
use crate::numerics::{Rng, Tensor};
use std::sync::Arc;

/// Dense tanh network with a linear softmax output layer, trained on
/// mean cross-entropy plus `0.5 * l2 * sum ||W||^2` over weight matrices.
///
/// Parameters alternate `W_k` (`in x out`, row-major) and `b_k` (`out`).
#[derive(Debug, Clone)]
struct Network {
    data: Arc<Dataset>,
    /// `[d, h_1, ..., h_k, C]`.
    sizes: Vec<usize>,
    l2: f64,
}

/// Per-sample scratch buffers, reused across the batch.
struct Scratch {
    /// Activations per layer, `acts[0]` is the input.
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

/// Numerically stable softmax in place; returns `log(sum(exp(z)))`.
fn softmax_in_place(z: &mut [f64]) -> f64 {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in z.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in z.iter_mut() {
        *x /= sum;
    }
    max + sum.ln()
}

impl Network {
    fn layers(&self) -> usize {
        self.sizes.len() - 1
    }

    fn scratch(&self) -> Scratch {
        Scratch {
            acts: self.sizes.iter().map(|&s| vec![0.0; s]).collect(),
            deltas: self.sizes.iter().map(|&s| vec![0.0; s]).collect(),
        }
    }

    /// Fills `acts`; the last layer holds raw logits.
    fn forward(&self, params: &[Tensor], x: &[f64], s: &mut Scratch) {
        s.acts[0].copy_from_slice(x);
        let last = self.layers() - 1;
        for l in 0..self.layers() {
            let (inp, out) = (self.sizes[l], self.sizes[l + 1]);
            let w = params[2 * l].data();
            let b = params[2 * l + 1].data();
            let (before, after) = s.acts.split_at_mut(l + 1);
            let a_in = &before[l];
            let a_out = &mut after[0];
            a_out.copy_from_slice(b);
            for i in 0..inp {
                let xi = a_in[i];
                if xi != 0.0 {
                    let row = &w[i * out..(i + 1) * out];
                    for (o, &wij) in a_out.iter_mut().zip(row) {
                        *o += xi * wij;
                    }
                }
            }
            if l != last {
                a_out.iter_mut().for_each(|v| *v = v.tanh());
            }
        }
    }

    fn weight_penalty(&self, params: &[Tensor]) -> f64 {
        if self.l2 == 0.0 {
            return 0.0;
        }
        let sq: f64 = (0..self.layers())
            .map(|l| params[2 * l].data().iter().map(|w| w * w).sum::<f64>())
            .sum();
        0.5 * self.l2 * sq
    }

    fn indices<'a>(&self, batch: &'a Batch) -> Box<dyn Iterator<Item = usize> + 'a> {
        match batch {
            Batch::Full => Box::new(0..self.data.len()),
            Batch::Indices(ix) => Box::new(ix.iter().copied()),
        }
    }

    fn loss_and_grad(&self, params: &[Tensor], batch: &Batch) -> (f64, Vec<Tensor>) {
        let count = batch.len_in(self.data.len()) as f64;
        let mut grads: Vec<Tensor> = params.iter().map(Tensor::zeros_like).collect();
        let mut s = self.scratch();
        let mut loss = 0.0;
        let last = self.layers();
        for i in self.indices(batch) {
            self.forward(params, self.data.row(i), &mut s);
            let y = self.data.labels[i];
            let logits = &mut s.acts[last];
            let z_y = logits[y];
            let lse = softmax_in_place(logits);
            loss += lse - z_y;
            // d loss / d logits = (p - onehot) / count
            for (d, &p) in s.deltas[last].iter_mut().zip(logits.iter()) {
                *d = p / count;
            }
            s.deltas[last][y] -= 1.0 / count;
            for l in (0..last).rev() {
                let (inp, out) = (self.sizes[l], self.sizes[l + 1]);
                let w = params[2 * l].data();
                {
                    let gw = grads[2 * l].data_mut();
                    let delta = &s.deltas[l + 1];
                    for r in 0..inp {
                        let a = s.acts[l][r];
                        if a != 0.0 {
                            for (g, &d) in gw[r * out..(r + 1) * out].iter_mut().zip(delta) {
                                *g += a * d;
                            }
                        }
                    }
                }
                for (g, &d) in grads[2 * l + 1].data_mut().iter_mut().zip(&s.deltas[l + 1]) {
                    *g += d;
                }
                if l > 0 {
                    let (lower, upper) = s.deltas.split_at_mut(l + 1);
                    let delta = &upper[0];
                    for r in 0..inp {
                        let back: f64 = w[r * out..(r + 1) * out]
                            .iter()
                            .zip(delta)
                            .map(|(wv, dv)| wv * dv)
                            .sum();
                        let a = s.acts[l][r];
                        lower[l][r] = back * (1.0 - a * a);
                    }
                }
            }
        }
        loss /= count;
        if self.l2 != 0.0 {
            loss += self.weight_penalty(params);
            for l in 0..last {
                let w = params[2 * l].data();
                for (g, &wv) in grads[2 * l].data_mut().iter_mut().zip(w) {
                    *g += self.l2 * wv;
                }
            }
        }
        (loss, grads)
    }

    fn predict_probs(&self, params: &[Tensor]) -> Tensor {
        let n = self.data.len();
        let classes = self.data.classes;
        let mut out = Vec::with_capacity(n * classes);
        let mut s = self.scratch();
        let last = self.layers();
        for i in 0..n {
            self.forward(params, self.data.row(i), &mut s);
            softmax_in_place(&mut s.acts[last]);
            out.extend_from_slice(&s.acts[last]);
        }
        Tensor::matrix(n, classes, out).expect("n x C")
    }

    fn zero_params(&self) -> Vec<Tensor> {
        let mut params = Vec::new();
        for l in 0..self.layers() {
            params.push(Tensor::zeros(&[self.sizes[l], self.sizes[l + 1]]));
            params.push(Tensor::zeros(&[self.sizes[l + 1]]));
        }
        params
    }
}

/// Multinomial logistic regression: parameters `[W (d x C), b (C)]`, zero init.
#[derive(Debug, Clone)]
pub struct LogReg {
    net: Network,
}

impl LogReg {
    pub fn new(data: Arc<Dataset>, l2: f64) -> Self {
        assert!(l2 >= 0.0, "l2 must be >= 0");
        let sizes = vec![data.dim(), data.classes];
        Self {
            net: Network { data, sizes, l2 },
        }
    }
}

impl Problem for LogReg {
    fn name(&self) -> &str {
        "logreg"
    }

    fn init_params(&self, _rng: &mut Rng) -> Vec<Tensor> {
        self.net.zero_params()
    }

    fn loss_and_grad(&self, params: &[Tensor], batch: &Batch) -> (f64, Vec<Tensor>) {
        self.net.loss_and_grad(params, batch)
    }

    fn dataset(&self) -> Option<&Dataset> {
        Some(&self.net.data)
    }

    fn predict_probs(&self, params: &[Tensor]) -> Option<Tensor> {
        Some(self.net.predict_probs(params))
    }
}

/// Tanh multilayer perceptron. Weights start Glorot-uniform, biases at zero.
#[derive(Debug, Clone)]
pub struct Mlp {
    net: Network,
}

impl Mlp {
    pub fn new(data: Arc<Dataset>, hidden: &[usize]) -> Self {
        assert!(!hidden.is_empty(), "MLP needs at least one hidden layer");
        assert!(hidden.iter().all(|&h| h > 0), "hidden sizes must be positive");
        let mut sizes = vec![data.dim()];
        sizes.extend_from_slice(hidden);
        sizes.push(data.classes);
        Self {
            net: Network {
                data,
                sizes,
                l2: 0.0,
            },
        }
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.net.sizes
    }
}

impl Problem for Mlp {
    fn name(&self) -> &str {
        "mlp"
    }

    fn init_params(&self, rng: &mut Rng) -> Vec<Tensor> {
        let mut params = self.net.zero_params();
        for l in 0..self.net.layers() {
            let (fan_in, fan_out) = (self.net.sizes[l], self.net.sizes[l + 1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in params[2 * l].data_mut() {
                *w = limit * (2.0 * rng.uniform() - 1.0);
            }
        }
        params
    }

    fn loss_and_grad(&self, params: &[Tensor], batch: &Batch) -> (f64, Vec<Tensor>) {
        self.net.loss_and_grad(params, batch)
    }

    fn dataset(&self) -> Option<&Dataset> {
        Some(&self.net.data)
    }

    fn predict_probs(&self, params: &[Tensor]) -> Option<Tensor> {
        Some(self.net.predict_probs(params))
    }
}
