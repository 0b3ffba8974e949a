//! Dense f64 tensors and a seeded, platform-independent random stream.
//!
//! Tensors are flat buffers with a shape. There is no broadcasting: binary
//! operations require identical shapes (or a scalar operand). Every
//! operation returns a fresh tensor and leaves its inputs untouched.

use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: Vec<usize>, right: Vec<usize> },
    #[error("non-finite input at flat index {index}")]
    NonFiniteInput { index: usize },
    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, NumericsError>;

/// Whether a parameter counts as a "matrix" for weight-decay masking.
///
/// Rank-2 tensors are matrices, everything else is not.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Matrix,
    NonMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    data: Vec<f64>,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Square,
    Sqrt,
    Abs,
    Sign,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    Sum,
    Mean,
    MaxAbs,
}

/// `sign(0) = 0`, unlike `f64::signum`.
#[inline]
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn check_finite(data: &[f64]) -> Result<()> {
    match data.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(NumericsError::NonFiniteInput { index }),
        None => Ok(()),
    }
}

impl Tensor {
    pub fn new(data: Vec<f64>, shape: Vec<usize>) -> Result<Self> {
        if shape.contains(&0) || shape.iter().product::<usize>() != data.len() {
            return Err(NumericsError::ShapeMismatch {
                left: vec![data.len()],
                right: shape,
            });
        }
        Ok(Self { data, shape })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            data: vec![0.0; n],
            shape: shape.to_vec(),
        }
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        Self {
            data: vec![value; n],
            shape: shape.to_vec(),
        }
    }

    /// Rank-1 tensor.
    pub fn vector(data: Vec<f64>) -> Self {
        let n = data.len();
        assert!(n > 0, "empty vector");
        Self {
            data,
            shape: vec![n],
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(data, vec![rows, cols])
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.shape)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn kind(&self) -> ParamKind {
        if self.shape.len() == 2 {
            ParamKind::Matrix
        } else {
            ParamKind::NonMatrix
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Same data, new shape. Element order is unchanged.
    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        Self::new(self.data.clone(), shape.to_vec())
    }

    fn same_shape(&self, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(NumericsError::ShapeMismatch {
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        Ok(())
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            data: self.data.iter().map(|&x| f(x)).collect(),
            shape: self.shape.clone(),
        }
    }

    pub fn binary(&self, op: BinaryOp, other: &Tensor) -> Result<Tensor> {
        self.same_shape(other)?;
        check_finite(&self.data)?;
        check_finite(&other.data)?;
        if op == BinaryOp::Div {
            if let Some(i) = other.data.iter().position(|&x| x == 0.0) {
                return Err(NumericsError::Domain(format!("division by zero at index {i}")));
            }
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| match op {
                BinaryOp::Add => a + b,
                BinaryOp::Sub => a - b,
                BinaryOp::Mul => a * b,
                BinaryOp::Div => a / b,
            })
            .collect();
        Ok(Tensor {
            data,
            shape: self.shape.clone(),
        })
    }

    /// Binary op against a scalar right-hand side.
    pub fn binary_scalar(&self, op: BinaryOp, rhs: f64) -> Result<Tensor> {
        check_finite(&self.data)?;
        check_finite(&[rhs])?;
        if op == BinaryOp::Div && rhs == 0.0 {
            return Err(NumericsError::Domain("division by zero".into()));
        }
        Ok(self.map(|a| match op {
            BinaryOp::Add => a + rhs,
            BinaryOp::Sub => a - rhs,
            BinaryOp::Mul => a * rhs,
            BinaryOp::Div => a / rhs,
        }))
    }

    pub fn unary(&self, op: UnaryOp) -> Result<Tensor> {
        check_finite(&self.data)?;
        if op == UnaryOp::Sqrt {
            if let Some(i) = self.data.iter().position(|&x| x < 0.0) {
                return Err(NumericsError::Domain(format!("sqrt of negative at index {i}")));
            }
        }
        Ok(self.map(|x| match op {
            UnaryOp::Square => x * x,
            UnaryOp::Sqrt => x.sqrt(),
            UnaryOp::Abs => x.abs(),
            UnaryOp::Sign => sign(x),
        }))
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(BinaryOp::Add, other)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(BinaryOp::Sub, other)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(BinaryOp::Mul, other)
    }

    pub fn div(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(BinaryOp::Div, other)
    }

    pub fn scale(&self, alpha: f64) -> Result<Tensor> {
        self.binary_scalar(BinaryOp::Mul, alpha)
    }

    pub fn square(&self) -> Result<Tensor> {
        self.unary(UnaryOp::Square)
    }

    pub fn sqrt(&self) -> Result<Tensor> {
        self.unary(UnaryOp::Sqrt)
    }

    pub fn abs(&self) -> Result<Tensor> {
        self.unary(UnaryOp::Abs)
    }

    pub fn sign(&self) -> Result<Tensor> {
        self.unary(UnaryOp::Sign)
    }

    /// `alpha * self + other`.
    pub fn axpy(&self, alpha: f64, other: &Tensor) -> Result<Tensor> {
        self.same_shape(other)?;
        check_finite(&self.data)?;
        check_finite(&other.data)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| alpha * a + b)
            .collect();
        Ok(Tensor {
            data,
            shape: self.shape.clone(),
        })
    }

    /// Left-to-right reduction.
    pub fn reduce(&self, op: Reduction) -> f64 {
        match op {
            Reduction::Sum => self.data.iter().sum(),
            Reduction::Mean => self.data.iter().sum::<f64>() / self.data.len() as f64,
            Reduction::MaxAbs => self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs())),
        }
    }

    pub fn sum(&self) -> f64 {
        self.reduce(Reduction::Sum)
    }

    pub fn mean(&self) -> f64 {
        self.reduce(Reduction::Mean)
    }

    pub fn max_abs(&self) -> f64 {
        self.reduce(Reduction::MaxAbs)
    }

    pub fn dot(&self, other: &Tensor) -> Result<f64> {
        self.same_shape(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Seeded random stream: ChaCha8 keystream, normals by ziggurat sampling.
///
/// The ChaCha8 output is fixed by its specification, so a seed yields the
/// same uniform stream on every platform.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

/// SplitMix64 finalizer, used to derive independent child seeds.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// A fresh generator whose seed depends only on this generator's seed and `index`.
    pub fn child(&self, index: u64) -> Rng {
        Rng::new(mix_seed(self.seed, index))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform integer in [0, n).
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    pub fn fill_standard_normal(&mut self, out: &mut [f64]) {
        for x in out {
            *x = self.inner.sample(StandardNormal);
        }
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// I.i.d. `N(mean, sigma^2)` draws with the given shape.
pub fn gaussian_sample(rng: &mut Rng, shape: &[usize], mean: f64, sigma: f64) -> Result<Tensor> {
    if !sigma.is_finite() || sigma < 0.0 || !mean.is_finite() {
        return Err(NumericsError::Domain(format!(
            "gaussian_sample needs finite mean and sigma >= 0, got mean={mean}, sigma={sigma}"
        )));
    }
    let mut t = Tensor::zeros(shape);
    for x in t.data_mut() {
        *x = mean + sigma * rng.standard_normal();
    }
    Ok(t)
}
