use super::{ProblemError, Result};
use crate::numerics::{Rng, Tensor};
use std::io::{BufRead, Write};

/// Distance of every class center from the origin.
pub const CENTER_RADIUS: f64 = 3.0;

/// Labelled feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `n x d`, row-major.
    pub features: Tensor,
    pub labels: Vec<usize>,
    pub classes: usize,
    /// Generator seed, when the data came from [`make_blobs`].
    pub seed: Option<u64>,
}

impl Dataset {
    pub fn new(features: Tensor, labels: Vec<usize>, classes: usize) -> Result<Self> {
        let shape = features.shape();
        if shape.len() != 2 || shape[0] != labels.len() {
            return Err(ProblemError::ShapeMismatch(format!(
                "features {shape:?} vs {} labels",
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(ProblemError::Domain(format!("label {bad} outside [0, {classes})")));
        }
        Ok(Self {
            features,
            labels,
            classes,
            seed: None,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.shape()[1]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.features.data()[i * d..(i + 1) * d]
    }

    /// Header `x0,...,x{d-1},label`, then one sample per line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let d = self.dim();
        let header: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
        writeln!(out, "{},label", header.join(","))?;
        for i in 0..self.len() {
            let row: Vec<String> = self.row(i).iter().map(|x| format!("{x:e}")).collect();
            writeln!(out, "{},{}", row.join(","), self.labels[i])?;
        }
        Ok(())
    }

    /// Inverse of [`Dataset::write_csv`]; the class count is `max label + 1`
    /// unless `classes` is given.
    pub fn read_csv<R: BufRead>(input: R, classes: Option<usize>) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| ProblemError::Csv("empty input".into()))??;
        let cols = header.split(',').count();
        if cols < 2 || !header.ends_with("label") {
            return Err(ProblemError::Csv(format!("unexpected header {header:?}")));
        }
        let d = cols - 1;
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != cols {
                return Err(ProblemError::Csv(format!(
                    "line {}: expected {cols} fields, got {}",
                    lineno + 2,
                    fields.len()
                )));
            }
            for f in &fields[..d] {
                data.push(f.parse::<f64>().map_err(|e| {
                    ProblemError::Csv(format!("line {}: {f:?}: {e}", lineno + 2))
                })?);
            }
            labels.push(fields[d].parse::<usize>().map_err(|e| {
                ProblemError::Csv(format!("line {}: label {:?}: {e}", lineno + 2, fields[d]))
            })?);
        }
        if labels.is_empty() {
            return Err(ProblemError::Csv("no samples".into()));
        }
        let classes = classes.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
        let features = Tensor::matrix(labels.len(), d, data)
            .map_err(|e| ProblemError::Csv(e.to_string()))?;
        Dataset::new(features, labels, classes)
    }
}

/// Balanced Gaussian blobs around class centers on a sphere of radius
/// [`CENTER_RADIUS`]. Sample `i` belongs to class `i % classes`.
pub fn make_blobs(n: usize, classes: usize, dim: usize, spread: f64, rng: &mut Rng) -> Result<Dataset> {
    let mut problems = Vec::new();
    if classes < 2 {
        problems.push(format!("need at least 2 classes, got {classes}"));
    }
    if n < classes {
        problems.push(format!("need n >= classes, got n={n}, classes={classes}"));
    }
    if dim == 0 {
        problems.push("dimension must be >= 1".to_string());
    }
    if !(spread >= 0.0 && spread.is_finite()) {
        problems.push(format!("spread must be >= 0, got {spread}"));
    }
    if !problems.is_empty() {
        return Err(ProblemError::Domain(problems.join("; ")));
    }
    let seed = rng.seed();
    let mut centers = vec![0.0; classes * dim];
    for c in centers.chunks_mut(dim) {
        loop {
            rng.fill_standard_normal(c);
            let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                c.iter_mut().for_each(|x| *x *= CENTER_RADIUS / norm);
                break;
            }
        }
    }
    let mut data = vec![0.0; n * dim];
    let labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    for (row, &y) in data.chunks_mut(dim).zip(&labels) {
        let center = &centers[y * dim..(y + 1) * dim];
        for (x, &c) in row.iter_mut().zip(center) {
            *x = c + spread * rng.standard_normal();
        }
    }
    let features = Tensor::matrix(n, dim, data).expect("shape is n x dim");
    let mut ds = Dataset::new(features, labels, classes)?;
    ds.seed = Some(seed);
    Ok(ds)
}
