//! Downsampling plus exponentially weighted smoothing for loss curves.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothParams {
    /// Keep every `step`-th value, starting with the first.
    pub step: usize,
    pub window: f64,
    pub alpha: f64,
}

/// Parameters for a run of `t_total` iterations.
pub fn smooth_params(t_total: usize) -> SmoothParams {
    let step = (t_total / 400).max(1);
    let window = (step as f64 * 0.02).max(5.0);
    SmoothParams {
        step,
        window,
        alpha: 2.0 / (window + 1.0),
    }
}

/// Adjusted EWMA: `y_k = sum_i (1-a)^i x_{k-i} / sum_i (1-a)^i`, `i = 0..=k`.
pub fn ewma_adjusted(values: &[f64], alpha: f64) -> Vec<f64> {
    let decay = 1.0 - alpha;
    let (mut num, mut den) = (0.0, 0.0);
    values
        .iter()
        .map(|&x| {
            num = x + decay * num;
            den = 1.0 + decay * den;
            num / den
        })
        .collect()
}

/// Downsamples with [`smooth_params`]`(t_total)` and smooths the result.
pub fn smooth_series(values: &[f64], t_total: usize) -> Vec<f64> {
    let p = smooth_params(t_total);
    let kept: Vec<f64> = values.iter().step_by(p.step).copied().collect();
    ewma_adjusted(&kept, p.alpha)
}

/// Indices of the values [`smooth_series`] keeps.
pub fn kept_indices(len: usize, t_total: usize) -> Vec<usize> {
    (0..len).step_by(smooth_params(t_total).step).collect()
}
