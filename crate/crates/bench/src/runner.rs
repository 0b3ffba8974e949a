use crate::config::{ProblemSpec, RunConfig};
use crate::record::{best_of, EpochRow, StepRow, TrajectoryRecord};
use adamnx_core::optimizers::{OptimError, Optimizer};
use adamnx_core::problems::{
    epoch_batches, make_blobs, topk_error, Batch, LogReg, Mlp, Problem, ProblemError, Quadratic, Rosenbrock,
};
use adamnx_core::{Rng, Tensor};
use std::sync::Arc;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Optimizer(#[from] OptimError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

pub fn build_problem(spec: &ProblemSpec) -> Result<Box<dyn Problem>, ProblemError> {
    Ok(match spec {
        ProblemSpec::Quadratic { dim, cond } => Box::new(Quadratic::new(*dim, *cond)),
        ProblemSpec::Rosenbrock { dim } => Box::new(Rosenbrock::new(*dim)),
        ProblemSpec::LogReg { data, l2 } => {
            let ds = make_blobs(data.n, data.classes, data.dim, data.spread, &mut Rng::new(data.data_seed))?;
            Box::new(LogReg::new(Arc::new(ds), *l2))
        }
        ProblemSpec::Mlp { data, hidden } => {
            let ds = make_blobs(data.n, data.classes, data.dim, data.spread, &mut Rng::new(data.data_seed))?;
            Box::new(Mlp::new(Arc::new(ds), hidden))
        }
    })
}

/// Runs `epochs` passes of mini-batch training.
///
/// Initial parameters come from child stream 1 of the run seed, batch
/// order from child stream 2. The first non-finite loss or gradient ends
/// the run: its step row is kept with the offending loss (NaN if only the
/// gradient was bad) and `diverged` is set.
pub fn run_experiment(cfg: &RunConfig) -> Result<TrajectoryRecord, RunError> {
    Ok(train(cfg)?.record)
}

/// A finished run together with its problem and final parameters.
pub struct TrainedRun {
    pub record: TrajectoryRecord,
    pub problem: Box<dyn Problem>,
    pub params: Vec<Tensor>,
}

impl TrainedRun {
    /// Full-objective loss at the final parameters.
    pub fn full_loss(&self) -> f64 {
        self.problem.loss(&self.params, &Batch::Full)
    }
}

/// [`run_experiment`], keeping the final parameters.
pub fn train(cfg: &RunConfig) -> Result<TrainedRun, RunError> {
    let started = Instant::now();
    let problem = build_problem(&cfg.problem)?;
    let root = Rng::new(cfg.seed);
    let mut init_rng = root.child(1);
    let mut batch_rng = root.child(2);
    let mut params = problem.init_params(&mut init_rng);
    let mut opt = Optimizer::new(cfg.optimizer_config())?;

    let mut steps = Vec::new();
    let mut epochs = Vec::new();
    let mut diverged = false;

    'epochs: for epoch in 1..=cfg.epochs {
        let batches = match problem.dataset() {
            Some(ds) => epoch_batches(ds.len(), cfg.batch_size, &mut batch_rng)?,
            None => vec![Batch::Full; cfg.steps_per_epoch],
        };
        let mut loss_sum = 0.0;
        for batch in &batches {
            let (loss, grads) = problem.loss_and_grad(&params, batch);
            let t = opt.state().t + 1;
            let grads_ok = grads.iter().all(|g| g.is_finite());
            if !loss.is_finite() || !grads_ok {
                steps.push(StepRow {
                    step: t,
                    epoch,
                    lr: cfg.lr.lr_at(t),
                    beta2_hat: None,
                    loss: if loss.is_finite() { f64::NAN } else { loss },
                    v_rel_change: None,
                });
                diverged = true;
                break 'epochs;
            }
            opt.track_best(loss, &params);
            let info = opt.step(&mut params, &grads)?;
            steps.push(StepRow {
                step: info.t,
                epoch,
                lr: info.lr,
                beta2_hat: info.beta2_hat,
                loss,
                v_rel_change: info.v_rel_change,
            });
            loss_sum += loss;
        }
        let (top1_err, top5_err) = match (problem.dataset(), problem.predict_probs(&params)) {
            (Some(ds), Some(probs)) => (
                Some(topk_error(&probs, &ds.labels, 1)?),
                if ds.classes >= 6 {
                    Some(topk_error(&probs, &ds.labels, 5)?)
                } else {
                    None
                },
            ),
            _ => (None, None),
        };
        epochs.push(EpochRow {
            epoch,
            loss: loss_sum / batches.len() as f64,
            top1_err,
            top5_err,
        });
    }

    let best_loss = best_of(&steps);
    debug_assert!(diverged || best_loss == opt.state().best_loss);
    let record = TrajectoryRecord {
        run_id: cfg.run_id(),
        optimizer: cfg.optimizer.name.clone(),
        seed: cfg.seed,
        steps,
        epochs,
        best_loss,
        wall_time_secs: Some(started.elapsed().as_secs_f64()),
        diverged,
    };
    Ok(TrainedRun { record, problem, params })
}

