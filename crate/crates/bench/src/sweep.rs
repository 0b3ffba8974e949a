use crate::config::{ConfigError, OptimizerSpec, RunConfig};
use crate::record::{write_csv, RecordError, TrajectoryRecord};
use crate::runner::{run_experiment, RunError};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const THREADS_ENV: &str = "ADAMNX_THREADS";

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("run {run_id}: {source}")]
    Run {
        run_id: String,
        #[source]
        source: RunError,
    },
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error("{0}")]
    Setup(String),
}

/// `"1..5"` (inclusive) or `"1,2,7"`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, String> {
    let bad = || format!("invalid seed list {s:?}: expected A..B or a comma-separated list");
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if b < a {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect()
}

/// Worker cap from `ADAMNX_THREADS`, if set.
pub fn threads_from_env() -> Result<Option<usize>, SweepError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(SweepError::Setup(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
    }
}

pub fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool, SweepError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| SweepError::Setup(e.to_string()))
}

/// One config per (optimizer, seed). Optimizers take their defaults;
/// weight decay and eps carry over from `base`.
pub fn sweep_configs(base: &RunConfig, optimizers: &[String], seeds: &[u64]) -> Result<Vec<RunConfig>, SweepError> {
    let mut out = Vec::new();
    for name in optimizers {
        let mut spec = OptimizerSpec::named(name)?;
        spec.weight_decay = base.optimizer.weight_decay;
        spec.eps = base.optimizer.eps;
        for &seed in seeds {
            out.push(RunConfig {
                optimizer: spec.clone(),
                seed,
                output: None,
                ..base.clone()
            });
        }
    }
    Ok(out)
}

pub fn csv_path(out_dir: &Path, cfg: &RunConfig) -> PathBuf {
    out_dir.join(format!("{}.csv", cfg.run_id()))
}

/// Runs every config, writes `<out_dir>/<run_id>.csv` for each and returns
/// the records sorted by run id.
pub fn run_sweep(
    configs: &[RunConfig],
    out_dir: &Path,
    threads: Option<usize>,
) -> Result<Vec<TrajectoryRecord>, SweepError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| SweepError::Setup(format!("cannot create {}: {e}", out_dir.display())))?;
    let pool = thread_pool(threads)?;
    let mut records = pool.install(|| {
        configs
            .par_iter()
            .map(|cfg| {
                let rec = run_experiment(cfg).map_err(|source| SweepError::Run {
                    run_id: cfg.run_id(),
                    source,
                })?;
                write_csv(&rec, csv_path(out_dir, cfg))?;
                Ok(rec)
            })
            .collect::<Result<Vec<_>, SweepError>>()
    })?;
    records.sort_by(|a, b| a.run_id.cmp(&b.run_id));
    Ok(records)
}

/// Mean and sample standard deviation; `sd` is `None` for fewer than two values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: Option<f64>,
}

impl MeanSd {
    pub fn of(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = (xs.len() > 1).then(|| (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
        Some(Self { mean, sd })
    }
}

impl std::fmt::Display for MeanSd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.sd {
            Some(sd) => write!(f, "{:.6e} ± {:.2e}", self.mean, sd),
            None => write!(f, "{:.6e}", self.mean),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub optimizer: String,
    pub runs: usize,
    pub diverged: usize,
    /// Final epoch-mean loss over runs that did not diverge.
    pub loss: Option<MeanSd>,
    pub top1_err: Option<MeanSd>,
    pub top5_err: Option<MeanSd>,
}

/// Per-optimizer statistics of the final epoch row, ordered by optimizer name.
/// Only uses what the CSV files contain.
pub fn summarize(records: &[TrajectoryRecord]) -> Vec<SummaryRow> {
    let mut sorted: Vec<&TrajectoryRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.run_id.cmp(&b.run_id));
    let mut groups: BTreeMap<&str, Vec<&TrajectoryRecord>> = BTreeMap::new();
    for r in sorted {
        groups.entry(r.optimizer.as_str()).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(name, runs)| {
            let ok: Vec<_> = runs.iter().filter(|r| !r.diverged).filter_map(|r| r.final_epoch()).collect();
            let stat = |f: &dyn Fn(&crate::record::EpochRow) -> Option<f64>| {
                let xs: Vec<f64> = ok.iter().filter_map(|e| f(e)).collect();
                MeanSd::of(&xs)
            };
            SummaryRow {
                optimizer: name.to_string(),
                runs: runs.len(),
                diverged: runs.iter().filter(|r| r.diverged).count(),
                loss: stat(&|e| Some(e.loss)),
                top1_err: stat(&|e| e.top1_err),
                top5_err: stat(&|e| e.top5_err),
            }
        })
        .collect()
}

pub fn write_summary(rows: &[SummaryRow], path: &Path) -> Result<(), RecordError> {
    let name = path.display().to_string();
    let csv_err = |source| RecordError::Csv {
        path: name.clone(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record([
        "optimizer", "runs", "diverged", "loss_mean", "loss_sd", "top1_mean", "top1_sd", "top5_mean", "top5_sd",
    ])
    .map_err(csv_err)?;
    let cells = |s: Option<MeanSd>| match s {
        None => (String::new(), String::new()),
        Some(m) => (format!("{:.16e}", m.mean), m.sd.map(|x| format!("{x:.16e}")).unwrap_or_default()),
    };
    for r in rows {
        let (lm, ls) = cells(r.loss);
        let (t1m, t1s) = cells(r.top1_err);
        let (t5m, t5s) = cells(r.top5_err);
        w.write_record([
            r.optimizer.clone(),
            r.runs.to_string(),
            r.diverged.to_string(),
            lm,
            ls,
            t1m,
            t1s,
            t5m,
            t5s,
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|source| RecordError::Io { path: name, source })
}

pub fn render_summary(rows: &[SummaryRow]) -> String {
    let show = |s: Option<MeanSd>| s.map(|m| m.to_string()).unwrap_or_else(|| "-".into());
    let mut out = format!(
        "{:<14} {:>4} {:>8}  {:<26} {:<26} {:<26}\n",
        "optimizer", "runs", "diverged", "final loss", "top-1 err", "top-5 err"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<14} {:>4} {:>8}  {:<26} {:<26} {:<26}\n",
            r.optimizer,
            r.runs,
            r.diverged,
            show(r.loss),
            show(r.top1_err),
            show(r.top5_err)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("1..5").unwrap(), vec![1, 2, 3, 4, 5]);
        assert_eq!(parse_seeds("3, 1,2").unwrap(), vec![3, 1, 2]);
        assert_eq!(parse_seeds("4").unwrap(), vec![4]);
        assert!(parse_seeds("5..1").is_err());
        assert!(parse_seeds("a").is_err());
    }

    #[test]
    fn mean_sd() {
        let m = MeanSd::of(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(m.mean, 2.0);
        assert_eq!(m.sd, Some(1.0));
        assert_eq!(MeanSd::of(&[4.0]).unwrap().sd, None);
        assert!(MeanSd::of(&[]).is_none());
    }
}
