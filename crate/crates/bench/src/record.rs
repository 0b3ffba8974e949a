//! Per-run trajectory and its CSV form.
//!
//! One CSV row per update (`step` filled, metric columns empty) and one per
//! completed epoch (`step`, `lr`, `beta2_hat`, `v_rel_change` empty). Floats
//! are written with 17 significant digits, so reading a file back restores
//! every value bit for bit. Wall time is not persisted.

use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;
use thiserror::Error;

pub const CSV_HEADER: [&str; 11] = [
    "run_id",
    "optimizer",
    "seed",
    "step",
    "epoch",
    "lr",
    "beta2_hat",
    "loss",
    "v_rel_change",
    "top1_err",
    "top5_err",
];

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error in {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path}, row {row}: {message}")]
    Format { path: String, row: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRow {
    pub step: u64,
    pub epoch: usize,
    pub lr: f64,
    pub beta2_hat: Option<f64>,
    /// Mini-batch loss at the parameters before the update. Non-finite only
    /// on the last row of a diverged run.
    pub loss: f64,
    pub v_rel_change: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRow {
    pub epoch: usize,
    /// Mean of the epoch's mini-batch losses.
    pub loss: f64,
    pub top1_err: Option<f64>,
    pub top5_err: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub run_id: String,
    pub optimizer: String,
    pub seed: u64,
    pub steps: Vec<StepRow>,
    pub epochs: Vec<EpochRow>,
    pub best_loss: f64,
    pub wall_time_secs: Option<f64>,
    pub diverged: bool,
}

impl TrajectoryRecord {
    pub fn final_epoch(&self) -> Option<&EpochRow> {
        self.epochs.last()
    }

    pub fn step_losses(&self) -> Vec<f64> {
        self.steps.iter().map(|r| r.loss).collect()
    }

    /// Copy with the fields that do not survive a CSV round trip cleared.
    pub fn without_timing(&self) -> Self {
        Self {
            wall_time_secs: None,
            ..self.clone()
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    run_id: String,
    optimizer: String,
    seed: u64,
    step: Option<u64>,
    epoch: usize,
    lr: Option<String>,
    beta2_hat: Option<String>,
    loss: String,
    v_rel_change: Option<String>,
    top1_err: Option<String>,
    top5_err: Option<String>,
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(s: &str, column: &str, path: &str, row: usize) -> Result<f64, RecordError> {
    s.parse().map_err(|_| RecordError::Format {
        path: path.to_string(),
        row,
        message: format!("{column}: not a number: {s:?}"),
    })
}

pub fn write_csv(record: &TrajectoryRecord, path: impl AsRef<Path>) -> Result<(), RecordError> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let file = File::create(path).map_err(|source| RecordError::Io {
        path: name.clone(),
        source,
    })?;
    write_csv_to(record, file).map_err(|source| RecordError::Csv { path: name, source })
}

pub fn write_csv_to<W: Write>(record: &TrajectoryRecord, out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    let row = |step: Option<&StepRow>, epoch: Option<&EpochRow>| CsvRow {
        run_id: record.run_id.clone(),
        optimizer: record.optimizer.clone(),
        seed: record.seed,
        step: step.map(|s| s.step),
        epoch: step.map(|s| s.epoch).or(epoch.map(|e| e.epoch)).unwrap_or(0),
        lr: step.map(|s| fmt_f64(s.lr)),
        beta2_hat: step.and_then(|s| s.beta2_hat).map(fmt_f64),
        loss: fmt_f64(step.map(|s| s.loss).or(epoch.map(|e| e.loss)).unwrap_or(f64::NAN)),
        v_rel_change: step.and_then(|s| s.v_rel_change).map(fmt_f64),
        top1_err: epoch.and_then(|e| e.top1_err).map(fmt_f64),
        top5_err: epoch.and_then(|e| e.top5_err).map(fmt_f64),
    };
    // chronological: an epoch's steps, then its summary row
    let mut epochs = record.epochs.iter().peekable();
    for s in &record.steps {
        while let Some(e) = epochs.next_if(|e| e.epoch < s.epoch) {
            w.serialize(row(None, Some(e)))?;
        }
        w.serialize(row(Some(s), None))?;
    }
    for e in epochs {
        w.serialize(row(None, Some(e)))?;
    }
    if record.steps.is_empty() && record.epochs.is_empty() {
        w.write_record(CSV_HEADER)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<TrajectoryRecord, RecordError> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let file = File::open(path).map_err(|source| RecordError::Io {
        path: name.clone(),
        source,
    })?;
    let mut reader = csv::Reader::from_reader(BufReader::new(file));
    let csv_err = |source| RecordError::Csv {
        path: name.clone(),
        source,
    };
    let headers = reader.headers().map_err(csv_err)?.clone();
    if headers.iter().ne(CSV_HEADER) {
        return Err(RecordError::Format {
            path: name,
            row: 1,
            message: format!("unexpected header {headers:?}"),
        });
    }

    let mut record = TrajectoryRecord {
        run_id: String::new(),
        optimizer: String::new(),
        seed: 0,
        steps: Vec::new(),
        epochs: Vec::new(),
        best_loss: f64::INFINITY,
        wall_time_secs: None,
        diverged: false,
    };
    for (i, row) in reader.deserialize::<CsvRow>().enumerate() {
        let row = row.map_err(csv_err)?;
        let line = i + 2;
        let opt = |v: &Option<String>, col: &str| v.as_deref().map(|s| parse_f64(s, col, &name, line)).transpose();
        if i == 0 {
            record.run_id = row.run_id.clone();
            record.optimizer = row.optimizer.clone();
            record.seed = row.seed;
        }
        let loss = parse_f64(&row.loss, "loss", &name, line)?;
        match row.step {
            Some(step) => {
                let lr = opt(&row.lr, "lr")?.ok_or_else(|| RecordError::Format {
                    path: name.clone(),
                    row: line,
                    message: "step row without lr".into(),
                })?;
                record.steps.push(StepRow {
                    step,
                    epoch: row.epoch,
                    lr,
                    beta2_hat: opt(&row.beta2_hat, "beta2_hat")?,
                    loss,
                    v_rel_change: opt(&row.v_rel_change, "v_rel_change")?,
                })
            }
            None => record.epochs.push(EpochRow {
                epoch: row.epoch,
                loss,
                top1_err: opt(&row.top1_err, "top1_err")?,
                top5_err: opt(&row.top5_err, "top5_err")?,
            }),
        }
    }
    record.diverged = record.steps.last().is_some_and(|s| !s.loss.is_finite());
    record.best_loss = best_of(&record.steps);
    Ok(record)
}

/// Minimum finite step loss, `+inf` if there is none.
pub fn best_of(steps: &[StepRow]) -> f64 {
    steps
        .iter()
        .map(|s| s.loss)
        .filter(|l| l.is_finite())
        .fold(f64::INFINITY, f64::min)
}
