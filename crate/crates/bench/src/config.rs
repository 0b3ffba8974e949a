//! JSON run configuration.
//!
//! ```json
//! {
//!   "schema": 1,
//!   "problem": {"name": "mlp", "n": 2000, "classes": 10, "dim": 20, "hidden": [32]},
//!   "optimizer": {"name": "adamnx", "beta2": 0.99, "weight_decay": 0.01},
//!   "lr": {"mode": "linear", "eta_peak": 1e-2, "eta_min": 1e-4, "t1": 1200},
//!   "epochs": 20,
//!   "batch_size": 32,
//!   "seed": 1
//! }
//! ```
//!
//! `problem` and `optimizer` may also be bare names, in which case every
//! parameter takes its default.

use adamnx_core::optimizers::{OptimizerConfig, Rule, DEFAULT_EPS, DEFAULT_MOMENTUM, LION_DEFAULT_BETAS};
use adamnx_core::schedules::{
    DecayFamily, DecaySchedule, LrSchedule, ADAFACTOR_DEFAULT_C, ADAMNX_DEFAULT_BETA2, ADAM_DEFAULT_BETA2,
    ADAX_DEFAULT_BETA2, DEFAULT_BETA1,
};
use serde_json::{Map, Value};
use std::fmt;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const SCHEMA_VERSION: u64 = 1;

pub const OPTIMIZER_NAMES: &[&str] = &[
    "adamnx",
    "adam",
    "adam-schedule",
    "adax",
    "adafactor",
    "constant",
    "adamw",
    "sgd",
    "momentum",
    "radam",
    "lion",
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("parse error: cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {origin} at line {line}, column {column}: {message}")]
    Parse {
        origin: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
}

/// Gaussian blob data set parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct BlobSpec {
    pub n: usize,
    pub classes: usize,
    pub dim: usize,
    pub spread: f64,
    /// Seed of the data set itself, independent of the run seed.
    pub data_seed: u64,
}

impl Default for BlobSpec {
    fn default() -> Self {
        Self {
            n: 2000,
            classes: 10,
            dim: 20,
            spread: 1.0,
            data_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    Quadratic { dim: usize, cond: f64 },
    Rosenbrock { dim: usize },
    LogReg { data: BlobSpec, l2: f64 },
    Mlp { data: BlobSpec, hidden: Vec<usize> },
}

impl ProblemSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemSpec::Quadratic { .. } => "quadratic",
            ProblemSpec::Rosenbrock { .. } => "rosenbrock",
            ProblemSpec::LogReg { .. } => "logreg",
            ProblemSpec::Mlp { .. } => "mlp",
        }
    }

    pub fn has_data(&self) -> bool {
        matches!(self, ProblemSpec::LogReg { .. } | ProblemSpec::Mlp { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerSpec {
    pub name: String,
    pub rule: Rule,
    pub weight_decay: f64,
    pub eps: f64,
}

impl OptimizerSpec {
    /// The named optimizer with all defaults.
    pub fn named(name: &str) -> Result<Self, ConfigError> {
        let mut errors = Vec::new();
        let spec = optimizer_from_value(&Value::String(name.to_string()), &mut errors);
        match spec {
            Some(s) if errors.is_empty() => Ok(s),
            _ => Err(ConfigError::Validation(errors)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub optimizer: OptimizerSpec,
    pub lr: LrSchedule,
    pub epochs: usize,
    pub batch_size: usize,
    /// Updates per epoch for problems without a data set.
    pub steps_per_epoch: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn optimizer_config(&self) -> OptimizerConfig {
        OptimizerConfig::new(self.optimizer.rule, self.lr)
            .with_weight_decay(self.optimizer.weight_decay)
            .with_eps(self.optimizer.eps)
    }

    pub fn run_id(&self) -> String {
        format!("{}-{}-s{}", self.problem.name(), self.optimizer.name, self.seed)
    }
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<RunConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text, &path.display().to_string())
}

/// `origin` only labels error messages.
pub fn parse_config_str(text: &str, origin: &str) -> Result<RunConfig, ConfigError> {
    let value: Value = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        origin: origin.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    from_value(&value)
}

struct Obj<'a> {
    path: String,
    map: &'a Map<String, Value>,
    seen: Vec<&'static str>,
}

impl<'a> Obj<'a> {
    fn new(path: impl Into<String>, map: &'a Map<String, Value>) -> Self {
        Self {
            path: path.into(),
            map,
            seen: Vec::new(),
        }
    }

    fn field(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.path)
        }
    }

    fn get(&mut self, key: &'static str) -> Option<&'a Value> {
        self.seen.push(key);
        self.map.get(key)
    }

    fn f64_or(&mut self, key: &'static str, default: f64, errors: &mut Vec<String>) -> f64 {
        match self.get(key) {
            None => default,
            Some(v) => match v.as_f64() {
                Some(x) => x,
                None => {
                    errors.push(format!("{}: expected a number, got {v}", self.field(key)));
                    default
                }
            },
        }
    }

    fn u64_or(&mut self, key: &'static str, default: u64, errors: &mut Vec<String>) -> u64 {
        match self.get(key) {
            None => default,
            Some(v) => match v.as_u64() {
                Some(x) => x,
                None => {
                    errors.push(format!("{}: expected a non-negative integer, got {v}", self.field(key)));
                    default
                }
            },
        }
    }

    fn usize_or(&mut self, key: &'static str, default: usize, errors: &mut Vec<String>) -> usize {
        self.u64_or(key, default as u64, errors) as usize
    }

    fn require_f64(&mut self, key: &'static str, errors: &mut Vec<String>) -> Option<f64> {
        if self.map.contains_key(key) {
            Some(self.f64_or(key, f64::NAN, errors))
        } else {
            self.seen.push(key);
            errors.push(format!("{}: missing", self.field(key)));
            None
        }
    }

    fn finish(self, errors: &mut Vec<String>) {
        let mut unknown: Vec<&String> = self.map.keys().filter(|k| !self.seen.contains(&k.as_str())).collect();
        unknown.sort();
        for k in unknown {
            errors.push(format!("{}: unknown field", self.field(k)));
        }
    }
}

fn from_value(value: &Value) -> Result<RunConfig, ConfigError> {
    let Some(map) = value.as_object() else {
        return Err(ConfigError::Validation(vec!["top level: expected a JSON object".into()]));
    };
    let mut errors = Vec::new();
    let mut root = Obj::new("", map);

    match root.get("schema") {
        None => errors.push("schema: missing (expected 1)".into()),
        Some(v) if v.as_u64() == Some(SCHEMA_VERSION) => {}
        Some(v) => errors.push(format!("schema: unsupported version {v} (expected 1)")),
    }

    let problem = match root.get("problem") {
        None => {
            errors.push("problem: missing".into());
            None
        }
        Some(v) => problem_from_value(v, &mut errors),
    };
    let optimizer = match root.get("optimizer") {
        None => {
            errors.push("optimizer: missing".into());
            None
        }
        Some(v) => optimizer_from_value(v, &mut errors),
    };
    let lr = match root.get("lr") {
        None => {
            errors.push("lr: missing".into());
            None
        }
        Some(v) => lr_from_value(v, &mut errors),
    };

    let epochs = root.usize_or("epochs", 1, &mut errors);
    if epochs < 1 {
        errors.push("epochs: must be >= 1".into());
    }
    let batch_size = root.usize_or("batch_size", 32, &mut errors);
    if batch_size < 1 {
        errors.push("batch_size: must be >= 1".into());
    }
    let steps_per_epoch = root.usize_or("steps_per_epoch", 1, &mut errors);
    if steps_per_epoch < 1 {
        errors.push("steps_per_epoch: must be >= 1".into());
    }
    let seed = root.u64_or("seed", 0, &mut errors);
    let output = match root.get("output") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(PathBuf::from(s)),
        Some(v) => {
            errors.push(format!("output: expected a path string, got {v}"));
            None
        }
    };
    root.finish(&mut errors);

    match (problem, optimizer, lr) {
        (Some(problem), Some(optimizer), Some(lr)) if errors.is_empty() => Ok(RunConfig {
            problem,
            optimizer,
            lr,
            epochs,
            batch_size,
            steps_per_epoch,
            seed,
            output,
        }),
        _ => Err(ConfigError::Validation(errors)),
    }
}

/// Accepts `"name"` or `{"name": ..., params}`.
fn named_object<'a>(
    field: &str,
    value: &'a Value,
    empty: &'a Map<String, Value>,
    errors: &mut Vec<String>,
) -> Option<(String, Obj<'a>)> {
    match value {
        Value::String(name) => Some((name.clone(), Obj::new(field, empty))),
        Value::Object(map) => {
            let mut obj = Obj::new(field, map);
            match obj.get("name") {
                Some(Value::String(name)) => Some((name.clone(), obj)),
                Some(v) => {
                    errors.push(format!("{field}.name: expected a string, got {v}"));
                    None
                }
                None => {
                    errors.push(format!("{field}.name: missing"));
                    None
                }
            }
        }
        v => {
            errors.push(format!("{field}: expected a name or an object, got {v}"));
            None
        }
    }
}

fn blob_spec(obj: &mut Obj<'_>, errors: &mut Vec<String>) -> BlobSpec {
    let d = BlobSpec::default();
    let spec = BlobSpec {
        n: obj.usize_or("n", d.n, errors),
        classes: obj.usize_or("classes", d.classes, errors),
        dim: obj.usize_or("dim", d.dim, errors),
        spread: obj.f64_or("spread", d.spread, errors),
        data_seed: obj.u64_or("data_seed", d.data_seed, errors),
    };
    if spec.n < 1 {
        errors.push(format!("{}: must be >= 1", obj.field("n")));
    }
    if spec.classes < 2 {
        errors.push(format!("{}: must be >= 2", obj.field("classes")));
    }
    if spec.dim < 1 {
        errors.push(format!("{}: must be >= 1", obj.field("dim")));
    }
    if !(spec.spread >= 0.0 && spec.spread.is_finite()) {
        errors.push(format!("{}: must be >= 0", obj.field("spread")));
    }
    spec
}

fn problem_from_value(value: &Value, errors: &mut Vec<String>) -> Option<ProblemSpec> {
    let empty = Map::new();
    let (name, mut obj) = named_object("problem", value, &empty, errors)?;
    let before = errors.len();
    let spec = match name.as_str() {
        "quadratic" => {
            let dim = obj.usize_or("dim", 10, errors);
            let cond = obj.f64_or("cond", 10.0, errors);
            if dim < 1 {
                errors.push("problem.dim: must be >= 1".into());
            }
            if !(cond >= 1.0 && cond.is_finite()) {
                errors.push(format!("problem.cond: must be >= 1, got {cond}"));
            }
            ProblemSpec::Quadratic { dim, cond }
        }
        "rosenbrock" => {
            let dim = obj.usize_or("dim", 2, errors);
            if dim < 2 {
                errors.push("problem.dim: must be >= 2".into());
            }
            ProblemSpec::Rosenbrock { dim }
        }
        "logreg" => {
            let data = blob_spec(&mut obj, errors);
            let l2 = obj.f64_or("l2", 0.0, errors);
            if !(l2 >= 0.0 && l2.is_finite()) {
                errors.push(format!("problem.l2: must be >= 0, got {l2}"));
            }
            ProblemSpec::LogReg { data, l2 }
        }
        "mlp" => {
            let data = blob_spec(&mut obj, errors);
            let hidden = match obj.get("hidden") {
                None => vec![32],
                Some(Value::Array(xs)) => {
                    let sizes: Vec<Option<u64>> = xs.iter().map(Value::as_u64).collect();
                    if sizes.iter().any(|s| !matches!(s, Some(n) if *n >= 1)) {
                        errors.push("problem.hidden: expected positive integers".into());
                    }
                    sizes.into_iter().map(|s| s.unwrap_or(1) as usize).collect()
                }
                Some(v) => {
                    errors.push(format!("problem.hidden: expected an array, got {v}"));
                    vec![32]
                }
            };
            ProblemSpec::Mlp { data, hidden }
        }
        other => {
            errors.push(format!(
                "problem.name: unknown problem {other:?} (expected quadratic, rosenbrock, logreg or mlp)"
            ));
            return None;
        }
    };
    obj.finish(errors);
    (errors.len() == before).then_some(spec)
}

fn optimizer_from_value(value: &Value, errors: &mut Vec<String>) -> Option<OptimizerSpec> {
    let empty = Map::new();
    let (name, mut obj) = named_object("optimizer", value, &empty, errors)?;
    let before = errors.len();

    let adam_pair = |obj: &mut Obj<'_>, errors: &mut Vec<String>, beta2: f64| {
        (
            obj.f64_or("beta1", DEFAULT_BETA1, errors),
            obj.f64_or("beta2", beta2, errors),
        )
    };
    let schedule = |obj: &mut Obj<'_>, errors: &mut Vec<String>, family: fn(f64) -> DecayFamily, key, default| {
        let beta1 = obj.f64_or("beta1", DEFAULT_BETA1, errors);
        let x = obj.f64_or(key, default, errors);
        match DecaySchedule::new(beta1, family(x)) {
            Ok(s) => Some(Rule::GeneralizedAdam(s)),
            Err(e) => {
                errors.push(format!("optimizer: {e}"));
                None
            }
        }
    };

    let rule = match name.as_str() {
        "adamnx" => schedule(&mut obj, errors, |beta2| DecayFamily::AdamNX { beta2 }, "beta2", ADAMNX_DEFAULT_BETA2),
        "adam-schedule" => schedule(
            &mut obj,
            errors,
            |beta2| DecayFamily::AdamClassic { beta2 },
            "beta2",
            ADAM_DEFAULT_BETA2,
        ),
        "adax" => schedule(&mut obj, errors, |beta2| DecayFamily::AdaX { beta2 }, "beta2", ADAX_DEFAULT_BETA2),
        "adafactor" => schedule(&mut obj, errors, |c| DecayFamily::Adafactor { c }, "c", ADAFACTOR_DEFAULT_C),
        "constant" => schedule(&mut obj, errors, |beta2| DecayFamily::Constant { beta2 }, "beta2", ADAM_DEFAULT_BETA2),
        "adam" => {
            let (beta1, beta2) = adam_pair(&mut obj, errors, ADAM_DEFAULT_BETA2);
            Some(Rule::AdamClassic { beta1, beta2 })
        }
        "adamw" => {
            let (beta1, beta2) = adam_pair(&mut obj, errors, ADAM_DEFAULT_BETA2);
            Some(Rule::AdamW { beta1, beta2 })
        }
        "radam" => {
            let (beta1, beta2) = adam_pair(&mut obj, errors, ADAM_DEFAULT_BETA2);
            Some(Rule::RAdam { beta1, beta2 })
        }
        "lion" => {
            let beta1 = obj.f64_or("beta1", LION_DEFAULT_BETAS.0, errors);
            let beta2 = obj.f64_or("beta2", LION_DEFAULT_BETAS.1, errors);
            Some(Rule::Lion { beta1, beta2 })
        }
        "sgd" => Some(Rule::Sgd),
        "momentum" => Some(Rule::MomentumSgd {
            mu: obj.f64_or("mu", DEFAULT_MOMENTUM, errors),
        }),
        other => {
            errors.push(format!(
                "optimizer.name: unknown optimizer {other:?} (expected one of {})",
                OPTIMIZER_NAMES.join(", ")
            ));
            return None;
        }
    };
    let weight_decay = obj.f64_or("weight_decay", 0.0, errors);
    let eps = obj.f64_or("eps", DEFAULT_EPS, errors);
    obj.finish(errors);
    let rule = rule?;

    // Rule-level checks (beta ranges, eps, decay) live in the core crate.
    let lr = LrSchedule::Fixed { eta: 1.0 };
    if let Err(e) = OptimizerConfig::new(rule, lr)
        .with_weight_decay(weight_decay)
        .with_eps(eps)
        .validate()
    {
        errors.push(format!("optimizer: {e}"));
    }
    (errors.len() == before).then_some(OptimizerSpec {
        name,
        rule,
        weight_decay,
        eps,
    })
}

fn lr_from_value(value: &Value, errors: &mut Vec<String>) -> Option<LrSchedule> {
    let Some(map) = value.as_object() else {
        errors.push(format!("lr: expected an object, got {value}"));
        return None;
    };
    let mut obj = Obj::new("lr", map);
    let mode = match obj.get("mode") {
        Some(Value::String(s)) => s.clone(),
        None => "fixed".to_string(),
        Some(v) => {
            errors.push(format!("lr.mode: expected a string, got {v}"));
            return None;
        }
    };
    let schedule = match mode.as_str() {
        "fixed" => {
            let eta = obj.require_f64("eta", errors)?;
            LrSchedule::fixed(eta).map_err(|e| errors.push(format!("lr: {e}"))).ok()
        }
        "linear" => {
            let peak = obj.require_f64("eta_peak", errors);
            let min = obj.require_f64("eta_min", errors);
            let t1 = obj.u64_or("t1", 0, errors);
            if !obj.map.contains_key("t1") {
                errors.push("lr.t1: missing".into());
            }
            match (peak, min) {
                (Some(peak), Some(min)) if obj.map.contains_key("t1") => LrSchedule::linear_then_floor(peak, min, t1)
                    .map_err(|e| errors.push(format!("lr: {e}")))
                    .ok(),
                _ => None,
            }
        }
        other => {
            errors.push(format!("lr.mode: unknown mode {other:?} (expected fixed or linear)"));
            None
        }
    };
    obj.finish(errors);
    schedule
}

impl fmt::Display for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProblemSpec::Quadratic { dim, cond } => write!(f, "quadratic(dim={dim}, cond={cond})"),
            ProblemSpec::Rosenbrock { dim } => write!(f, "rosenbrock(dim={dim})"),
            ProblemSpec::LogReg { data, l2 } => write!(
                f,
                "logreg(n={}, classes={}, dim={}, l2={l2})",
                data.n, data.classes, data.dim
            ),
            ProblemSpec::Mlp { data, hidden } => write!(
                f,
                "mlp(n={}, classes={}, dim={}, hidden={hidden:?})",
                data.n, data.classes, data.dim
            ),
        }
    }
}
