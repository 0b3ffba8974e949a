//! Experiment harness for `adamnx-core`: JSON run configs, a seeded
//! mini-batch runner, CSV trajectories, loss-curve smoothing, SVG plots and
//! the property suites used by the `adamnx` binary.

pub mod config;
pub mod plot;
pub mod record;
pub mod runner;
pub mod smooth;
pub mod sweep;
pub mod verify;

pub use config::{parse_config, parse_config_str, ConfigError, OptimizerSpec, ProblemSpec, RunConfig};
pub use plot::{emit_plot, Series};
pub use record::{read_csv, write_csv, EpochRow, StepRow, TrajectoryRecord};
pub use runner::{run_experiment, train, RunError};
pub use smooth::{smooth_params, smooth_series};
