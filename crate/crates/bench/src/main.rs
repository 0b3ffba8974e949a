use adamnx_bench::config::parse_config;
use adamnx_bench::plot::{emit_plot, Series};
use adamnx_bench::record::{read_csv, write_csv};
use adamnx_bench::runner::run_experiment;
use adamnx_bench::smooth::{kept_indices, smooth_series};
use adamnx_bench::sweep::{
    parse_seeds, render_summary, run_sweep, summarize, sweep_configs, threads_from_env, write_summary,
};
use adamnx_bench::verify::{all_pass, gradient_checks, render_table, schedule_checks, variance_checks};
use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "adamnx", version, about = "AdamNX optimizer experiments and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its trajectory CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for `<run_id>.csv`; without it the config's output file, else `<run_id>.csv` here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every optimizer x seed combination and summarize.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        optimizers: Vec<String>,
        /// `A..B` (inclusive) or a comma-separated list.
        #[arg(long, default_value = "1..5")]
        seeds: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check decay-rate schedule properties.
    VerifySchedules,
    /// Monte-Carlo check of second-moment mean and variance.
    VerifyVariance {
        #[arg(long, default_value_t = 100_000)]
        chains: usize,
        #[arg(long, default_value_t = 10_000)]
        t: u64,
    },
    /// Compare analytic and finite-difference gradients.
    Gradcheck,
    /// Plot step losses from trajectory CSVs as SVG.
    Plot {
        #[arg(long = "in", num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Downsample and smooth each curve.
        #[arg(long)]
        smooth: bool,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// `Ok(false)` for failed checks or diverged runs.
fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config, seed, out } => {
            let mut cfg = parse_config(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let path = match (out, &cfg.output) {
                (Some(dir), _) => {
                    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
                    dir.join(format!("{}.csv", cfg.run_id()))
                }
                (None, Some(p)) => p.clone(),
                (None, None) => PathBuf::from(format!("{}.csv", cfg.run_id())),
            };
            let rec = run_experiment(&cfg)?;
            write_csv(&rec, &path)?;
            let last = rec.final_epoch().map(|e| e.loss).unwrap_or(f64::NAN);
            println!(
                "{}: {} steps, final epoch loss {last:.6e}, best loss {:.6e}{} -> {}",
                rec.run_id,
                rec.steps.len(),
                rec.best_loss,
                if rec.diverged { ", DIVERGED" } else { "" },
                path.display()
            );
            Ok(!rec.diverged)
        }
        Command::Sweep {
            config,
            optimizers,
            seeds,
            out,
        } => {
            let base = parse_config(&config)?;
            let seeds = parse_seeds(&seeds).map_err(anyhow::Error::msg)?;
            let configs = sweep_configs(&base, &optimizers, &seeds)?;
            let records = run_sweep(&configs, &out, threads_from_env()?)?;
            let rows = summarize(&records);
            write_summary(&rows, &out.join("summary.csv"))?;
            print!("{}", render_summary(&rows));
            let diverged: Vec<&str> = records.iter().filter(|r| r.diverged).map(|r| r.run_id.as_str()).collect();
            if !diverged.is_empty() {
                eprintln!("diverged: {}", diverged.join(", "));
            }
            Ok(diverged.is_empty())
        }
        Command::VerifySchedules => report(schedule_checks()),
        Command::VerifyVariance { chains, t } => {
            let pool = adamnx_bench::sweep::thread_pool(threads_from_env()?)?;
            report(pool.install(|| variance_checks(chains, t))?)
        }
        Command::Gradcheck => report(gradient_checks()),
        Command::Plot { inputs, out, smooth } => {
            let mut series = Vec::new();
            for path in &inputs {
                let rec = read_csv(path)?;
                let losses = rec.step_losses();
                let points = if smooth {
                    let ys = smooth_series(&losses, losses.len());
                    kept_indices(losses.len(), losses.len())
                        .into_iter()
                        .zip(ys)
                        .map(|(i, y)| (rec.steps[i].step as f64, y))
                        .collect()
                } else {
                    rec.steps.iter().map(|s| (s.step as f64, s.loss)).collect()
                };
                series.push(Series {
                    label: rec.run_id.clone(),
                    points,
                });
            }
            emit_plot(&series, &out).with_context(|| format!("writing {}", out.display()))?;
            println!("wrote {}", out.display());
            Ok(true)
        }
    }
}

fn report(checks: Vec<adamnx_bench::verify::Check>) -> Result<bool> {
    print!("{}", render_table(&checks));
    Ok(all_pass(&checks))
}
