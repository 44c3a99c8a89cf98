//! Scenario configuration, runner and command-line entry point.

pub mod config;
pub mod run;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use nalgebra::DVector;
use rayon::prelude::*;

pub use config::{parse_config, parse_config_str, AnalysisSpec, FamilySpec, Mode, Model, OutputSpec, ScenarioConfig};
pub use run::{probe, run_scenario, RunOptions, RunOutcome, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK};

use crate::duality::StateManifold;
use crate::error::Error;

#[derive(Debug, Parser)]
#[command(name = "infodyn", version, about = "Entropy-gradient flows on maximum-entropy state manifolds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one or more scenarios and write their artifacts.
    Run {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        /// Directory for relative output paths.
        #[arg(long, default_value = ".")]
        output_dir: PathBuf,
        /// Scenarios to run concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Record wall time in the summary.
        #[arg(long)]
        timing: bool,
    },
    /// Parse and validate a scenario without running it.
    Validate { config: PathBuf },
    /// Print metric, forces, sigma and connection coefficients at a point.
    Probe {
        config: PathBuf,
        #[arg(long, num_args = 1.., required = true, allow_negative_numbers = true)]
        point: Vec<f64>,
    },
}

fn report_config_error(path: &std::path::Path, e: &Error) {
    match e {
        Error::Validation(list) => {
            eprintln!("{}: ValidationError: {} problem(s)", path.display(), list.len());
            for p in list {
                eprintln!("  - {p}");
            }
        }
        other => eprintln!("{}: {}: {other}", path.display(), other.kind()),
    }
}

fn run_one(path: &std::path::Path, opts: &RunOptions) -> (i32, String) {
    let cfg = match parse_config(path) {
        Ok(cfg) => cfg,
        Err(e) => {
            report_config_error(path, &e);
            return (EXIT_CONFIG, String::new());
        }
    };
    let outcome = run_scenario(&cfg, opts);
    if let Some(msg) = &outcome.diagnostic {
        eprintln!("{}: {msg}", cfg.name);
    }
    let line = match &outcome.summary {
        Some(s) => format!(
            "{}: {} at tau = {}",
            cfg.name,
            s["terminal_status"].as_str().unwrap_or("?"),
            s["terminal_tau"]
        ),
        None => String::new(),
    };
    (outcome.exit_code, line)
}

/// Executes a parsed command line and returns the process exit code.
pub fn execute(cli: Cli) -> i32 {
    match cli.command {
        Command::Run { configs, output_dir, jobs, timing } => {
            let opts = RunOptions { output_dir, timing };
            let results: Vec<(i32, String)> = if jobs > 1 && configs.len() > 1 {
                match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
                    Ok(pool) => pool.install(|| configs.par_iter().map(|p| run_one(p, &opts)).collect()),
                    Err(e) => {
                        eprintln!("cannot start worker pool: {e}");
                        return EXIT_NUMERICAL;
                    }
                }
            } else {
                configs.iter().map(|p| run_one(p, &opts)).collect()
            };
            for (_, line) in &results {
                if !line.is_empty() {
                    println!("{line}");
                }
            }
            results.iter().map(|(code, _)| *code).max().unwrap_or(EXIT_OK)
        }
        Command::Validate { config } => match parse_config(&config) {
            Ok(cfg) => {
                println!("{}: valid {} scenario, dimension {}", cfg.name, cfg.mode.as_str(), cfg.model.dim());
                EXIT_OK
            }
            Err(e) => {
                report_config_error(&config, &e);
                EXIT_CONFIG
            }
        },
        Command::Probe { config, point } => {
            let cfg = match parse_config(&config) {
                Ok(cfg) => cfg,
                Err(e) => {
                    report_config_error(&config, &e);
                    return EXIT_CONFIG;
                }
            };
            let manifold: &dyn StateManifold = match &cfg.model {
                Model::Single(f) => f,
                Model::Coupled(cs) => cs,
            };
            if point.len() != manifold.dim() {
                eprintln!("--point needs {} values, got {}", manifold.dim(), point.len());
                return EXIT_CONFIG;
            }
            match probe(manifold, &DVector::from_vec(point)) {
                Ok(v) => {
                    println!("{}", serde_json::to_string_pretty(&v).expect("probe output serializes"));
                    EXIT_OK
                }
                Err(e) => {
                    eprintln!("{}: {e}", e.kind());
                    EXIT_NUMERICAL
                }
            }
        }
    }
}

#[cfg(test)]
mod tests;
