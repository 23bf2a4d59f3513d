//! Command-line interface: `estimate`, `oracle`, `metrics`, `synth`,
//! `bench` and `gradcheck`.
//!
//! Exit status is 0 on success, 2 for invalid input (bad flags, schema
//! violations, unreadable files) and 3 for numerical failures, including a
//! failed gradient check. `GWS_WORKERS` sets the worker thread count.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::bench::Suite;
use crate::GwsError;
use commands::{BenchArgs, OracleArgs, DEFAULT_D, DEFAULT_ORACLE_POINTS};
use config::Overrides;

/// Environment variable holding the worker thread count.
pub const WORKERS_ENV: &str = "GWS_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "graspwrench", version, about = "Grasp wrench space estimation and task-oriented contact synthesis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of sampled directions.
    #[arg(long = "K")]
    k: Option<usize>,
    /// Relaxation band in degrees.
    #[arg(long = "delta-deg")]
    delta_deg: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file (a directory for `synth`); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            k: self.k,
            delta_deg: self.delta_deg,
            seed: self.seed,
            out: self.out.clone(),
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample the grasp wrench boundary of the configured contacts.
    Estimate {
        #[command(flatten)]
        common: Common,
    },
    /// Check boundary points (or a contact set) against the LP oracle.
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Boundary JSON written by `estimate`.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Friction cone edges of the oracle.
        #[arg(long, default_value_t = DEFAULT_D)]
        d: usize,
        /// Points evaluated at an even stride; 0 evaluates all.
        #[arg(long, default_value_t = DEFAULT_ORACLE_POINTS)]
        max_points: usize,
    },
    /// Metric row (RLE, SP, ε, ε_t) as CSV.
    Metrics {
        #[command(flatten)]
        common: Common,
        /// Boundary JSON written by `estimate`.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Optimize a rig pose for the configured task.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Independent runs with seeds seed, seed+1, ….
        #[arg(long)]
        batch: Option<usize>,
    },
    /// Benchmark suite as CSV.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_suite)]
        suite: Suite,
        /// Comma-separated procedural shapes or OBJ paths.
        #[arg(long, value_delimiter = ',')]
        meshes: Option<Vec<String>>,
        /// Cases per mesh and friction coefficient.
        #[arg(long)]
        per: Option<usize>,
        /// Record estimator wall time (runs cases sequentially).
        #[arg(long)]
        timing: bool,
        #[arg(long)]
        rle_points: Option<usize>,
        #[arg(long)]
        sp_probes: Option<usize>,
    },
    /// Compare the analytic task-energy gradient with finite differences.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trials: Option<usize>,
    },
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse().map_err(|e: GwsError| e.to_string())
}

/// Exit status of an error.
pub fn exit_code(e: &GwsError) -> i32 {
    match e {
        GwsError::Invalid(_) | GwsError::Parse { .. } | GwsError::Io { .. } => 2,
        GwsError::Numerical(_) | GwsError::NotForceClosure(_) => 3,
    }
}

fn workers() -> Result<Option<usize>, GwsError> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(GwsError::invalid(format!("{WORKERS_ENV} must be a positive integer, got {v:?}"))),
        },
    }
}

fn dispatch(command: Command) -> Result<i32, GwsError> {
    match command {
        Command::Estimate { common } => commands::estimate(&common.config, &common.overrides()).map(|_| 0),
        Command::Oracle {
            common,
            input,
            d,
            max_points,
        } => {
            let args = OracleArgs { input, d, max_points };
            commands::oracle(&common.config, &common.overrides(), &args).map(|_| 0)
        }
        Command::Metrics { common, input } => commands::metrics(&common.config, &common.overrides(), &input).map(|_| 0),
        Command::Synth { common, batch } => {
            let s = commands::synth(&common.config, &common.overrides(), batch)?;
            eprintln!(
                "{}: {}/{} runs succeeded",
                s.task,
                s.successes,
                s.runs.len()
            );
            Ok(0)
        }
        Command::Bench {
            common,
            suite,
            meshes,
            per,
            timing,
            rle_points,
            sp_probes,
        } => {
            let args = BenchArgs {
                suite,
                meshes,
                per,
                timing,
                rle_points,
                sp_probes,
            };
            commands::bench(&common.config, &common.overrides(), &args).map(|_| 0)
        }
        Command::Gradcheck { common, trials } => {
            let f = commands::gradcheck(&common.config, &common.overrides(), trials)?;
            if f.report.pass {
                Ok(0)
            } else {
                eprintln!(
                    "gradient check failed: pass rate {:.4} below {}",
                    f.report.pass_rate, f.config.required
                );
                Ok(3)
            }
        }
    }
}

/// Parses `args` (program name first) and runs the command; returns the
/// process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = workers().and_then(|n| match n {
        None => dispatch(cli.command),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| GwsError::invalid(format!("worker pool: {e}")))?
            .install(|| dispatch(cli.command)),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
