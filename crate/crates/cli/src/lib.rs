//! Command-line front end for `spectr-core`.
//!
//! Exit codes: 0 success, 1 input or validation error, 2 infeasible
//! covariance, 3 solver non-convergence.

pub mod commands;
pub mod error;
pub mod output;
pub mod problem;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use spectr_core::Metric;

use commands::{ExperimentFlags, SolveFlags};
pub use error::{CliError, CliResult};

pub const THREADS_ENV: &str = "SPECTR_THREADS";

#[derive(Debug, Parser)]
#[command(name = "spectr", version, about = "Spectrum approximation under state-covariance constraints")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check whether Sigma is a feasible state covariance for the filter.
    Feasibility {
        problem: PathBuf,
        #[arg(long)]
        grid: Option<usize>,
        /// Also write certificate.json into this directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Solve the approximation problem for the Sigma in the problem file.
    Solve(SolveArgs),
    /// Estimate Sigma from data (or synthesized data), repair it, and solve.
    Estimate(SolveArgs),
    /// Run a continuity or consistency experiment.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub problem: PathBuf,
    #[arg(long, value_parser = parse_metric)]
    pub metric: Metric,
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ExperimentKind {
    Continuity,
    Consistency,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    pub kind: ExperimentKind,
    #[command(flatten)]
    pub solve: SolveArgs,
    #[arg(long, value_delimiter = ',')]
    pub t_list: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
    #[arg(long)]
    pub trials: Option<usize>,
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    s.parse()
}

impl SolveArgs {
    fn flags(&self) -> SolveFlags {
        SolveFlags { metric: self.metric, grid: self.grid, tol: self.tol, max_iter: self.max_iter, seed: self.seed }
    }
}

/// Sizes the global worker pool from `SPECTR_THREADS` (unset or 0: automatic).
pub fn configure_threads() -> CliResult<()> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| CliError::Invalid(format!("{THREADS_ENV} must be a non-negative integer, got '{v}'")))?,
        Err(_) => 0,
    };
    // a second initialization in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

/// Runs one command and returns its exit code.
pub fn run(cli: &Cli) -> CliResult<i32> {
    configure_threads()?;
    match &cli.command {
        Command::Feasibility { problem, grid, output } => commands::cmd_feasibility(problem, *grid, output.as_deref()),
        Command::Solve(args) => commands::cmd_solve(&args.problem, &args.flags(), &args.output),
        Command::Estimate(args) => commands::cmd_estimate(&args.problem, &args.flags(), &args.output),
        Command::Experiment(args) => {
            let flags = ExperimentFlags {
                solve: args.solve.flags(),
                t_list: args.t_list.clone(),
                n_list: args.n_list.clone(),
                trials: args.trials,
            };
            match args.kind {
                ExperimentKind::Continuity => commands::cmd_continuity(&args.solve.problem, &flags, &args.solve.output),
                ExperimentKind::Consistency => commands::cmd_consistency(&args.solve.problem, &flags, &args.solve.output),
            }
        }
    }
}
