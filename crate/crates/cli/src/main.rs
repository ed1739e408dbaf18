//! `cogrelay`: train, evaluate, sweep and validate the cooperative relay
//! learner from the command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime error.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "cogrelay", version, about = "Energy-harvesting cooperative cognitive relay: Q-learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a configuration file and list every problem found.
    Validate(Common),
    /// Train one learner; writes qtable.txt and learning_curve.csv.
    Train(Common),
    /// Evaluate a trained Q-table greedily; writes metrics.csv.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Q-table to evaluate (default: <out>/qtable.txt).
        #[arg(long)]
        qtable: Option<PathBuf>,
    },
    /// Run the primary-load sweep; writes sweep.csv and sweep_manifest.txt.
    Sweep(Common),
    /// Solve the shrunk instance exactly and compare a learner against it.
    Oracle(Common),
    /// Draw throughput charts from a sweep CSV.
    Plot {
        #[command(flatten)]
        common: Common,
        /// Sweep CSV to plot (default: <out>/sweep.csv).
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Configuration file (default: built-in defaults).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Overrides run.base_seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// cooperative or non-cooperative; for sweep, restricts the modes run.
    #[arg(long)]
    pub mode: Option<String>,
    /// Comma-separated reward weights; train/eval/oracle use the first.
    #[arg(long, value_delimiter = ',')]
    pub omega: Option<Vec<f64>>,
    /// Number of interior lambda_p grid points k/(n+1).
    #[arg(long)]
    pub grid: Option<usize>,
    /// Replications per sweep cell.
    #[arg(long)]
    pub reps: Option<u32>,
    /// Caps the number of sweep threads.
    #[arg(long, env = "COGRELAY_THREADS", hide = true)]
    pub threads: Option<usize>,
    /// Suppress progress messages.
    #[arg(long, short)]
    pub quiet: bool,
}

/// Failure of one invocation, mapped to the process exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Validate(c) => commands::validate(&c),
        Command::Train(c) => commands::train(&c),
        Command::Eval { common, qtable } => commands::eval(&common, qtable),
        Command::Sweep(c) => commands::sweep(&c),
        Command::Oracle(c) => commands::oracle(&c),
        Command::Plot { common, input } => commands::plot(&common, input),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Usage(m) => eprintln!("error: {m}"),
                CliError::Runtime(m) => eprintln!("runtime error: {m}"),
            }
            ExitCode::from(e.code())
        }
    }
}
