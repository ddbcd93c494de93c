//! `bald`: run active-learning experiments from JSON configs.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use bald_core::data::SyntheticName;
use clap::{Parser, Subcommand};

use config::CONFIG_HELP;

/// Failure classes, each with its own exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<bald_core::Error> for CliError {
    fn from(e: bald_core::Error) -> Self {
        use bald_core::Error as E;
        match e {
            E::InvalidArgument(_) | E::Domain(_) => CliError::Config(e.to_string()),
            E::Data(_) | E::Io(_) | E::Csv(_) => CliError::Data(e.to_string()),
            E::Numerical(_) | E::UndefinedMetric(_) => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "bald", version, about = "Gaussian-process active learning with BALD")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for independent runs and trials (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory (run, approx-error) or output file (score, synth, prefgen; default stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed; overrides the config's `seeds` with this single value.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run active learning for every (strategy, seed) pair and write logs,
    /// a learning-curve CSV and a summary CSV.
    #[command(after_help = CONFIG_HELP)]
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Score a pool once against a labelled set and write `index,score,chosen`.
    #[command(after_help = CONFIG_HELP)]
    Score {
        #[arg(long)]
        config: PathBuf,
        /// Labelled CSV: feature columns plus the label column (`label` with -1/1
        /// values unless the config's csv dataset names another).
        #[arg(long)]
        labeled: PathBuf,
        /// Pool CSV with the same feature columns.
        #[arg(long)]
        pool: PathBuf,
    },
    /// Compare closed-form BALD with its Monte-Carlo gold standard.
    #[command(after_help = CONFIG_HELP)]
    ApproxError {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write a synthetic benchmark dataset as CSV (`x0,x1,label`).
    Synth {
        /// block_in_middle, block_in_corner or checkerboard.
        #[arg(long)]
        name: SyntheticName,
        /// Number of points (>= 40).
        #[arg(long)]
        n: usize,
    },
    /// Build a pairwise preference dataset from a regression CSV.
    Prefgen {
        /// Regression CSV with numeric feature columns and a target column.
        #[arg(long)]
        input: PathBuf,
        /// Target column (default: the last column).
        #[arg(long)]
        target_column: Option<String>,
        /// Number of distinct item pairs to sample.
        #[arg(long)]
        n_pairs: usize,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(j) = cli.jobs {
            if j == 0 {
                return Err(CliError::Config("--jobs must be >= 1".into()));
            }
            b = b.num_threads(j);
        }
        b.build().map_err(|e| CliError::Config(e.to_string()))?
    };
    let seed = cli.seed;
    let out = cli.out;
    pool.install(|| match cli.command {
        Command::Run { config } => commands::run(&config, seed, out.as_deref()),
        Command::Score { config, labeled, pool } => commands::score(&config, &labeled, &pool, seed, out.as_deref()),
        Command::ApproxError { config } => commands::approx_error(&config, seed, out.as_deref()),
        Command::Synth { name, n } => commands::synth(name, n, seed.unwrap_or(0), out.as_deref()),
        Command::Prefgen { input, target_column, n_pairs } => {
            commands::prefgen(&input, target_column.as_deref(), n_pairs, seed.unwrap_or(0), out.as_deref())
        }
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bald: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
