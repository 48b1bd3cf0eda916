//! Command-line experiments over instrumented gradient-descent runs.

pub mod commands;
pub mod error;
pub mod heatmap;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use error::{CliError, CliResult};

/// η values swept by `similarity` and `baseline-compare` unless overridden.
pub const DEFAULT_ETAS: [f64; 7] = [0.01, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30];
pub const DEFAULT_MS: [usize; 4] = [1, 2, 4, 8];
pub const DEFAULT_ETA_PLUS: [f64; 3] = [0.10, 0.20, 0.30];
pub const DEFAULT_ETA_MINUS: [f64; 2] = [0.05, 0.02];

#[derive(Debug, Parser)]
#[command(name = "landscape", version, about = "Hessian spectra and landscape similarity of small MLPs under gradient descent")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Run configuration (TOML).
    pub config: PathBuf,
    /// Overrides the config's `output_dir`.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct Jobs {
    /// Concurrent trainings; defaults to the available cores.
    #[arg(long)]
    pub jobs: Option<usize>,
}

impl Jobs {
    pub fn get(&self) -> usize {
        self.jobs
            .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
            .max(1)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one run: metrics CSV, checkpoints and subspace snapshots.
    Train(Common),
    /// Train and detect loss spikes; per-epoch phase quantities.
    Phases(Common),
    /// Delayed learning-rate drops branched off one shared high-η prefix.
    Breakaway {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', required = true)]
        drops: Vec<usize>,
        /// Epochs trained after each drop.
        #[arg(long, default_value_t = 50)]
        post_budget: usize,
        /// Defaults to the schedule's largest η.
        #[arg(long)]
        eta_high: Option<f64>,
        /// Defaults to a tenth of `eta_high`.
        #[arg(long)]
        eta_low: Option<f64>,
        #[command(flatten)]
        jobs: Jobs,
    },
    /// One constant-η run per η; similarity matrices and heatmaps per m.
    Similarity {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_ETAS)]
        etas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_MS)]
        ms: Vec<usize>,
        #[command(flatten)]
        jobs: Jobs,
    },
    /// Gradient and Hessian misalignment of each run against the smallest η.
    BaselineCompare {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_ETAS)]
        etas: Vec<f64>,
        #[command(flatten)]
        jobs: Jobs,
    },
    /// Grid of cyclic schedules, one cell per (η+, η-) pair.
    Cyclic {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_ETA_PLUS)]
        eta_plus: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_ETA_MINUS)]
        eta_minus: Vec<f64>,
        #[command(flatten)]
        jobs: Jobs,
    },
    /// Output bands along the top Hessian eigenvectors of a checkpoint.
    Perturb {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 6)]
        top_n: usize,
        #[arg(long, default_value_t = 1.0)]
        cp: f64,
    },
    /// Download the four Fashion-MNIST IDX files and check their digests.
    FetchFmnist {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = commands::fetch::DEFAULT_MIRROR)]
        mirror: String,
    },
    /// Gradient, HVP and Lanczos checks against dense oracles.
    OracleCheck(Common),
}

pub fn run(cli: Cli) -> CliResult<()> {
    use commands::*;
    match cli.command {
        Command::Train(c) => train::run(&c),
        Command::Phases(c) => phases::run(&c),
        Command::Breakaway {
            common,
            drops,
            post_budget,
            eta_high,
            eta_low,
            jobs,
        } => breakaway::run(&common, &drops, post_budget, eta_high, eta_low, jobs.get()),
        Command::Similarity { common, etas, ms, jobs } => similarity::run(&common, &etas, &ms, jobs.get()),
        Command::BaselineCompare { common, etas, jobs } => baseline::run(&common, &etas, jobs.get()),
        Command::Cyclic {
            common,
            eta_plus,
            eta_minus,
            jobs,
        } => cyclic::run(&common, &eta_plus, &eta_minus, jobs.get()),
        Command::Perturb {
            common,
            checkpoint,
            top_n,
            cp,
        } => perturb::run(&common, &checkpoint, top_n, cp),
        Command::FetchFmnist { out, mirror } => fetch::run(&out, &mirror),
        Command::OracleCheck(c) => oracle::run(&c),
    }
}
