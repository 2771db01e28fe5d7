//! `cad`: command-line driver for top-down subdivision testing, its
//! simulations and the wavelet and interval applications.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 runtime or
//! assertion failure.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use cad_core::sim::DEFAULT_SEED;
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "cad", version, about = "Top-down tree multiple testing")]
struct Cli {
    /// Seed for every random draw. Overrides the seed in simulation configs.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for simulations (default: all cores). Results do not
    /// depend on this value.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte Carlo error rates of one procedure.
    Simulate(SimulateArgs),
    /// Several procedures on shared simulated data.
    Compare(CompareArgs),
    /// Exhaustive check that first-true level sums never exceed alpha.
    BruteForce(BruteForceArgs),
    /// Haar wavelet denoising with tree-tested coefficients.
    Denoise(DenoiseArgs),
    /// Localize time regions with nonzero mean in repeated trials.
    Localize(LocalizeArgs),
    /// Check the local Bonferroni condition of a tree document.
    ValidateLb(ValidateLbArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// JSON simulation config.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = "cad")]
    pub procedure: String,
    /// Overrides the replication count of the config.
    #[arg(long)]
    pub replications: Option<u64>,
    /// Report destination (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-vertex rejection frequencies as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Comma-separated procedure names (default: all).
    #[arg(long, value_delimiter = ',')]
    pub procedures: Vec<String>,
    #[arg(long)]
    pub replications: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BruteForceArgs {
    #[arg(long, default_value_t = 3)]
    pub max_depth: usize,
    /// Comma-separated branching factors per layer.
    #[arg(long, value_delimiter = ',', default_value = "2,3")]
    pub branchings: Vec<usize>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Randomly weighted allocations checked in addition to the uniform one.
    #[arg(long, default_value_t = 10)]
    pub random_allocations: usize,
    /// Full report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DenoiseArgs {
    /// One float per line, or a CSV file when `--column` is given.
    #[arg(long)]
    pub input: PathBuf,
    /// CSV column (header name or zero-based index).
    #[arg(long)]
    pub column: Option<String>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Noise scale, or `estimate` for the median absolute deviation of the
    /// finest coefficients.
    #[arg(long, default_value = "estimate")]
    pub sigma: String,
    /// Coarsest tested level; coarser levels are kept untested.
    #[arg(long, default_value_t = 1)]
    pub start_level: u32,
    /// Denoised signal, one float per line (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Threshold and sigma metadata as JSON.
    #[arg(long)]
    pub metadata: Option<PathBuf>,
    /// Noise-free signal; adds input and output MSE to the metadata.
    #[arg(long)]
    pub reference: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct LocalizeArgs {
    /// CSV with one row per trial and one column per time point.
    #[arg(long)]
    pub input: PathBuf,
    /// The first CSV row is a header.
    #[arg(long)]
    pub header: bool,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long)]
    pub depth: usize,
    #[arg(long, default_value_t = 2)]
    pub arity: usize,
    /// Known per-sample noise scale.
    #[arg(long)]
    pub sigma: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ValidateLbArgs {
    /// Tree document: `{"depth", "branching", "alpha_root", "allocation"?}`.
    #[arg(long)]
    pub input: PathBuf,
    /// Optional p-values, one per line in vertex order; runs the procedure.
    #[arg(long)]
    pub pvalues: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn usage(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 2,
            error: error.into(),
        }
    }

    pub fn runtime(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 3,
            error: error.into(),
        }
    }
}

impl From<cad_core::Error> for Failure {
    fn from(e: cad_core::Error) -> Self {
        match e {
            cad_core::Error::BudgetExceeded(_) => Failure::runtime(e),
            _ => Failure::usage(e),
        }
    }
}

pub type Outcome = std::result::Result<(), Failure>;

fn run(cli: Cli) -> Outcome {
    let seed = cli.seed;
    let work = move || match cli.command {
        Command::Simulate(a) => commands::simulate(a, seed),
        Command::Compare(a) => commands::compare(a, seed),
        Command::BruteForce(a) => commands::brute_force(a, seed.unwrap_or(DEFAULT_SEED)),
        Command::Denoise(a) => commands::denoise(a),
        Command::Localize(a) => commands::localize(a),
        Command::ValidateLb(a) => commands::validate_lb(a),
    };
    match cli.threads {
        Some(0) => Err(Failure::usage(anyhow::anyhow!(
            "--threads must be at least 1"
        ))),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(Failure::runtime)?
            .install(work),
        None => work(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
