//! `smalleig`: simulate, bound, regress, figures and check.
//!
//! Exit codes: 0 success, 1 validation error, 2 runtime failure,
//! 3 scientific-check failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use smalleig::eigensolver::Solver;
use smalleig::fourier_bound::BoundMode;
use smalleig::structured_matrix::Kind;
use smalleig::theory_checks::Suite;

#[derive(Debug, Parser)]
#[command(name = "smalleig", version, about = "Smallest eigenvalue of random Toeplitz and circulant Gram matrices")]
pub struct Cli {
    /// Worker threads (0 = all available cores)
    #[arg(long, global = true, env = "SMALLEIG_THREADS", default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run replicated experiments and write the results CSV
    Simulate(SimulateArgs),
    /// Evaluate the periodogram upper bound against the dense smallest eigenvalue
    Bound(BoundArgs),
    /// Fit log-log quantile lines to a results CSV
    Regress(RegressArgs),
    /// Write figure CSV and SVG files
    Figures(FiguresArgs),
    /// Run the property and theorem check suites
    Check(CheckArgs),
}

#[derive(Debug, Clone, Args)]
pub struct EnsembleArgs {
    /// Matrix family: toeplitz or circulant
    #[arg(long, default_value_t = Kind::Circulant)]
    pub kind: Kind,
    /// Comma-separated row counts p
    #[arg(long, value_delimiter = ',', required_unless_present = "config")]
    pub p: Vec<usize>,
    /// Fixed signal length n for every p
    #[arg(long, conflicts_with = "ratio")]
    pub n: Option<usize>,
    /// Aspect ratio q with n = q·p
    #[arg(long, required_unless_present_any = ["n", "config"])]
    pub ratio: Option<usize>,
    /// Replications per (p, n) cell
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    /// Base seed of the replication substreams
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Eigensolver: auto, dense or lanczos
    #[arg(long, default_value_t = Solver::Auto)]
    pub solver: Solver,
    /// Lanczos convergence tolerance
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Largest p solved densely by the auto solver
    #[arg(long, default_value_t = 300)]
    pub auto_threshold: usize,
    /// Largest p allowed on the dense path
    #[arg(long, default_value_t = 2048)]
    pub dense_cap: usize,
    /// Key=value experiment file replacing the ensemble flags
    #[arg(long, conflicts_with_all = ["p", "n", "ratio"])]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    /// Also evaluate the periodogram bound (circulant only)
    #[arg(long)]
    pub bound: bool,
    /// Rate constant beta of the theorem-mode schedule
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    /// Test-vector width rule: practical (sigma = p^(3/4)) or theorem
    #[arg(long, default_value_t = BoundMode::Practical)]
    pub mode: BoundMode,
    /// Results CSV path (defaults to the config file's `out`)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Continue an interrupted run found at --out
    #[arg(long)]
    pub resume: bool,
    /// Fill the wall_ms column (output is then not reproducible)
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SignalChoice {
    Gaussian,
    Impulse,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    /// Number of rows p
    #[arg(long)]
    pub p: usize,
    /// Signal length n
    #[arg(long)]
    pub n: usize,
    /// Base seed of the trial substreams
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Rate constant beta of the theorem-mode schedule
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    /// Test-vector width rule: practical (sigma = p^(3/4)) or theorem
    #[arg(long, default_value_t = BoundMode::Practical)]
    pub mode: BoundMode,
    /// Number of random signals
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    /// Signal: Gaussian draws or the unit impulse (1, 0, ..., 0)
    #[arg(long, value_enum, default_value_t = SignalChoice::Gaussian)]
    pub signal: SignalChoice,
}

#[derive(Debug, Args)]
pub struct RegressArgs {
    /// Results CSV written by `simulate`
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Quantile level in percent
    #[arg(long, default_value_t = 50.0)]
    pub quantile: f64,
}

#[derive(Debug, Args)]
pub struct FiguresArgs {
    /// Figure number: 1 (spectrum and histogram), 2 (circulant), 3 (Toeplitz)
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub fig: u8,
    /// Matrix family: toeplitz or circulant
    #[arg(long, default_value_t = Kind::Circulant)]
    pub kind: Kind,
    /// Comma-separated row counts p
    #[arg(long, value_delimiter = ',', required_unless_present = "config")]
    pub p: Vec<usize>,
    /// Fixed signal length n for every p
    #[arg(long, conflicts_with = "ratio")]
    pub n: Option<usize>,
    /// Comma-separated aspect ratios; one figure per ratio
    #[arg(long, value_delimiter = ',', required_unless_present_any = ["n", "config"])]
    pub ratio: Vec<usize>,
    /// Replications per (p, n) cell
    #[arg(long, default_value_t = 500)]
    pub reps: usize,
    /// Base seed of the replication substreams
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Eigensolver for figures 2 and 3: auto, dense or lanczos
    #[arg(long, default_value_t = Solver::Auto)]
    pub solver: Solver,
    /// Output directory
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Key=value experiment file replacing the ensemble flags
    #[arg(long, conflicts_with_all = ["p", "n", "ratio"])]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Suite to run: lemmas, theorems or all
    #[arg(long, default_value_t = Suite::All)]
    pub suite: Suite,
    /// Seed for the randomized checks
    #[arg(long, default_value_t = 20240607)]
    pub seed: u64,
    /// Random polynomials per property check
    #[arg(long, default_value_t = 500)]
    pub instances: usize,
    /// Monte Carlo samples for the order-statistic checks
    #[arg(long, default_value_t = 100_000)]
    pub mc_samples: usize,
    /// Also write the JSON report to this file
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
