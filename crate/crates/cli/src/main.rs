//! `corrector`: fit, apply and evaluate weakly supervised error correctors.

mod commands;
mod config;
mod dataset;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "corrector",
    version,
    about = "Error correctors with distribution-free performance bounds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct DataFormat {
    /// Field delimiter of data files.
    #[arg(long, default_value_t = ',', global = true)]
    pub delimiter: char,
    /// Header prefix identifying feature columns.
    #[arg(long, default_value = "f", global = true)]
    pub feature_prefix: String,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a corrector on a labeled correction set.
    Fit(FitArgs),
    /// Accept or reject every row of a data file.
    Apply(ApplyArgs),
    /// Tally decisions on labeled data and compare with the stored bounds.
    Evaluate(EvaluateArgs),
    /// Print the reject and accept guarantees for given levels and counts.
    Bounds(BoundsArgs),
    /// Write gamma against error-set size as CSV.
    Curve(CurveArgs),
    /// Monte-Carlo check of the guarantees on synthetic data.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Where to write the model document.
    #[arg(long)]
    pub model: PathBuf,
    /// Comma-separated label set, in model order.
    #[arg(long)]
    pub labels: Option<String>,
    /// Rejection levels: `0.9`, `0.9,0.8,...` or `label=0.9,...`.
    #[arg(long, conflicts_with = "gamma_targets")]
    pub deltas: Option<String>,
    /// Desired reject guarantees, same syntax as --deltas.
    #[arg(long)]
    pub gamma_targets: Option<String>,
    /// Fraction of variance the PCA basis must explain.
    #[arg(long, conflicts_with = "pca_k")]
    pub pca_variance: Option<f64>,
    /// Number of PCA components.
    #[arg(long)]
    pub pca_k: Option<usize>,
    /// Fit projectors on this fraction of the data and thresholds on the rest.
    #[arg(long, num_args = 0..=1, default_missing_value = "0.5")]
    pub split: Option<f64>,
    /// Seed of the split.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub ridge: Option<f64>,
    /// JSON file with default values for the options above.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub format: DataFormat,
}

#[derive(Debug, Args)]
pub struct ApplyArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Decisions CSV; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub format: DataFormat,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// JSON report.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub format: DataFormat,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long)]
    pub delta: f64,
    #[arg(long)]
    pub m_minus: u64,
    /// Empirical CDF of correct-decision scores at the threshold.
    #[arg(long, requires = "m_plus")]
    pub f_plus: Option<f64>,
    #[arg(long, requires = "f_plus")]
    pub m_plus: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    /// Comma-separated rejection levels.
    #[arg(long, default_value = "0.8,0.85,0.9,0.95")]
    pub deltas: String,
    #[arg(long, default_value_t = 10)]
    pub m_min: u64,
    #[arg(long, default_value_t = 100_000)]
    pub m_max: u64,
    /// Log-spaced grid points (duplicates after rounding are dropped).
    #[arg(long, default_value_t = 50)]
    pub points: usize,
    /// CSV output; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Synthetic spec (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// JSON validation report.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write the first trial's correction set as a data file.
    #[arg(long)]
    pub emit_fit: Option<PathBuf>,
    /// Also write the first trial's test set as a data file.
    #[arg(long)]
    pub emit_test: Option<PathBuf>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err
        .chain()
        .filter_map(|e| e.downcast_ref::<corrector_core::Error>())
        .any(corrector_core::Error::is_numerical);
    if numerical {
        2
    } else {
        1
    }
}

fn broken_pipe(err: &anyhow::Error) -> bool {
    err.chain()
        .filter_map(|e| e.downcast_ref::<std::io::Error>())
        .any(|e| e.kind() == std::io::ErrorKind::BrokenPipe)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Fit(a) => commands::fit(&a),
        Command::Apply(a) => commands::apply(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Bounds(a) => commands::bounds(&a),
        Command::Curve(a) => commands::curve(&a),
        Command::Simulate(a) => commands::simulate(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        // Output cut short by a closed pipe, e.g. `| head`.
        Err(e) if broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
