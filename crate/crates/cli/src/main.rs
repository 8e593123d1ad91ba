//! `nvdress`: couplings, geometries, pulse sequences, simulations, fits and
//! sensitivity reports from the command line.

mod commands;
mod config;
mod output;
mod plot;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<nvdress::Error> for CliError {
    fn from(e: nvdress::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "nvdress", version, about = "Dressed-state spin ensemble simulations")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalOpts {
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for realization-level parallelism.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Also write SVG plots next to the numeric outputs.
    #[arg(long, global = true)]
    pub svg: bool,
    /// Output directory; overrides the config and `NVDRESS_OUT`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Effective couplings of the dressed qubit.
    Couplings(CouplingsArgs),
    /// Sample an ensemble and write its positions and couplings.
    Geometry(ConfigArg),
    /// Toggling frames and average Hamiltonian of a pulse sequence.
    Sequence(SequenceArgs),
    /// Run the protocol selected in the config.
    Simulate(ConfigArg),
    /// Fit a decay curve from CSV.
    Fit(FitArgs),
    /// Sensitivity comparison of the three encodings.
    Sense(ConfigArg),
    /// Verify and summarize a run directory.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct ConfigArg {
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Args, Debug)]
pub struct CouplingsArgs {
    /// Perpendicular field, G.
    #[arg(long, conflicts_with_all = ["su2", "sweep"])]
    pub field: Option<f64>,
    /// Print the SU(2) field.
    #[arg(long)]
    pub su2: bool,
    /// `start:stop:n` field sweep written as CSV.
    #[arg(long)]
    pub sweep: Option<String>,
    /// Constants from a run config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct SequenceArgs {
    #[arg(long, value_enum, conflicts_with = "file")]
    pub builtin: Option<BuiltinArg>,
    /// Free-evolution unit τ for built-in sequences, μs.
    #[arg(long, default_value_t = 0.1)]
    pub tau: f64,
    /// Sequence file, one element per line.
    #[arg(long)]
    pub file: Option<PathBuf>,
    /// Native coupling vector `gx,gy,gz`; defaults to the on-axis encoding.
    #[arg(long)]
    pub native: Option<String>,
    /// Write the sequence in file format.
    #[arg(long)]
    pub write: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
#[value(rename_all = "snake_case")]
pub enum BuiltinArg {
    Xy8,
    Cxy8,
    BalancedSu2,
    Su2Echo,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Model {
    Stretched,
    Powerlaw,
    Loglog,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// CSV with `t_us`, `value` and optionally `stderr`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = Model::Stretched)]
    pub model: Model,
    #[arg(long, default_value_t = nvdress::analysis::DEFAULT_FLOOR)]
    pub floor: f64,
    /// `a:b` time window in μs.
    #[arg(long)]
    pub window: Option<String>,
    /// `J₀ρ` in MHz, for the JT₂ product.
    #[arg(long)]
    pub j0_rho: Option<f64>,
    /// Write the JSON result here as well as to stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Run directory containing `manifest.json`.
    #[arg(long)]
    pub dir: PathBuf,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(CliError::Validation("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Couplings(a) => commands::couplings(a),
        Command::Geometry(a) => commands::geometry(a, &cli.global),
        Command::Sequence(a) => commands::sequence(a),
        Command::Simulate(a) => commands::simulate(a, &cli.global),
        Command::Fit(a) => commands::fit(a, &cli.global),
        Command::Sense(a) => commands::sense(a, &cli.global),
        Command::Report(a) => commands::report(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
