//! `wismc` command-line tool.

mod commands;
mod config;
mod error;
mod io;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};

use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "wismc",
    version,
    about = "Weighted-indexed semi-Markov models of intraday returns"
)]
pub struct Cli {
    /// Worker threads for parallel stages [default: machine parallelism]
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Key = value file with defaults for any long flag; flags on the command line win
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Resample ticks to a regular grid and write per-session simple returns
    Ingest(IngestArgs),
    /// Fit a model to a return series
    Fit(FitArgs),
    /// Simulate trajectories from a fitted model
    Simulate(SimulateArgs),
    /// Autocorrelations and first-passage times of a return series
    Analyze(AnalyzeArgs),
    /// Score (lambda, m) pairs by the squared-return ACF mismatch
    Sweep(SweepArgs),
    /// Compare a model's simulated output with data
    Report(ReportArgs),
    /// Generate a synthetic ground-truth model
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Tick CSV with columns timestamp,price[,session]
    #[arg(long)]
    pub ticks: PathBuf,
    /// Grid step in seconds
    #[arg(long, default_value_t = 60)]
    pub step: u64,
    /// Daily trading hours in UTC, HH:MM-HH:MM; one session per day
    #[arg(long)]
    pub schedule: Option<String>,
    /// Output CSV t,return
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Return CSV with a `return` column
    #[arg(long)]
    pub returns: PathBuf,
    /// Number of return states (odd)
    #[arg(long, default_value_t = 5, conflicts_with = "bins_from")]
    pub states: usize,
    /// Reuse the return bins of an existing model JSON
    #[arg(long, value_name = "MODEL")]
    pub bins_from: Option<PathBuf>,
    /// Round the bin cut points to multiples of this return tick
    #[arg(long)]
    pub tick: Option<f64>,
    /// Number of index levels
    #[arg(long, default_value_t = 5)]
    pub levels: usize,
    /// Index decay factor in (0, 1]
    #[arg(long, default_value_t = 0.97)]
    pub lambda: f64,
    /// Index memory in sojourns, or `unbounded`
    #[arg(long, default_value = "unbounded")]
    pub memory: wismc::Memory,
    /// Index value before the first transition [default: squared return of the median state]
    #[arg(long)]
    pub initial_index: Option<f64>,
    /// Minimum number of observed transitions
    #[arg(long, default_value_t = wismc::estimation::DEFAULT_MIN_TRANSITIONS)]
    pub min_transitions: usize,
    /// Output model JSON
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Model JSON
    #[arg(long)]
    pub model: PathBuf,
    /// Minutes per path
    #[arg(long)]
    pub horizon: u64,
    /// Number of independent paths
    #[arg(long, default_value_t = 1)]
    pub paths: usize,
    /// Master seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Minutes simulated and discarded before each path
    #[arg(long, default_value_t = 0)]
    pub burn_in: u64,
    /// Starting state label [default: median state]
    #[arg(long)]
    pub initial_state: Option<u16>,
    /// Starting index value [default: the model's]
    #[arg(long)]
    pub initial_index: Option<f64>,
    /// Fail on empty (state, level) cells instead of using the nearest level
    #[arg(long)]
    pub no_fallback: bool,
    /// Output directory for path_K.csv files (t,state,return)
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Return CSV with a `return` column
    #[arg(long)]
    pub returns: PathBuf,
    /// Largest ACF lag in minutes
    #[arg(long, default_value_t = wismc::stats::DEFAULT_TAU_MAX)]
    pub tau_max: usize,
    /// First-passage threshold on the gross return
    #[arg(long, default_value_t = 1.005)]
    pub rho: f64,
    /// Longest first-passage wait in minutes; longer waits are censored
    #[arg(long, default_value_t = 500)]
    pub max_wait: usize,
    /// Also write the index series n,T_n,U_n under this model
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Return CSV with a `return` column
    #[arg(long)]
    pub returns: PathBuf,
    /// Comma-separated lambda grid
    #[arg(long, default_value = "0.9,0.92,0.94,0.96,0.98,1")]
    pub lambdas: String,
    /// Comma-separated memory grid (integers or `unbounded`)
    #[arg(long, default_value = "10,50,100,500,unbounded")]
    pub memories: String,
    /// Number of return states (odd)
    #[arg(long, default_value_t = 5, conflicts_with = "bins_from")]
    pub states: usize,
    /// Reuse the return bins of an existing model JSON
    #[arg(long, value_name = "MODEL")]
    pub bins_from: Option<PathBuf>,
    /// Number of index levels
    #[arg(long, default_value_t = 5)]
    pub levels: usize,
    /// Minimum number of observed transitions per fit
    #[arg(long, default_value_t = wismc::estimation::DEFAULT_MIN_TRANSITIONS)]
    pub min_transitions: usize,
    /// Master seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest ACF lag in minutes
    #[arg(long, default_value_t = wismc::stats::DEFAULT_TAU_MAX)]
    pub tau_max: usize,
    /// Simulated series per cell; the cell score is their mean MSE
    #[arg(long, default_value_t = 1)]
    pub replicates: usize,
    /// Minutes simulated and discarded before each series
    #[arg(long, default_value_t = 0)]
    pub burn_in: u64,
    /// Output directory for sweep.csv and summary.json
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Return CSV with a `return` column
    #[arg(long)]
    pub returns: PathBuf,
    /// Model JSON
    #[arg(long)]
    pub model: PathBuf,
    /// Master seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest ACF lag in minutes
    #[arg(long, default_value_t = wismc::stats::DEFAULT_TAU_MAX)]
    pub tau_max: usize,
    /// First-passage threshold on the gross return
    #[arg(long, default_value_t = 1.005)]
    pub rho: f64,
    /// Longest first-passage wait in minutes
    #[arg(long, default_value_t = 500)]
    pub max_wait: usize,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of return states (odd)
    #[arg(long, default_value_t = 5)]
    pub states: usize,
    /// Number of index levels
    #[arg(long, default_value_t = 5)]
    pub levels: usize,
    /// Index decay factor in (0, 1]
    #[arg(long, default_value_t = 0.97)]
    pub lambda: f64,
    /// Index memory in sojourns, or `unbounded`
    #[arg(long, default_value = "unbounded")]
    pub memory: wismc::Memory,
    /// Strength of the level dependence (0 = none)
    #[arg(long, default_value_t = 1.0)]
    pub dependence: f64,
    /// Seed for the random kernel
    #[arg(long, default_value_t = 1)]
    pub kernel_seed: u64,
    /// Spacing of representative returns
    #[arg(long, default_value_t = 1e-3)]
    pub return_scale: f64,
    /// Pilot length in minutes used to place the level edges
    #[arg(long, default_value_t = 400_000)]
    pub calibration_minutes: u64,
    /// Output model JSON
    #[arg(long)]
    pub out: PathBuf,
    /// Also write a simulated t,return series here
    #[arg(long, requires = "horizon")]
    pub series_out: Option<PathBuf>,
    /// Length of the simulated series in minutes
    #[arg(long)]
    pub horizon: Option<u64>,
    /// Seed for the simulated series
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn parse(args: Vec<OsString>) -> Result<Cli, i32> {
    let cmd = Cli::command();
    let args = match config::merge(args, &cmd) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return Err(e.exit_code());
        }
    };
    Cli::try_parse_from(args).map_err(|e| match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
            let _ = e.print();
            0
        }
        ErrorKind::InvalidSubcommand => {
            let name = e
                .get(clap::error::ContextKind::InvalidSubcommand)
                .map(|v| v.to_string())
                .unwrap_or_default();
            eprintln!("error: {}", CliError::UnknownSubcommand(name));
            1
        }
        ErrorKind::ArgumentConflict => {
            let _ = e.print();
            eprintln!(
                "error: {}",
                CliError::ConflictingFlags(e.kind().to_string())
            );
            1
        }
        _ => {
            let _ = e.print();
            1
        }
    })
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Ingest(a) => commands::ingest(a),
        Command::Fit(a) => commands::fit(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Analyze(a) => commands::analyze(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Report(a) => commands::report(a),
        Command::Synth(a) => commands::synth(a),
    }
}

fn main() {
    let cli = match parse(std::env::args_os().collect()) {
        Ok(c) => c,
        Err(code) => std::process::exit(code),
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
