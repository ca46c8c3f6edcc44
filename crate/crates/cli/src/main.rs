//! `tvgc`: time-varying Granger causality from search attention to returns.

mod artifacts;
mod commands;
mod error;
mod manifest;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tvgc_core::bootstrap::Scheme;
use tvgc_core::procedures::{Algorithm, Direction};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "tvgc",
    version,
    about = "Time-varying Granger causality tests for attention and returns"
)]
struct Cli {
    /// Worker threads [default: one per core]
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build an aligned dataset from a price file and GSVI segment files
    Ingest(IngestArgs),
    /// ADF and Phillips-Perron unit-root tests on both series
    Stationarity(StationarityArgs),
    /// Statistic sequence, bootstrap critical values and dated episodes
    Test(TestArgs),
    /// Merge statistic and critical-value files for plotting
    PlotData(PlotArgs),
    /// Monte Carlo experiment over a grid of DGPs and test settings
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Daily prices, headered CSV `date,value`
    pub prices: PathBuf,
    /// GSVI download segments, headered CSV `date,value`, in date order
    #[arg(required = true)]
    pub gsvi: Vec<PathBuf>,
    #[arg(long)]
    pub country: String,
    /// Rescale each later segment to the earlier ones on overlapping dates
    #[arg(long)]
    pub rescale_overlap: bool,
    /// Largest tolerated gap between consecutive segments, in days
    #[arg(long, default_value_t = tvgc_core::dataset::DEFAULT_MAX_GAP_DAYS)]
    pub max_gap_days: i64,
    /// Extra metadata, `key=value` (repeatable)
    #[arg(long = "meta", value_parser = parse_key_value)]
    pub meta: Vec<(String, String)>,
    /// Output file [default: aligned_<country>.csv]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StationarityArgs {
    /// Aligned dataset CSV
    pub dataset: PathBuf,
    /// Largest ADF augmentation lag [default: floor(12 (T/100)^(1/4))]
    #[arg(long)]
    pub max_lag: Option<usize>,
    /// Phillips-Perron bandwidth [default: floor(4 (T/100)^(2/9))]
    #[arg(long)]
    pub bandwidth: Option<usize>,
    /// Also write the table as CSV
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    /// Aligned dataset CSV
    pub dataset: PathBuf,
    /// forward, rolling or recursive-evolving
    #[arg(long, default_value = "recursive-evolving", value_parser = parse_algorithm)]
    pub algorithm: Algorithm,
    /// Heteroskedasticity-robust Wald statistic
    #[arg(long)]
    pub robust: bool,
    /// Minimum window, observations
    #[arg(long, default_value_t = tvgc_core::THREE_MONTHS)]
    pub min_window: usize,
    /// Window over which the size is controlled, observations
    #[arg(long, default_value_t = tvgc_core::THREE_MONTHS)]
    pub control_window: usize,
    /// Bootstrap replications
    #[arg(long, default_value_t = tvgc_core::bootstrap::DEFAULT_REPLICATIONS)]
    pub reps: usize,
    /// Nominal size
    #[arg(long, default_value_t = tvgc_core::bootstrap::DEFAULT_SIZE)]
    pub size: f64,
    /// Largest lag order considered by BIC
    #[arg(long, default_value_t = tvgc_core::var::DEFAULT_MAX_LAG)]
    pub max_lag: usize,
    /// Fixed lag order, skipping BIC
    #[arg(long)]
    pub lag: Option<usize>,
    /// iid-residual or wild-rademacher [default: iid-residual, wild-rademacher with --robust]
    #[arg(long, value_parser = parse_scheme)]
    pub scheme: Option<Scheme>,
    /// attention-to-returns or returns-to-attention
    #[arg(long, default_value = "attention-to-returns", value_parser = parse_direction)]
    pub direction: Direction,
    /// Episodes shorter than this many observations are flagged
    #[arg(long, default_value_t = tvgc_core::dating::DEFAULT_MIN_DURATION)]
    pub min_duration: usize,
    #[arg(long, env = "TVGC_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output directory
    #[arg(long, default_value = "tvgc-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Statistic sequence CSV written by `test`
    pub stats: PathBuf,
    /// Critical-value CSV written by `test`
    pub cv: PathBuf,
    /// Output CSV `date,statistic,critical_value`
    #[arg(long, default_value = "plot.csv")]
    pub out: PathBuf,
    /// Also render an SVG chart
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Minimum episode duration for shading, observations
    #[arg(long, default_value_t = tvgc_core::dating::DEFAULT_MIN_DURATION)]
    pub min_duration: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Experiment grid, JSON `{"dgps": [...], "tests": [...]}`
    pub grid: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, env = "TVGC_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Experiment table CSV; the summary goes next to it
    #[arg(long, default_value = "experiment.csv")]
    pub out: PathBuf,
}

fn parse_key_value(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .filter(|(k, _)| !k.is_empty())
        .ok_or_else(|| format!("expected key=value, got `{s}`"))
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    Algorithm::parse(s).ok_or_else(|| format!("unknown algorithm `{s}`"))
}

fn parse_direction(s: &str) -> Result<Direction, String> {
    Direction::parse(s).ok_or_else(|| format!("unknown direction `{s}`"))
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    match s {
        "iid-residual" => Ok(Scheme::IidResidual),
        "wild-rademacher" => Ok(Scheme::WildRademacher),
        _ => Err(format!("unknown scheme `{s}`")),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match cli.command {
        Command::Ingest(a) => commands::ingest(a),
        Command::Stationarity(a) => commands::stationarity(a),
        Command::Test(a) => commands::test(a),
        Command::PlotData(a) => commands::plot_data(a),
        Command::Simulate(a) => commands::simulate(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .format_target(false)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
