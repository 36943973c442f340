//! Command-line front end for the `v2g_core` studies.
//!
//! Every command reads a TOML run configuration (see [`config::RunConfig`]),
//! loads the data bundle it names and writes tidy CSV/JSON tables.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;
use v2g_core::engine::Mode;
use v2g_core::population::PopulationError;
use v2g_core::{EngineError, Error as CoreError, OptimizerError, StudyError};

/// Process exit status for each failure class.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("infeasible population: {0}")]
    Infeasible(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Infeasible(_) => 4,
            CliError::Io(_) | CliError::Runtime(_) => 1,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let msg = e.to_string();
        match e {
            CoreError::Timeseries(_) => CliError::Data(msg),
            CoreError::Population(p) => population(p, msg),
            CoreError::Battery(_) => CliError::Config(msg),
            CoreError::Engine(en) => engine(&en, msg),
            CoreError::Optimizer(o) => optimizer(&o, msg),
            CoreError::Study(s) => study(&s, msg),
        }
    }
}

fn population(e: PopulationError, msg: String) -> CliError {
    match e {
        PopulationError::InfeasiblePopulation { .. } => CliError::Infeasible(msg),
        PopulationError::InvalidDod(_) | PopulationError::EmptyPopulation => CliError::Config(msg),
        _ => CliError::Data(msg),
    }
}

fn engine(e: &EngineError, msg: String) -> CliError {
    match e {
        EngineError::PriceSeriesTooShort { .. } | EngineError::YearMismatch { .. } => CliError::Data(msg),
        EngineError::DayDoesNotClose { .. } | EngineError::UnrechargeableSchedule { .. } => CliError::Infeasible(msg),
        EngineError::InvalidScenario(_) | EngineError::Battery(_) => CliError::Config(msg),
        EngineError::SocOutOfBounds { .. } => CliError::Runtime(msg),
    }
}

fn optimizer(e: &OptimizerError, msg: String) -> CliError {
    match e {
        OptimizerError::InvalidConfig(_) => CliError::Config(msg),
        OptimizerError::Engine(en) => engine(en, msg),
        OptimizerError::NonFiniteObjective { .. } => CliError::Runtime(msg),
    }
}

fn study(e: &StudyError, msg: String) -> CliError {
    match e {
        StudyError::User { source, .. } => study(source, msg),
        StudyError::InvalidConfig(_) => CliError::Config(msg),
        StudyError::TooFewPoints(_) | StudyError::NonPositiveCost { .. } | StudyError::MalformedHistory { .. } => CliError::Data(msg),
        StudyError::Population(p) => population(p.clone(), msg),
        StudyError::Engine(en) => engine(en, msg),
        StudyError::Optimizer(o) => optimizer(o, msg),
    }
}

macro_rules! via_core {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CoreError::from(e).into()
            }
        }
    )*};
}
via_core!(v2g_core::TimeseriesError, PopulationError, v2g_core::BatteryError, EngineError, OptimizerError, StudyError);

#[derive(Debug, Parser)]
#[command(name = "v2g", version, about = "Vehicle-to-grid savings simulator")]
pub struct Cli {
    /// Worker threads; defaults to the number of available cores.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    /// Log verbosity (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one user-year and print its result row.
    Simulate(SimulateArgs),
    /// Savings distribution of every configured scenario over a sampled population.
    Study(StudyArgs),
    /// Mean savings over the efficiency by charging-rate grid.
    Sweep(StudyArgs),
    /// OSP savings under projected battery costs.
    CostStudy(StudyArgs),
    /// Savitzky-Golay smoothing of a price file.
    Smooth(SmoothArgs),
    /// Write the bundled synthetic data set.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Run configuration file.
    #[arg(long, short)]
    pub config: PathBuf,
    /// Seed of the simulated user; defaults to user 0 of the study's master seed.
    #[arg(long)]
    pub user_seed: Option<u64>,
    #[arg(long, default_value = "osp", value_parser = parse_mode)]
    pub mode: Mode,
    /// Selling price in $/kWh for OSP; optimized per user when absent.
    #[arg(long)]
    pub p: Option<f64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    /// Run configuration file.
    #[arg(long, short)]
    pub config: PathBuf,
    /// Population size; overrides the config.
    #[arg(long, short = 'm')]
    pub population: Option<usize>,
    /// Output directory; overrides the config.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Edges {
    /// Least-squares polynomial of the outermost full window.
    Fit,
    /// Mirror-pad the series about its end samples.
    Mirror,
}

#[derive(Debug, Args)]
pub struct SmoothArgs {
    /// `timestamp,price_usd_per_kwh` file.
    pub prices: PathBuf,
    /// Odd window length in hours.
    #[arg(long, default_value_t = 11)]
    pub window: usize,
    /// Polynomial order, below the window length.
    #[arg(long, default_value_t = 3)]
    pub order: usize,
    #[arg(long, value_enum, default_value_t = Edges::Fit)]
    pub edges: Edges,
    /// Directory for `<stem>_smoothed.csv`; defaults to the input's directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 2019)]
    pub year: i32,
    #[arg(long, default_value_t = 2019)]
    pub seed: u64,
    /// Rows in the commute table.
    #[arg(long, default_value_t = 400)]
    pub commute_rows: usize,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

/// Runs a parsed command line inside a thread pool of the requested size.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Runtime(e.to_string()))?;
    pool.install(|| match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Study(a) => commands::study(&a),
        Command::Sweep(a) => commands::sweep(&a),
        Command::CostStudy(a) => commands::cost_study(&a),
        Command::Smooth(a) => commands::smooth(&a),
        Command::Synth(a) => commands::synth(&a),
    })
}
