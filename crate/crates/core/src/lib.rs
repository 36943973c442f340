//! Vehicle-to-grid economics for individual EV owners.
//!
//! An owner charges at home, drives to work and may sell energy back to the
//! grid while plugged in at work. Given hourly prices, a sampled population
//! of owners and a battery-ageing model, the crate computes each owner's
//! annual savings relative to plain commuting, optimizes a per-owner selling
//! price threshold, and runs population studies over parameter sweeps.

pub mod battery;
pub mod engine;
pub mod montecarlo;
pub mod optimizer;
pub mod population;
pub mod synth;
pub mod timeseries;

pub use battery::{BatteryError, BatteryParams, BatteryState, DegradationParams};
pub use engine::{annual_savings, simulate_year, AnnualResult, EngineError, Mode, ScenarioConfig, SlotState, YearPlan};
pub use montecarlo::{Aggregates, CostProjection, StudyConfig, StudyContext, StudyError, StudyResult};
pub use optimizer::{optimize_osp, EvaluationRecord, OptimizationResult, OptimizerConfig, OptimizerError};
pub use population::{FeasibilityRules, PopulationError, PopulationSampler, UserProfile};
pub use timeseries::{PriceSeries, TimeseriesError, WorkCalendar};

use thiserror::Error;

/// Any error the library can return.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Timeseries(#[from] TimeseriesError),
    #[error(transparent)]
    Population(#[from] PopulationError),
    #[error(transparent)]
    Battery(#[from] BatteryError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error(transparent)]
    Study(#[from] StudyError),
}
