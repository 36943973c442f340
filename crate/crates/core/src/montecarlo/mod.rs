//! Population studies: savings distributions, efficiency/rate sweeps and
//! battery-cost scenarios.
//!
//! Every study evaluates a fixed list of users, so the same people appear in
//! every scenario arm and sweep cell. Users run in parallel; results are
//! collected and reduced in user order so outputs do not depend on thread
//! scheduling.

mod cost;

pub use cost::{fit_battery_cost, load_cost_history, CostProjection};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{AnnualResult, EngineError, Mode, ScenarioConfig, YearPlan};
use crate::optimizer::{optimize_plan, EvaluationRecord, OptimizerConfig, OptimizerError};
use crate::population::{user_seeds, PopulationError, PopulationSampler, UserProfile};
use crate::timeseries::{quantile, PriceSeries, WorkCalendar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StudyError {
    #[error("invalid study config: {0}")]
    InvalidConfig(String),
    #[error("cost history needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("cost {cost} for {year} is not positive")]
    NonPositiveCost { year: i32, cost: f64 },
    #[error("cost history line {line}: {reason}")]
    MalformedHistory { line: usize, reason: String },
    #[error("user {user_id}: {source}")]
    User { user_id: usize, source: Box<StudyError> },
    #[error(transparent)]
    Population(#[from] PopulationError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
}

/// What a study evaluates and on whom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub population_size: usize,
    pub scenarios: Vec<Mode>,
    pub master_seed: u64,
}

impl StudyConfig {
    pub fn validate(&self) -> Result<(), StudyError> {
        if self.population_size == 0 {
            return Err(StudyError::InvalidConfig("population_size must be at least 1".into()));
        }
        if self.scenarios.is_empty() {
            return Err(StudyError::InvalidConfig("no scenarios".into()));
        }
        Ok(())
    }
}

/// Shared, read-only inputs of a study.
#[derive(Debug, Clone, Copy)]
pub struct StudyContext<'a> {
    pub prices: &'a PriceSeries,
    pub calendar: &'a WorkCalendar,
    /// Battery, degradation, year and reserve; the mode is set per scenario.
    pub template: ScenarioConfig,
    pub optimizer: OptimizerConfig,
}

/// One user in one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserOutcome {
    pub user_id: usize,
    pub result: AnnualResult,
    pub savings: f64,
    /// Optimizer evaluations; empty outside OSP.
    pub trace: Vec<EvaluationRecord>,
    pub degenerate: bool,
}

/// Summary statistics of a savings sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub n: usize,
    pub mean: f64,
    pub min: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub max: f64,
}

impl Aggregates {
    /// Mean summed in slice order; quartiles by linear interpolation.
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let q = |p| quantile(values, p).unwrap();
        Some(Self {
            n: values.len(),
            mean: values.iter().sum::<f64>() / values.len() as f64,
            min: q(0.0),
            q25: q(0.25),
            q50: q(0.5),
            q75: q(0.75),
            max: q(1.0),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavingsDistribution {
    pub mode: Mode,
    pub rows: Vec<UserOutcome>,
    pub aggregates: Aggregates,
}

impl SavingsDistribution {
    fn from_rows(mode: Mode, rows: Vec<UserOutcome>) -> Self {
        let savings: Vec<f64> = rows.iter().map(|r| r.savings).collect();
        let aggregates = Aggregates::from_values(&savings).expect("study populations are nonempty");
        Self { mode, rows, aggregates }
    }

    pub fn savings(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.savings).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub users: Vec<UserProfile>,
    /// Commute-only result of each user.
    pub baselines: Vec<AnnualResult>,
    pub distributions: Vec<SavingsDistribution>,
}

impl StudyResult {
    pub fn distribution(&self, mode: Mode) -> Option<&SavingsDistribution> {
        self.distributions.iter().find(|d| d.mode == mode)
    }
}

/// Draws the study population: user `i` is sampled from the `i`-th seed of
/// the master seed's stream.
pub fn sample_users(sampler: &PopulationSampler<'_>, population_size: usize, master_seed: u64) -> Result<Vec<UserProfile>, StudyError> {
    if population_size == 0 {
        return Err(PopulationError::EmptyPopulation.into());
    }
    Ok(user_seeds(population_size, master_seed).into_par_iter().map(|s| sampler.sample(s)).collect::<Result<Vec<_>, _>>()?)
}

/// Each user's optimizer seed, derived from the configured seed and the user's own.
fn optimizer_for(base: &OptimizerConfig, profile: &UserProfile) -> OptimizerConfig {
    OptimizerConfig { seed: base.seed ^ profile.rng_seed, ..*base }
}

fn tag(user_id: usize) -> impl Fn(StudyError) -> StudyError {
    move |e| StudyError::User { user_id, source: Box::new(e) }
}

/// Evaluates one user in `mode` against a precomputed commute-only baseline.
fn evaluate(plan: &YearPlan, profile: &UserProfile, ctx: &StudyContext<'_>, mode: Mode, baseline_net: f64, user_id: usize) -> Result<UserOutcome, StudyError> {
    let (result, trace, degenerate) = match mode {
        Mode::Osp => {
            let opt = optimize_plan(plan, &ctx.template, &optimizer_for(&ctx.optimizer, profile))?;
            let result = plan.run(&ctx.template.with_selling_price(opt.p_star))?;
            (result, opt.trace, opt.degenerate)
        }
        other => (plan.run(&ctx.template.with_mode(other))?, Vec::new(), false),
    };
    Ok(UserOutcome { user_id, savings: result.net - baseline_net, result, trace, degenerate })
}

/// Evaluates every scenario on the given users (paired design).
pub fn run_population_study(ctx: &StudyContext<'_>, users: &[UserProfile], scenarios: &[Mode]) -> Result<StudyResult, StudyError> {
    if users.is_empty() {
        return Err(PopulationError::EmptyPopulation.into());
    }
    if scenarios.is_empty() {
        return Err(StudyError::InvalidConfig("no scenarios".into()));
    }
    let per_user: Vec<(AnnualResult, Vec<UserOutcome>)> = users
        .par_iter()
        .enumerate()
        .map(|(id, profile)| {
            let run = || -> Result<_, StudyError> {
                let plan = YearPlan::new(profile, ctx.prices, ctx.calendar)?;
                let baseline = plan.run(&ctx.template.with_mode(Mode::CommuteOnly))?;
                let outcomes = scenarios.iter().map(|&m| evaluate(&plan, profile, ctx, m, baseline.net, id)).collect::<Result<Vec<_>, _>>()?;
                Ok((baseline, outcomes))
            };
            run().map_err(tag(id))
        })
        .collect::<Result<_, _>>()?;

    let baselines: Vec<AnnualResult> = per_user.iter().map(|(b, _)| *b).collect();
    let mut columns: Vec<Vec<UserOutcome>> = vec![Vec::with_capacity(users.len()); scenarios.len()];
    for (_, outcomes) in per_user {
        for (col, o) in columns.iter_mut().zip(outcomes) {
            col.push(o);
        }
    }
    let distributions = scenarios.iter().zip(columns).map(|(&m, rows)| SavingsDistribution::from_rows(m, rows)).collect();
    Ok(StudyResult { users: users.to_vec(), baselines, distributions })
}

/// Samples the population described by `config` and runs the study on it.
pub fn run_study(ctx: &StudyContext<'_>, sampler: &PopulationSampler<'_>, config: &StudyConfig) -> Result<StudyResult, StudyError> {
    config.validate()?;
    let users = sample_users(sampler, config.population_size, config.master_seed)?;
    run_population_study(ctx, &users, &config.scenarios)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub eta: f64,
    pub rate_kw: f64,
    pub aggregates: Aggregates,
}

/// Savings of `mode` for every `(eta, rate)` pair, rates applied to both
/// charging and discharging. Cells are in eta-major order.
pub fn sweep_efficiency_rate(
    ctx: &StudyContext<'_>,
    users: &[UserProfile],
    mode: Mode,
    etas: &[f64],
    rates_kw: &[f64],
) -> Result<Vec<SweepCell>, StudyError> {
    if let Some(eta) = etas.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
        return Err(StudyError::InvalidConfig(format!("efficiency {eta} outside (0, 1]")));
    }
    if let Some(r) = rates_kw.iter().find(|r| !(**r > 0.0)) {
        return Err(StudyError::InvalidConfig(format!("rate {r} kW must be positive")));
    }
    let mut cells = Vec::with_capacity(etas.len() * rates_kw.len());
    for &eta in etas {
        for &rate_kw in rates_kw {
            let battery = crate::battery::BatteryParams { one_way_efficiency: eta, charge_rate_kw: rate_kw, discharge_rate_kw: rate_kw, ..ctx.template.battery };
            let cell_ctx = StudyContext { template: ScenarioConfig { battery, ..ctx.template }, ..*ctx };
            let study = run_population_study(&cell_ctx, users, &[mode])?;
            cells.push(SweepCell { eta, rate_kw, aggregates: study.distributions[0].aggregates });
        }
    }
    Ok(cells)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostStudyRow {
    pub year: i32,
    pub c_b: f64,
    pub aggregates: Aggregates,
}

/// OSP savings with each projected year's battery cost, prices and users held
/// fixed. The selling price is re-optimized for every year.
pub fn battery_cost_study(
    ctx: &StudyContext<'_>,
    users: &[UserProfile],
    projection: &CostProjection,
    from: i32,
    to: i32,
) -> Result<Vec<CostStudyRow>, StudyError> {
    if from > to {
        return Err(StudyError::InvalidConfig(format!("year range {from}..={to} is empty")));
    }
    projection
        .project(from, to)
        .into_iter()
        .map(|(year, c_b)| {
            let battery = crate::battery::BatteryParams { capital_cost_usd_per_kwh: c_b, ..ctx.template.battery };
            let year_ctx = StudyContext { template: ScenarioConfig { battery, ..ctx.template }, ..*ctx };
            let study = run_population_study(&year_ctx, users, &[Mode::Osp])?;
            Ok(CostStudyRow { year, c_b, aggregates: study.distributions[0].aggregates })
        })
        .collect()
}
