//! Per-user search for the selling price that maximizes annual net profit.
//!
//! [`maximize`] runs a small Bayesian optimization on any scalar objective
//! over an interval; [`grid_search`] evaluates the same objective
//! exhaustively and serves as a reference.

mod gp;

pub use gp::{expected_improvement, kernel, median_pairwise_distance, GaussianProcess};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{EngineError, ScenarioConfig, YearPlan};
use crate::population::UserProfile;
use crate::timeseries::{quantile, PriceSeries, WorkCalendar};

const MIN_LENGTH_SCALE: f64 = 1e-3;
/// EI below this (in standardized units) counts as no expected gain.
const EI_EPSILON: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizerError {
    #[error("invalid optimizer config: {0}")]
    InvalidConfig(String),
    #[error("objective is not finite at p = {p}")]
    NonFiniteObjective { p: f64 },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Placement of the initial evaluations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitDesign {
    /// One uniformly jittered point in each of `n_init` equal strata.
    #[default]
    Stratified,
    /// Evenly spaced, both ends included.
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub p_min: f64,
    /// Upper bound in $/kWh; `None` uses the 99th percentile of the year's prices.
    pub p_max: Option<f64>,
    pub n_init: usize,
    pub n_iter: usize,
    pub noise_floor: f64,
    pub seed: u64,
    pub n_candidates: usize,
    pub init_design: InitDesign,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { p_min: 0.0, p_max: None, n_init: 6, n_iter: 24, noise_floor: 1e-6, seed: 0, n_candidates: 1000, init_design: InitDesign::Stratified }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), OptimizerError> {
        let bad = |m: String| Err(OptimizerError::InvalidConfig(m));
        if !self.p_min.is_finite() {
            return bad(format!("p_min {} must be finite", self.p_min));
        }
        if let Some(p_max) = self.p_max {
            if !(p_max > self.p_min && p_max.is_finite()) {
                return bad(format!("p_max {p_max} must exceed p_min {}", self.p_min));
            }
        }
        if self.n_init < 2 {
            return bad(format!("n_init {} must be at least 2", self.n_init));
        }
        if !(self.noise_floor >= 0.0) {
            return bad("noise_floor must be nonnegative".into());
        }
        if self.n_candidates < 2 {
            return bad("n_candidates must be at least 2".into());
        }
        Ok(())
    }

    /// Search interval for a year with the given hourly prices.
    pub fn bounds(&self, prices: &[f64]) -> Result<(f64, f64), OptimizerError> {
        self.validate()?;
        let p_max = match self.p_max {
            Some(p) => p,
            None => quantile(prices, 0.99).map_err(|e| OptimizerError::InvalidConfig(e.to_string()))?,
        };
        if !(p_max > self.p_min) {
            return Err(OptimizerError::InvalidConfig(format!("p_max {p_max} must exceed p_min {}", self.p_min)));
        }
        Ok((self.p_min, p_max))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub iteration: usize,
    pub p: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub p_star: f64,
    pub n_star: f64,
    pub trace: Vec<EvaluationRecord>,
    /// Every evaluation returned the same value; `p_star` is the interval midpoint.
    pub degenerate: bool,
}

/// Maximizes `objective` over `[p_min, p_max]`.
///
/// A GP surrogate on p scaled to `[0, 1]` with standardized targets picks
/// each new point by expected improvement over an even candidate grid.
/// When no candidate promises any gain the midpoint of the widest
/// unexplored gap is tried instead.
pub fn maximize<E, F>(mut objective: F, p_min: f64, p_max: f64, config: &OptimizerConfig) -> Result<OptimizationResult, E>
where
    F: FnMut(f64) -> Result<f64, E>,
    E: From<OptimizerError>,
{
    config.validate()?;
    if !(p_max > p_min) {
        return Err(OptimizerError::InvalidConfig(format!("p_max {p_max} must exceed p_min {p_min}")).into());
    }
    let span = p_max - p_min;
    let to_p = |u: f64| p_min + u * span;

    let mut us: Vec<f64> = match config.init_design {
        InitDesign::Grid => (0..config.n_init).map(|i| i as f64 / (config.n_init - 1) as f64).collect(),
        InitDesign::Stratified => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            (0..config.n_init).map(|i| (i as f64 + rng.random::<f64>()) / config.n_init as f64).collect()
        }
    };
    let mut trace = Vec::with_capacity(config.n_init + config.n_iter);
    let mut eval = |iteration: usize, u: f64, trace: &mut Vec<EvaluationRecord>| -> Result<f64, E> {
        let p = match config.init_design {
            InitDesign::Grid if iteration < config.n_init => grid_point(p_min, span / (config.n_init - 1) as f64, iteration),
            _ => to_p(u),
        };
        let y = objective(p)?;
        if !y.is_finite() {
            return Err(OptimizerError::NonFiniteObjective { p }.into());
        }
        trace.push(EvaluationRecord { iteration, p, objective: y });
        Ok(y)
    };
    let mut ys = Vec::with_capacity(us.len());
    for (i, &u) in us.iter().enumerate() {
        ys.push(eval(i, u, &mut trace)?);
    }

    let candidates: Vec<f64> = (0..config.n_candidates).map(|i| i as f64 / (config.n_candidates - 1) as f64).collect();
    for iteration in config.n_init..config.n_init + config.n_iter {
        let u = next_point(&us, &ys, &candidates, config.noise_floor);
        let y = eval(iteration, u, &mut trace)?;
        us.push(u);
        ys.push(y);
    }

    let best = best_of(&trace);
    let lo = trace.iter().map(|r| r.objective).fold(f64::INFINITY, f64::min);
    let degenerate = lo == best.objective;
    Ok(OptimizationResult {
        p_star: if degenerate { p_min + 0.5 * span } else { best.p },
        n_star: best.objective,
        trace,
        degenerate,
    })
}

fn grid_point(p_min: f64, step: f64, i: usize) -> f64 {
    p_min + i as f64 * step
}

/// Highest objective, ties to the smaller p.
fn best_of(trace: &[EvaluationRecord]) -> EvaluationRecord {
    let mut best = trace[0];
    for r in &trace[1..] {
        if r.objective > best.objective || (r.objective == best.objective && r.p < best.p) {
            best = *r;
        }
    }
    best
}

fn next_point(us: &[f64], ys: &[f64], candidates: &[f64], noise: f64) -> f64 {
    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;
    let sd = (ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n).sqrt();
    if sd > 0.0 {
        let z: Vec<f64> = ys.iter().map(|y| (y - mean) / sd).collect();
        let best = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let ell = median_pairwise_distance(us, MIN_LENGTH_SCALE);
        if let Some(gp) = GaussianProcess::fit(us, &z, ell, noise) {
            let mut pick = None;
            let mut top = EI_EPSILON;
            for &c in candidates {
                if us.iter().any(|&u| (u - c).abs() < 1e-12) {
                    continue;
                }
                let (m, s) = gp.predict(c);
                let ei = expected_improvement(m, s, best);
                if ei > top {
                    top = ei;
                    pick = Some(c);
                }
            }
            if let Some(c) = pick {
                return c;
            }
        }
    }
    widest_gap_midpoint(us)
}

fn widest_gap_midpoint(us: &[f64]) -> f64 {
    let mut pts: Vec<f64> = us.iter().cloned().chain([0.0, 1.0]).collect();
    pts.sort_by(f64::total_cmp);
    let (a, b) = pts.windows(2).map(|w| (w[0], w[1])).fold((0.0, 0.0), |acc, (a, b)| if b - a > acc.1 - acc.0 { (a, b) } else { acc });
    0.5 * (a + b)
}

/// Evaluates `objective` at `p_min + i * resolution` for every such point up
/// to `p_max`; returns the best `(p, objective)`, ties to the smaller p.
pub fn grid_search<E, F>(mut objective: F, p_min: f64, p_max: f64, resolution: f64) -> Result<(f64, f64), E>
where
    F: FnMut(f64) -> Result<f64, E>,
    E: From<OptimizerError>,
{
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(OptimizerError::InvalidConfig(format!("resolution {resolution} must be positive")).into());
    }
    if !(p_max >= p_min) {
        return Err(OptimizerError::InvalidConfig(format!("p_max {p_max} is below p_min {p_min}")).into());
    }
    let steps = ((p_max - p_min) / resolution + 1e-9).floor() as usize;
    let mut best = (p_min, f64::NEG_INFINITY);
    for i in 0..=steps {
        let p = grid_point(p_min, resolution, i);
        let y = objective(p)?;
        if !y.is_finite() {
            return Err(OptimizerError::NonFiniteObjective { p }.into());
        }
        if y > best.1 {
            best = (p, y);
        }
    }
    Ok(best)
}

/// Optimal selling price of a prepared user-year. The template's mode is
/// replaced by OSP at each candidate price.
pub fn optimize_plan(plan: &YearPlan, template: &ScenarioConfig, config: &OptimizerConfig) -> Result<OptimizationResult, OptimizerError> {
    let (lo, hi) = config.bounds(plan.prices())?;
    maximize(|p| Ok::<_, OptimizerError>(plan.run(&template.with_selling_price(p))?.net), lo, hi, config)
}

pub fn optimize_osp(
    profile: &UserProfile,
    prices: &PriceSeries,
    calendar: &WorkCalendar,
    template: &ScenarioConfig,
    config: &OptimizerConfig,
) -> Result<OptimizationResult, OptimizerError> {
    optimize_plan(&YearPlan::new(profile, prices, calendar)?, template, config)
}

/// Grid oracle over the same bounds `config` would search.
pub fn grid_search_plan(plan: &YearPlan, template: &ScenarioConfig, config: &OptimizerConfig, resolution: f64) -> Result<(f64, f64), OptimizerError> {
    let (lo, hi) = config.bounds(plan.prices())?;
    grid_search(|p| Ok::<_, OptimizerError>(plan.run(&template.with_selling_price(p))?.net), lo, hi, resolution)
}

pub fn grid_search_osp(
    profile: &UserProfile,
    prices: &PriceSeries,
    calendar: &WorkCalendar,
    template: &ScenarioConfig,
    config: &OptimizerConfig,
    resolution: f64,
) -> Result<(f64, f64), OptimizerError> {
    grid_search_plan(&YearPlan::new(profile, prices, calendar)?, template, config, resolution)
}
