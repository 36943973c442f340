//! Synthetic EV owners drawn from empirical commute, work-schedule and
//! vehicle-sales tables.
//!
//! Each [`UserProfile`] is one realization of the random inputs: commute
//! distance and time (drawn jointly), work start and weekly hours (drawn
//! independently), vacation length and placement, and the EV model.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Working days per week used to turn weekly hours into a daily shift.
pub const WORKDAYS_PER_WEEK: f64 = 5.0;
/// Draws per user before the sampler gives up on finding a feasible profile.
pub const MAX_SAMPLING_ATTEMPTS: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PopulationError {
    #[error("line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("line {line}: negative weight {weight}")]
    NegativeWeight { line: usize, weight: f64 },
    #[error("{0} has no record with positive weight")]
    EmptyDistribution(&'static str),
    #[error("depth of discharge {0} must be in (0, 1]")]
    InvalidDod(f64),
    #[error("no feasible user after {attempts} draws (seed {seed})")]
    InfeasiblePopulation { attempts: usize, seed: u64 },
    #[error("population size must be at least 1")]
    EmptyPopulation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommuteRecord {
    pub distance_miles: f64,
    pub duration_hours: f64,
    pub weight: f64,
}

/// Joint empirical distribution of one-way commute distance and duration.
#[derive(Debug, Clone, PartialEq)]
pub struct CommuteDistribution {
    records: Vec<CommuteRecord>,
}

impl CommuteDistribution {
    pub fn new(records: Vec<CommuteRecord>) -> Result<Self, PopulationError> {
        for (i, r) in records.iter().enumerate() {
            check_weight(r.weight, i + 2)?;
            if !(r.distance_miles >= 0.0 && r.duration_hours >= 0.0) || !r.distance_miles.is_finite() || !r.duration_hours.is_finite() {
                return Err(PopulationError::MalformedRow { line: i + 2, reason: "distance and duration must be nonnegative".into() });
            }
        }
        if !records.iter().any(|r| r.weight > 0.0) {
            return Err(PopulationError::EmptyDistribution("commute distribution"));
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[CommuteRecord] {
        &self.records
    }

    pub fn total_weight(&self) -> f64 {
        self.records.iter().map(|r| r.weight).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrivalRecord {
    pub arrival_hour: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeeklyHoursRecord {
    pub hours_per_week: f64,
    pub weight: f64,
}

/// Independent empirical marginals of work arrival hour and weekly hours.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkDistribution {
    arrivals: Vec<ArrivalRecord>,
    weekly_hours: Vec<WeeklyHoursRecord>,
}

impl WorkDistribution {
    pub fn new(arrivals: Vec<ArrivalRecord>, weekly_hours: Vec<WeeklyHoursRecord>) -> Result<Self, PopulationError> {
        for (i, r) in arrivals.iter().enumerate() {
            check_weight(r.weight, i + 2)?;
            if !(0.0..24.0).contains(&r.arrival_hour) {
                return Err(PopulationError::MalformedRow { line: i + 2, reason: format!("arrival hour {} outside [0, 24)", r.arrival_hour) });
            }
        }
        for (i, r) in weekly_hours.iter().enumerate() {
            check_weight(r.weight, i + 2)?;
            if !(r.hours_per_week > 0.0 && r.hours_per_week <= 168.0) {
                return Err(PopulationError::MalformedRow { line: i + 2, reason: format!("weekly hours {} outside (0, 168]", r.hours_per_week) });
            }
        }
        if !arrivals.iter().any(|r| r.weight > 0.0) {
            return Err(PopulationError::EmptyDistribution("work arrival distribution"));
        }
        if !weekly_hours.iter().any(|r| r.weight > 0.0) {
            return Err(PopulationError::EmptyDistribution("weekly hours distribution"));
        }
        Ok(Self { arrivals, weekly_hours })
    }

    pub fn arrivals(&self) -> &[ArrivalRecord] {
        &self.arrivals
    }

    pub fn weekly_hours(&self) -> &[WeeklyHoursRecord] {
        &self.weekly_hours
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvModel {
    pub name: String,
    pub capacity_kwh: f64,
    pub range_miles: f64,
    pub sales_weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvCatalog {
    models: Vec<EvModel>,
}

impl EvCatalog {
    pub fn new(models: Vec<EvModel>) -> Result<Self, PopulationError> {
        for (i, m) in models.iter().enumerate() {
            check_weight(m.sales_weight, i + 2)?;
            if !(m.capacity_kwh > 0.0 && m.range_miles > 0.0) {
                return Err(PopulationError::MalformedRow { line: i + 2, reason: format!("{}: capacity and range must be positive", m.name) });
            }
        }
        if !models.iter().any(|m| m.sales_weight > 0.0) {
            return Err(PopulationError::EmptyDistribution("EV catalog"));
        }
        Ok(Self { models })
    }

    pub fn models(&self) -> &[EvModel] {
        &self.models
    }
}

fn check_weight(weight: f64, line: usize) -> Result<(), PopulationError> {
    if weight.is_nan() || weight.is_infinite() {
        return Err(PopulationError::MalformedRow { line, reason: "weight is not finite".into() });
    }
    if weight < 0.0 {
        return Err(PopulationError::NegativeWeight { line, weight });
    }
    Ok(())
}

fn read_rows<T: for<'de> Deserialize<'de>>(content: &[u8], header: &[&str]) -> Result<Vec<T>, PopulationError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(content);
    let found = reader.headers().map_err(|e| PopulationError::MalformedRow { line: 1, reason: e.to_string() })?;
    if found.iter().ne(header.iter().copied()) {
        return Err(PopulationError::MalformedRow { line: 1, reason: format!("expected header `{}`", header.join(",")) });
    }
    reader
        .deserialize()
        .map(|row| {
            row.map_err(|e: csv::Error| PopulationError::MalformedRow {
                line: e.position().map(|p| p.line() as usize).unwrap_or(0),
                reason: e.to_string(),
            })
        })
        .collect()
}

/// `distance_miles,duration_hours,weight`
pub fn load_commute_distribution(content: &[u8]) -> Result<CommuteDistribution, PopulationError> {
    CommuteDistribution::new(read_rows(content, &["distance_miles", "duration_hours", "weight"])?)
}

/// `arrival_hour,weight` and `hours_per_week,weight`
pub fn load_work_distribution(arrivals: &[u8], weekly_hours: &[u8]) -> Result<WorkDistribution, PopulationError> {
    WorkDistribution::new(
        read_rows(arrivals, &["arrival_hour", "weight"])?,
        read_rows(weekly_hours, &["hours_per_week", "weight"])?,
    )
}

/// `name,capacity_kwh,range_miles,sales_weight`
pub fn load_ev_catalog(content: &[u8]) -> Result<EvCatalog, PopulationError> {
    EvCatalog::new(read_rows(content, &["name", "capacity_kwh", "range_miles", "sales_weight"])?)
}

/// Constraints a sampled user must satisfy to be simulated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityRules {
    pub dod: f64,
    /// Slowest battery-side charge rate (kW) any scenario will use. When set,
    /// the home window between shifts must restore a full round trip.
    pub min_charge_rate_kw: Option<f64>,
}

impl FeasibilityRules {
    pub fn trip_only(dod: f64) -> Self {
        Self { dod, min_charge_rate_kw: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Infeasibility {
    DayDoesNotClose,
    TripExceedsUsableCapacity,
    HomeWindowTooShort,
    VacationOutOfRange,
}

/// One sampled EV owner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub rng_seed: u64,
    /// One-way, miles.
    pub commute_distance_miles: f64,
    /// One-way, hours.
    pub commute_time_hours: f64,
    /// Hour of day the shift starts.
    pub work_start_hour: u32,
    pub weekly_hours: f64,
    pub vacation_weeks: u32,
    /// Index of the Monday (0-based, counted from the first Monday of the
    /// year) on which the vacation starts.
    pub vacation_start_week: u32,
    pub ev_model: String,
    pub ev_capacity_kwh: f64,
    pub ev_range_miles: f64,
}

impl UserProfile {
    /// Shift length on the hourly grid: weekly hours over five days, rounded, at least one hour.
    pub fn daily_work_hours(&self) -> u32 {
        ((self.weekly_hours / WORKDAYS_PER_WEEK).round() as u32).max(1)
    }

    /// Hourly slots per commute leg. The duration is rounded to the nearest
    /// quarter hour and then occupies whole slots; a leg with positive
    /// distance always takes at least one slot.
    pub fn commute_slots(&self) -> u32 {
        let quarter = (self.commute_time_hours * 4.0).round() / 4.0;
        let slots = quarter.ceil() as u32;
        if slots == 0 && self.commute_distance_miles > 0.0 {
            1
        } else {
            slots
        }
    }

    /// Battery-side energy of one commute leg, kWh.
    pub fn commute_energy_kwh(&self) -> f64 {
        self.commute_distance_miles * self.ev_capacity_kwh / self.ev_range_miles
    }

    /// Hours from shift start back to the next departure, outbound commute to inbound commute inclusive.
    pub fn duty_span_hours(&self) -> u32 {
        self.daily_work_hours() + 2 * self.commute_slots()
    }

    /// Hours at home between two consecutive working days.
    pub fn home_hours(&self) -> u32 {
        24u32.saturating_sub(self.duty_span_hours())
    }

    pub fn check(&self, rules: &FeasibilityRules) -> Result<(), Infeasibility> {
        if self.duty_span_hours() > 24 {
            return Err(Infeasibility::DayDoesNotClose);
        }
        let round_trip = 2.0 * self.commute_energy_kwh();
        if round_trip > rules.dod * self.ev_capacity_kwh * (1.0 + 1e-12) {
            return Err(Infeasibility::TripExceedsUsableCapacity);
        }
        if let Some(rate) = rules.min_charge_rate_kw {
            if (self.home_hours() as f64) * rate < round_trip * (1.0 - 1e-12) {
                return Err(Infeasibility::HomeWindowTooShort);
            }
        }
        if !(1..=3).contains(&self.vacation_weeks) || self.vacation_start_week + self.vacation_weeks > 52 {
            return Err(Infeasibility::VacationOutOfRange);
        }
        Ok(())
    }
}

/// Reusable weighted samplers over the three input tables.
#[derive(Debug, Clone)]
pub struct PopulationSampler<'a> {
    commute: &'a CommuteDistribution,
    work: &'a WorkDistribution,
    catalog: &'a EvCatalog,
    rules: FeasibilityRules,
    commute_index: WeightedIndex<f64>,
    arrival_index: WeightedIndex<f64>,
    hours_index: WeightedIndex<f64>,
    ev_index: WeightedIndex<f64>,
}

impl<'a> PopulationSampler<'a> {
    pub fn new(
        commute: &'a CommuteDistribution,
        work: &'a WorkDistribution,
        catalog: &'a EvCatalog,
        rules: FeasibilityRules,
    ) -> Result<Self, PopulationError> {
        if !(rules.dod > 0.0 && rules.dod <= 1.0) {
            return Err(PopulationError::InvalidDod(rules.dod));
        }
        let index = |w: Vec<f64>, what| WeightedIndex::new(w).map_err(|_| PopulationError::EmptyDistribution(what));
        Ok(Self {
            commute_index: index(commute.records.iter().map(|r| r.weight).collect(), "commute distribution")?,
            arrival_index: index(work.arrivals.iter().map(|r| r.weight).collect(), "work arrival distribution")?,
            hours_index: index(work.weekly_hours.iter().map(|r| r.weight).collect(), "weekly hours distribution")?,
            ev_index: index(catalog.models.iter().map(|m| m.sales_weight).collect(), "EV catalog")?,
            commute,
            work,
            catalog,
            rules,
        })
    }

    /// Draws one feasible user, rejecting and redrawing infeasible combinations.
    pub fn sample(&self, seed: u64) -> Result<UserProfile, PopulationError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..MAX_SAMPLING_ATTEMPTS {
            let profile = self.draw(&mut rng, seed);
            if profile.check(&self.rules).is_ok() {
                return Ok(profile);
            }
        }
        Err(PopulationError::InfeasiblePopulation { attempts: MAX_SAMPLING_ATTEMPTS, seed })
    }

    fn draw(&self, rng: &mut ChaCha8Rng, seed: u64) -> UserProfile {
        let commute = self.commute.records[self.commute_index.sample(rng)];
        let arrival = self.work.arrivals[self.arrival_index.sample(rng)];
        let hours = self.work.weekly_hours[self.hours_index.sample(rng)];
        let vacation_weeks = rng.random_range(1..=3u32);
        let vacation_start_week = rng.random_range(0..=52 - vacation_weeks);
        let ev = &self.catalog.models[self.ev_index.sample(rng)];
        UserProfile {
            rng_seed: seed,
            commute_distance_miles: commute.distance_miles,
            commute_time_hours: commute.duration_hours,
            work_start_hour: (arrival.arrival_hour.floor() as u32) % 24,
            weekly_hours: hours.hours_per_week,
            vacation_weeks,
            vacation_start_week,
            ev_model: ev.name.clone(),
            ev_capacity_kwh: ev.capacity_kwh,
            ev_range_miles: ev.range_miles,
        }
    }
}

pub fn sample_user(
    commute: &CommuteDistribution,
    work: &WorkDistribution,
    catalog: &EvCatalog,
    rules: FeasibilityRules,
    seed: u64,
) -> Result<UserProfile, PopulationError> {
    PopulationSampler::new(commute, work, catalog, rules)?.sample(seed)
}

/// Per-user seeds for a population: a fixed stream from the master seed, so
/// user `i` keeps its seed whatever the population size.
pub fn user_seeds(n: usize, master_seed: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    (0..n).map(|_| rng.next_u64()).collect()
}

/// `n` independent users, reproducible from `master_seed`. Users are drawn in
/// parallel; the result is in user-index order.
pub fn sample_population(
    n: usize,
    commute: &CommuteDistribution,
    work: &WorkDistribution,
    catalog: &EvCatalog,
    rules: FeasibilityRules,
    master_seed: u64,
) -> Result<Vec<UserProfile>, PopulationError> {
    use rayon::prelude::*;
    if n == 0 {
        return Err(PopulationError::EmptyPopulation);
    }
    let sampler = PopulationSampler::new(commute, work, catalog, rules)?;
    user_seeds(n, master_seed).into_par_iter().map(|seed| sampler.sample(seed)).collect()
}
