//! Hourly simulation of one user-year: schedule, gated power flow and cash.

mod schedule;

pub use schedule::{build_schedule, DaySchedule, SlotState};

use chrono::{Duration, Weekday};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::battery::{accrue_step, discharge_floor, BatteryError, BatteryParams, BatteryState, DegradationParams};
use crate::population::UserProfile;
use crate::timeseries::{first_weekday_on_or_after, PriceSeries, WorkCalendar};

const SOC_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("price series {city} does not cover year {year}")]
    PriceSeriesTooShort { city: String, year: i32 },
    #[error("scenario year {scenario} does not match calendar year {calendar}")]
    YearMismatch { scenario: i32, calendar: i32 },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("duty span of {span} h does not fit in a day")]
    DayDoesNotClose { span: u32 },
    #[error("{home_hours} h at home at {rate_kw} kW cannot restore a {needed_kwh:.3} kWh round trip")]
    UnrechargeableSchedule { home_hours: u32, rate_kw: f64, needed_kwh: f64 },
    #[error("state of charge {soc} left [{min}, 1] at hour {hour}")]
    SocOutOfBounds { hour: usize, soc: f64, min: f64 },
    #[error(transparent)]
    Battery(#[from] BatteryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Sell whenever plugged in at work.
    PriceTaker,
    /// Sell at work only while the price exceeds the selling price.
    Osp,
    /// Charge at home and drive; never sell.
    CommuteOnly,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::PriceTaker => "price_taker",
            Mode::Osp => "osp",
            Mode::CommuteOnly => "commute_only",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "price_taker" => Ok(Mode::PriceTaker),
            "osp" => Ok(Mode::Osp),
            "commute_only" => Ok(Mode::CommuteOnly),
            other => Err(format!("unknown mode `{other}` (expected price_taker, osp or commute_only)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub mode: Mode,
    /// Selling price threshold in $/kWh; only read in [`Mode::Osp`].
    pub selling_price: f64,
    /// Battery template; the capacity is replaced by the user's vehicle.
    pub battery: BatteryParams,
    pub degradation: DegradationParams,
    pub year: i32,
    /// Commute legs of energy kept in reserve while selling (1 or 2).
    pub reserve_legs: u8,
}

impl ScenarioConfig {
    pub fn new(mode: Mode, year: i32) -> Self {
        Self {
            mode,
            selling_price: 0.0,
            battery: BatteryParams::default(),
            degradation: DegradationParams::default(),
            year,
            reserve_legs: 1,
        }
    }

    pub fn with_mode(self, mode: Mode) -> Self {
        Self { mode, ..self }
    }

    pub fn with_selling_price(self, p: f64) -> Self {
        Self { mode: Mode::Osp, selling_price: p, ..self }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        self.battery.validate()?;
        self.degradation.validate()?;
        if self.mode == Mode::Osp && !(self.selling_price >= 0.0) {
            return Err(EngineError::InvalidScenario(format!("selling price {} must be nonnegative", self.selling_price)));
        }
        if !(1..=2).contains(&self.reserve_legs) {
            return Err(EngineError::InvalidScenario(format!("reserve_legs {} must be 1 or 2", self.reserve_legs)));
        }
        Ok(())
    }

    fn sells_at(&self, price: f64) -> bool {
        match self.mode {
            Mode::PriceTaker => true,
            Mode::Osp => price > self.selling_price,
            Mode::CommuteOnly => false,
        }
    }
}

/// Energy and money crossing the meter in one hourly slot.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepFlow {
    /// Grid-side kWh; positive when delivered to the grid, negative when drawn.
    pub grid_kwh: f64,
    /// Battery-side kWh; positive when charging.
    pub battery_kwh: f64,
    /// Dollars; positive when earned.
    pub cash: f64,
}

/// Power flow for one hour.
///
/// `commute_kwh` is the battery-side energy drawn by one commuting slot.
/// Rates are battery-side, so a full hour at work removes `discharge_rate_kw`
/// kWh from the pack and delivers `efficiency` times that to the grid.
pub fn step_power(
    state: SlotState,
    soc: f64,
    price: f64,
    scenario: &ScenarioConfig,
    floor: f64,
    commute_kwh: f64,
) -> Result<StepFlow, EngineError> {
    let b = &scenario.battery;
    let min = b.min_soc();
    if soc < min - SOC_TOLERANCE || soc > 1.0 + SOC_TOLERANCE {
        return Err(EngineError::SocOutOfBounds { hour: 0, soc, min });
    }
    let eta = b.one_way_efficiency;
    let flow = match state {
        SlotState::AtWork if scenario.sells_at(price) => {
            let headroom = ((soc - floor) * b.capacity_kwh).max(0.0);
            let out = b.discharge_rate_kw.min(headroom);
            let grid = eta * out;
            StepFlow { grid_kwh: grid, battery_kwh: -out, cash: grid * price }
        }
        SlotState::AtHome => {
            let room = ((1.0 - soc) * b.capacity_kwh).max(0.0);
            let charged = b.charge_rate_kw.min(room);
            let drawn = charged / eta;
            StepFlow { grid_kwh: -drawn, battery_kwh: charged, cash: -drawn * price }
        }
        SlotState::Commuting => StepFlow { grid_kwh: 0.0, battery_kwh: -commute_kwh, cash: 0.0 },
        SlotState::AtWork | SlotState::Idle => StepFlow::default(),
    };
    Ok(flow)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnualResult {
    pub mode: Mode,
    /// Selling price used, present in [`Mode::Osp`] only.
    pub selling_price: Option<f64>,
    pub revenue: f64,
    pub energy_cost: f64,
    pub deg_cost: f64,
    pub net: f64,
    pub kwh_sold: f64,
    pub kwh_bought: f64,
    /// Battery-side energy used for driving.
    pub kwh_commute: f64,
    pub final_soc: f64,
    pub final_q: f64,
    pub n_cyc: f64,
}

/// A user's year laid out hour by hour, reusable across scenarios.
///
/// Every hour is `AtHome` unless it falls in the duty block of a working,
/// non-vacation day. Duty blocks are placed relative to each day's midnight
/// and wrap cyclically around the year, so a shift starting on 31 December
/// continues into the first hours of the simulated year.
#[derive(Debug, Clone)]
pub struct YearPlan {
    year: i32,
    labels: Vec<SlotState>,
    prices: Vec<f64>,
    capacity_kwh: f64,
    commute_energy_kwh: f64,
    commute_slots: u32,
    home_hours: u32,
    duty_days: usize,
}

impl YearPlan {
    pub fn new(profile: &UserProfile, prices: &PriceSeries, calendar: &WorkCalendar) -> Result<Self, EngineError> {
        let year = calendar.year();
        let slice = prices
            .year_slice(year)
            .ok_or_else(|| EngineError::PriceSeriesTooShort { city: prices.city_id().to_string(), year })?;
        let span = profile.duty_span_hours();
        if span > 24 {
            return Err(EngineError::DayDoesNotClose { span });
        }
        let schedule = build_schedule(profile);
        let duty: Vec<(i64, SlotState)> = schedule.duty().collect();

        let n = slice.len() as i64;
        let mut labels = vec![SlotState::AtHome; slice.len()];
        let vacation_start = first_weekday_on_or_after(calendar.first_day(), Weekday::Mon)
            + Duration::weeks(profile.vacation_start_week as i64);
        let vacation_end = vacation_start + Duration::weeks(profile.vacation_weeks as i64);
        let mut duty_days = 0;
        for (d, date) in calendar.days().enumerate() {
            let on_vacation = date >= vacation_start && date < vacation_end;
            if on_vacation || !matches!(calendar.is_working_day(date), Ok(true)) {
                continue;
            }
            duty_days += 1;
            let midnight = d as i64 * 24;
            for &(offset, state) in &duty {
                labels[(midnight + offset).rem_euclid(n) as usize] = state;
            }
        }

        Ok(Self {
            year,
            labels,
            prices: slice.to_vec(),
            capacity_kwh: profile.ev_capacity_kwh,
            commute_energy_kwh: profile.commute_energy_kwh(),
            commute_slots: schedule.commute_slots,
            home_hours: profile.home_hours(),
            duty_days,
        })
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn labels(&self) -> &[SlotState] {
        &self.labels
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn duty_days(&self) -> usize {
        self.duty_days
    }

    /// Hours plugged in at work over the year.
    pub fn work_hours(&self) -> usize {
        self.labels.iter().filter(|&&s| s == SlotState::AtWork).count()
    }

    /// Scenario with the user's battery capacity, checked against this plan.
    fn resolve(&self, scenario: &ScenarioConfig) -> Result<ScenarioConfig, EngineError> {
        if scenario.year != self.year {
            return Err(EngineError::YearMismatch { scenario: scenario.year, calendar: self.year });
        }
        let resolved = ScenarioConfig { battery: scenario.battery.with_capacity(self.capacity_kwh), ..*scenario };
        resolved.validate()?;
        let needed_kwh = 2.0 * self.commute_energy_kwh;
        let usable = resolved.battery.usable_kwh();
        if needed_kwh > usable * (1.0 + 1e-12) {
            return Err(BatteryError::InfeasibleCommute { round_trip_kwh: needed_kwh, usable_kwh: usable }.into());
        }
        let rate_kw = resolved.battery.charge_rate_kw;
        if self.duty_days > 0 && (self.home_hours as f64) * rate_kw < needed_kwh * (1.0 - 1e-12) {
            return Err(EngineError::UnrechargeableSchedule { home_hours: self.home_hours, rate_kw, needed_kwh });
        }
        Ok(resolved)
    }

    pub fn run(&self, scenario: &ScenarioConfig) -> Result<AnnualResult, EngineError> {
        self.run_with(scenario, |_, _| {})
    }

    /// Runs the year, calling `observe(hour, state)` after every hour.
    pub fn run_with<F: FnMut(usize, &BatteryState)>(&self, scenario: &ScenarioConfig, mut observe: F) -> Result<AnnualResult, EngineError> {
        let scenario = self.resolve(scenario)?;
        let battery = scenario.battery;
        let deg = scenario.degradation;
        let floor = discharge_floor(&battery, self.commute_energy_kwh, scenario.reserve_legs)?;
        let per_slot = if self.commute_slots > 0 { self.commute_energy_kwh / self.commute_slots as f64 } else { 0.0 };

        let mut state = BatteryState::fresh(&deg);
        let initial_q = state.q_remaining;
        let (mut revenue, mut energy_cost, mut sold, mut bought, mut driven) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (hour, (&label, &price)) in self.labels.iter().zip(&self.prices).enumerate() {
            let flow = step_power(label, state.soc, price, &scenario, floor, per_slot).map_err(|e| at_hour(e, hour))?;
            state = accrue_step(&state, &battery, &deg, flow.battery_kwh, 1.0).map_err(|e| at_hour(e.into(), hour))?;
            if flow.grid_kwh > 0.0 {
                revenue += flow.cash;
                sold += flow.grid_kwh;
            } else if flow.grid_kwh < 0.0 {
                energy_cost -= flow.cash;
                bought -= flow.grid_kwh;
            }
            if label == SlotState::Commuting {
                driven -= flow.battery_kwh;
            }
            observe(hour, &state);
        }
        let deg_cost = battery.capital_cost_usd_per_kwh * battery.capacity_kwh * (initial_q - state.q_remaining) / battery.saturation_factor;
        Ok(AnnualResult {
            mode: scenario.mode,
            selling_price: (scenario.mode == Mode::Osp).then_some(scenario.selling_price),
            revenue,
            energy_cost,
            deg_cost,
            net: revenue - energy_cost - deg_cost,
            kwh_sold: sold,
            kwh_bought: bought,
            kwh_commute: driven,
            final_soc: state.soc,
            final_q: state.q_remaining,
            n_cyc: state.equivalent_cycles,
        })
    }

    /// V2G result, commute-only baseline and their net difference.
    pub fn savings(&self, scenario: &ScenarioConfig) -> Result<Savings, EngineError> {
        let v2g = self.run(scenario)?;
        let baseline = self.run(&scenario.with_mode(Mode::CommuteOnly))?;
        Ok(Savings { savings: v2g.net - baseline.net, v2g, baseline })
    }
}

fn at_hour(e: EngineError, hour: usize) -> EngineError {
    match e {
        EngineError::SocOutOfBounds { soc, min, .. } => EngineError::SocOutOfBounds { hour, soc, min },
        EngineError::Battery(BatteryError::SocOutOfBounds { soc, min }) => EngineError::SocOutOfBounds { hour, soc, min },
        other => other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Savings {
    pub v2g: AnnualResult,
    pub baseline: AnnualResult,
    pub savings: f64,
}

pub fn simulate_year(
    profile: &UserProfile,
    prices: &PriceSeries,
    calendar: &WorkCalendar,
    scenario: &ScenarioConfig,
) -> Result<AnnualResult, EngineError> {
    YearPlan::new(profile, prices, calendar)?.run(scenario)
}

/// Net of `scenario` minus net of the commute-only run of the same user.
pub fn annual_savings(
    profile: &UserProfile,
    prices: &PriceSeries,
    calendar: &WorkCalendar,
    scenario: &ScenarioConfig,
) -> Result<f64, EngineError> {
    Ok(YearPlan::new(profile, prices, calendar)?.savings(scenario)?.savings)
}

#[cfg(test)]
mod tests;
