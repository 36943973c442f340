//! State of charge, capacity fade and degradation cost.
//!
//! Capacity fade is the lesser of a calendar term and a cycle term:
//!
//! ```text
//! Q_li    = b0 + b1 * age_days^z
//! Q_sites = c0 + c1 * N_cyc
//! Q       = min(Q_li, Q_sites)
//! ```
//!
//! Lost capacity is priced by amortizing the pack over the fraction of
//! capacity it may lose before replacement (the saturation factor):
//! `cost = c_b * E_max * (Q_prev - Q_new) / SF` per step. Summed over a run
//! this telescopes to `c_b * E_max * (Q_0 - Q_end) / SF`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

const SOC_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BatteryError {
    #[error("invalid battery parameter: {0}")]
    InvalidParams(String),
    #[error("invalid degradation parameter: {0}")]
    InvalidDegradation(String),
    #[error("state of charge {soc} left [{min}, 1]")]
    SocOutOfBounds { soc: f64, min: f64 },
    #[error("negative timestep {0} h")]
    NegativeTimestep(f64),
    #[error("round-trip commute of {round_trip_kwh} kWh exceeds usable capacity {usable_kwh} kWh")]
    InfeasibleCommute { round_trip_kwh: f64, usable_kwh: f64 },
}

/// Fixed battery and charger parameters of one vehicle.
///
/// Charge and discharge rates are battery-side kW: one hour at `discharge_rate_kw`
/// removes that many kWh from the pack and delivers `efficiency` times as much
/// to the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryParams {
    pub capacity_kwh: f64,
    pub dod: f64,
    pub one_way_efficiency: f64,
    pub charge_rate_kw: f64,
    pub discharge_rate_kw: f64,
    pub capital_cost_usd_per_kwh: f64,
    pub saturation_factor: f64,
}

impl Default for BatteryParams {
    fn default() -> Self {
        Self {
            capacity_kwh: 60.0,
            dod: 0.9,
            one_way_efficiency: 0.837,
            charge_rate_kw: 11.5,
            discharge_rate_kw: 11.5,
            capital_cost_usd_per_kwh: 156.0,
            saturation_factor: 0.2,
        }
    }
}

impl BatteryParams {
    pub fn validate(&self) -> Result<(), BatteryError> {
        let bad = |what: &str| Err(BatteryError::InvalidParams(what.to_string()));
        if !(self.capacity_kwh > 0.0 && self.capacity_kwh.is_finite()) {
            return bad("capacity must be positive");
        }
        if !(self.dod > 0.0 && self.dod <= 1.0) {
            return bad("depth of discharge must be in (0, 1]");
        }
        if !(self.one_way_efficiency > 0.0 && self.one_way_efficiency <= 1.0) {
            return bad("one-way efficiency must be in (0, 1]");
        }
        if !(self.charge_rate_kw > 0.0 && self.discharge_rate_kw > 0.0) {
            return bad("charge and discharge rates must be positive");
        }
        if !(self.capital_cost_usd_per_kwh >= 0.0) {
            return bad("capital cost must be nonnegative");
        }
        if !(self.saturation_factor > 0.0 && self.saturation_factor <= 1.0) {
            return bad("saturation factor must be in (0, 1]");
        }
        Ok(())
    }

    pub fn with_capacity(self, capacity_kwh: f64) -> Self {
        Self { capacity_kwh, ..self }
    }

    pub fn min_soc(&self) -> f64 {
        1.0 - self.dod
    }

    pub fn usable_kwh(&self) -> f64 {
        self.dod * self.capacity_kwh
    }
}

/// Rate constants of the calendar/cycle fade model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DegradationParams {
    pub b0: f64,
    /// Calendar fade per day^z; nonpositive.
    pub b1: f64,
    pub z: f64,
    pub c0: f64,
    /// Cycle fade per equivalent cycle; nonpositive.
    pub c1: f64,
}

impl Default for DegradationParams {
    /// Placeholder calibration: roughly 80 % capacity after ten years of
    /// daily full cycles. Not fitted to any particular cell.
    fn default() -> Self {
        Self { b0: 1.0, b1: -2.5e-4, z: 0.5, c0: 1.0, c1: -5e-5 }
    }
}

impl DegradationParams {
    pub fn none() -> Self {
        Self { b0: 1.0, b1: 0.0, z: 0.5, c0: 1.0, c1: 0.0 }
    }

    pub fn validate(&self) -> Result<(), BatteryError> {
        let bad = |what: &str| Err(BatteryError::InvalidDegradation(what.to_string()));
        if self.b0 != 1.0 || self.c0 != 1.0 {
            return bad("b0 and c0 must be 1 (fresh battery has Q = 1)");
        }
        if !(self.b1 <= 0.0 && self.c1 <= 0.0) {
            return bad("b1 and c1 must be nonpositive");
        }
        if !(self.z > 0.0 && self.z.is_finite()) {
            return bad("calendar exponent z must be positive");
        }
        Ok(())
    }
}

/// Remaining capacity fraction after `age_days` of calendar time and `n_cyc` equivalent cycles.
pub fn capacity_remaining(params: &DegradationParams, age_days: f64, n_cyc: f64) -> f64 {
    let calendar = params.b0 + params.b1 * age_days.powf(params.z);
    let cycling = params.c0 + params.c1 * n_cyc;
    calendar.min(cycling)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryState {
    pub soc: f64,
    pub age_days: f64,
    pub equivalent_cycles: f64,
    pub q_remaining: f64,
    pub deg_cost_accrued: f64,
}

impl BatteryState {
    /// Full, new battery.
    pub fn fresh(deg: &DegradationParams) -> Self {
        Self { soc: 1.0, age_days: 0.0, equivalent_cycles: 0.0, q_remaining: capacity_remaining(deg, 0.0, 0.0), deg_cost_accrued: 0.0 }
    }
}

/// Advances the battery by one step of `dt_hours` during which
/// `battery_energy_kwh` (positive = charged, negative = discharged) crossed
/// the pack terminals.
///
/// Only discharged energy counts toward equivalent cycles. The state of
/// charge is never clamped: leaving `[1 - DoD, 1]` is reported as an error.
pub fn accrue_step(
    state: &BatteryState,
    params: &BatteryParams,
    deg: &DegradationParams,
    battery_energy_kwh: f64,
    dt_hours: f64,
) -> Result<BatteryState, BatteryError> {
    if dt_hours < 0.0 {
        return Err(BatteryError::NegativeTimestep(dt_hours));
    }
    let soc = state.soc + battery_energy_kwh / params.capacity_kwh;
    let min = params.min_soc();
    if soc < min - SOC_TOLERANCE || soc > 1.0 + SOC_TOLERANCE {
        return Err(BatteryError::SocOutOfBounds { soc, min });
    }
    let age_days = state.age_days + dt_hours / 24.0;
    let equivalent_cycles = if battery_energy_kwh < 0.0 {
        state.equivalent_cycles - battery_energy_kwh / params.usable_kwh()
    } else {
        state.equivalent_cycles
    };
    let q = capacity_remaining(deg, age_days, equivalent_cycles);
    let increment = params.capital_cost_usd_per_kwh * params.capacity_kwh * (state.q_remaining - q) / params.saturation_factor;
    Ok(BatteryState { soc, age_days, equivalent_cycles, q_remaining: q, deg_cost_accrued: state.deg_cost_accrued + increment })
}

/// State of charge below which selling at work stops, leaving `reserve_legs`
/// commute legs of battery-side energy above the depth-of-discharge floor.
pub fn discharge_floor(params: &BatteryParams, commute_energy_kwh: f64, reserve_legs: u8) -> Result<f64, BatteryError> {
    let round_trip = 2.0 * commute_energy_kwh;
    if round_trip > params.usable_kwh() * (1.0 + 1e-12) {
        return Err(BatteryError::InfeasibleCommute { round_trip_kwh: round_trip, usable_kwh: params.usable_kwh() });
    }
    Ok(params.min_soc() + reserve_legs as f64 * commute_energy_kwh / params.capacity_kwh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn zero_rate() -> DegradationParams {
        DegradationParams::none()
    }

    fn sample_deg() -> DegradationParams {
        DegradationParams { b0: 1.0, b1: -0.01, z: 0.5, c0: 1.0, c1: -1e-4 }
    }

    #[test]
    fn zero_rates_never_fade() {
        for (age, n) in [(0.0, 0.0), (365.0, 100.0), (3650.0, 1e5)] {
            assert_eq!(capacity_remaining(&zero_rate(), age, n), 1.0);
        }
    }

    #[test]
    fn calendar_term_binds() {
        let q = capacity_remaining(&sample_deg(), 100.0, 0.0);
        assert!((q - 0.9).abs() < 1e-12);
    }

    #[test]
    fn cycle_term_binds() {
        let q = capacity_remaining(&sample_deg(), 100.0, 2000.0);
        assert!((q - 0.8).abs() < 1e-12);
    }

    #[test]
    fn idle_step_only_ages() {
        let p = BatteryParams::default();
        let s0 = BatteryState::fresh(&zero_rate());
        let s1 = accrue_step(&s0, &p, &zero_rate(), 0.0, 1.0).unwrap();
        assert_eq!(s1, BatteryState { age_days: 1.0 / 24.0, ..s0 });
    }

    #[test]
    fn degradation_cost_increment() {
        // One equivalent cycle at c1 = -1e-3 takes Q from 1 to 0.999.
        let p = BatteryParams { capacity_kwh: 60.0, capital_cost_usd_per_kwh: 156.0, saturation_factor: 0.2, ..Default::default() };
        let deg = DegradationParams { c1: -1e-3, ..zero_rate() };
        let s = accrue_step(&BatteryState::fresh(&deg), &p, &deg, -54.0, 1.0).unwrap();
        assert!((s.q_remaining - 0.999).abs() < 1e-12);
        assert!((s.deg_cost_accrued - 46.80).abs() < 1e-9, "{}", s.deg_cost_accrued);
    }

    #[test]
    fn full_usable_discharge_is_one_cycle() {
        let p = BatteryParams::default();
        let s = accrue_step(&BatteryState::fresh(&zero_rate()), &p, &zero_rate(), -54.0, 1.0).unwrap();
        assert!((s.equivalent_cycles - 1.0).abs() < 1e-15);
        assert!((s.soc - 0.1).abs() < 1e-12);
        let charged = accrue_step(&s, &p, &zero_rate(), 30.0, 1.0).unwrap();
        assert_eq!(charged.equivalent_cycles, s.equivalent_cycles);
    }

    #[test]
    fn step_errors() {
        let p = BatteryParams::default();
        let s = BatteryState::fresh(&zero_rate());
        assert!(matches!(accrue_step(&s, &p, &zero_rate(), 0.0, -1.0), Err(BatteryError::NegativeTimestep(_))));
        assert!(matches!(accrue_step(&s, &p, &zero_rate(), 1.0, 1.0), Err(BatteryError::SocOutOfBounds { .. })));
        assert!(matches!(accrue_step(&s, &p, &zero_rate(), -55.0, 1.0), Err(BatteryError::SocOutOfBounds { .. })));
    }

    #[test]
    fn floor_examples() {
        let p = BatteryParams::default();
        assert!((discharge_floor(&p, 0.0, 1).unwrap() - 0.1).abs() < 1e-15);
        assert!((discharge_floor(&p, 7.5, 1).unwrap() - 0.225).abs() < 1e-12);
        // boundary: 2 E_c = DoD E_max
        let f = discharge_floor(&p, 27.0, 1).unwrap();
        assert!((f - (1.0 - 27.0 / 60.0)).abs() < 1e-12);
        assert!(matches!(discharge_floor(&p, 27.5, 1), Err(BatteryError::InfeasibleCommute { .. })));
        assert!((discharge_floor(&p, 7.5, 2).unwrap() - 0.35).abs() < 1e-12);
    }

    #[test]
    fn parameter_validation() {
        assert!(BatteryParams::default().validate().is_ok());
        assert!(BatteryParams { dod: 0.0, ..Default::default() }.validate().is_err());
        assert!(BatteryParams { one_way_efficiency: 1.2, ..Default::default() }.validate().is_err());
        assert!(BatteryParams { saturation_factor: 0.0, ..Default::default() }.validate().is_err());
        assert!(DegradationParams::default().validate().is_ok());
        assert!(DegradationParams { b1: 1e-3, ..Default::default() }.validate().is_err());
        assert!(DegradationParams { c0: 0.9, ..Default::default() }.validate().is_err());
    }

    proptest! {
        #[test]
        fn fade_is_monotone_and_cost_telescopes(
            steps in proptest::collection::vec((-11.5f64..11.5, 0.0f64..2.0), 1..400),
        ) {
            let p = BatteryParams::default();
            let deg = DegradationParams::default();
            let mut s = BatteryState { soc: 0.55, ..BatteryState::fresh(&deg) };
            let q0 = s.q_remaining;
            for (e, dt) in steps {
                // keep inside bounds: reflect the request if it would leave them
                let e = if s.soc + e / p.capacity_kwh > 1.0 || s.soc + e / p.capacity_kwh < p.min_soc() { -e } else { e };
                let next = accrue_step(&s, &p, &deg, e, dt).unwrap();
                prop_assert!(next.q_remaining <= s.q_remaining);
                prop_assert!(next.deg_cost_accrued >= s.deg_cost_accrued);
                s = next;
            }
            let expected = p.capital_cost_usd_per_kwh * p.capacity_kwh * (q0 - s.q_remaining) / p.saturation_factor;
            prop_assert!((s.deg_cost_accrued - expected).abs() <= 1e-9 * expected.abs().max(1e-9));
        }

        #[test]
        fn floor_never_below_dod_floor(e_c in 0.0f64..27.0, legs in 1u8..=2) {
            let p = BatteryParams::default();
            let f = discharge_floor(&p, e_c, legs).unwrap();
            prop_assert!(f >= p.min_soc());
            prop_assert_eq!(f == p.min_soc(), e_c == 0.0);
        }
    }
}
