//! Generators for the bundled example data.
//!
//! All outputs are deterministic given their seed. Price series are
//! synthetic stand-ins shaped after two US markets; the survey-style tables
//! are coarse approximations of commute, arrival-time and weekly-hours
//! distributions; the EV catalog and battery-cost history carry public 2019
//! figures.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::Serialize;

use crate::population::{ArrivalRecord, CommuteRecord, EvModel, WeeklyHoursRecord};
use crate::timeseries::{days_in_year, PriceSeries};

/// Parameters of a synthetic hourly price process.
///
/// `price = base * shape(hour) * season(day) * exp(x - sigma^2 / 2) * spike`
/// where `x` is a stationary AR(1) process with marginal deviation `sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceModel {
    pub city_id: String,
    /// Typical price, $/kWh.
    pub base: f64,
    /// Relative amplitude of the daily cosine.
    pub daily_amplitude: f64,
    /// Hour of the daily maximum.
    pub peak_hour: f64,
    /// Relative amplitude of the yearly cosine, peaking in late July.
    pub seasonal_amplitude: f64,
    pub ar_coefficient: f64,
    pub sigma: f64,
    /// Hourly probability of a scarcity spike.
    pub spike_probability: f64,
    /// Multiplier range of a spike.
    pub spike_multiplier: (f64, f64),
}

impl PriceModel {
    /// Flat daily profile within ten percent of the median (mid-Atlantic style).
    pub fn flat() -> Self {
        Self {
            city_id: "synth_flat".into(),
            base: 0.03,
            daily_amplitude: 0.10,
            peak_hour: 17.0,
            seasonal_amplitude: 0.15,
            ar_coefficient: 0.9,
            sigma: 0.25,
            spike_probability: 0.002,
            spike_multiplier: (3.0, 6.0),
        }
    }

    /// Mild evening-to-night peak, cheap solar middays (desert southwest style).
    pub fn night_peak() -> Self {
        Self {
            city_id: "synth_nightpeak".into(),
            base: 0.025,
            daily_amplitude: 0.10,
            peak_hour: 20.0,
            seasonal_amplitude: 0.25,
            ar_coefficient: 0.85,
            sigma: 0.2,
            spike_probability: 0.001,
            spike_multiplier: (2.0, 4.0),
        }
    }

    pub fn generate(&self, year: i32, seed: u64) -> PriceSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let innovation = Normal::new(0.0, self.sigma * (1.0 - self.ar_coefficient.powi(2)).sqrt()).unwrap();
        let days = days_in_year(year);
        let mut x = Normal::new(0.0, self.sigma).unwrap().sample(&mut rng);
        let mut prices = Vec::with_capacity(days * 24);
        for d in 0..days {
            let season = 1.0 + self.seasonal_amplitude * (std::f64::consts::TAU * (d as f64 - 205.0) / days as f64).cos();
            for h in 0..24 {
                let shape = 1.0 + self.daily_amplitude * (std::f64::consts::TAU * (h as f64 - self.peak_hour) / 24.0).cos();
                x = self.ar_coefficient * x + innovation.sample(&mut rng);
                let spike = if rng.random::<f64>() < self.spike_probability {
                    rng.random_range(self.spike_multiplier.0..self.spike_multiplier.1)
                } else {
                    1.0
                };
                let p = self.base * shape * season * (x - 0.5 * self.sigma * self.sigma).exp() * spike;
                prices.push((p * 1e5).round() / 1e5);
            }
        }
        PriceSeries::new(self.city_id.clone(), NaiveDate::from_ymd_opt(year, 1, 1).unwrap(), prices).unwrap()
    }
}

/// 0.30 $/kWh from 09:00 to 17:00 (hours 9 through 16), 0.02 otherwise.
pub fn two_regime_prices(year: i32) -> PriceSeries {
    let prices = (0..days_in_year(year) * 24).map(|i| if (9..17).contains(&(i % 24)) { 0.30 } else { 0.02 }).collect();
    PriceSeries::new("two_regime", NaiveDate::from_ymd_opt(year, 1, 1).unwrap(), prices).unwrap()
}

/// Weighted one-way commute records: log-normal distances around ten miles,
/// speeds rising from city to highway driving with trip length.
pub fn commute_records(n: usize, seed: u64) -> Vec<CommuteRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let distance = LogNormal::new(10.5f64.ln(), 0.8).unwrap();
    let weight = LogNormal::new(0.0f64, 0.5).unwrap();
    (0..n)
        .map(|_| {
            let d: f64 = distance.sample(&mut rng).clamp(0.5, 60.0);
            let speed = (18.0 + 22.0 * (1.0 - (-d / 15.0).exp())) * rng.random_range(0.85..1.15);
            CommuteRecord {
                distance_miles: (d * 10.0).round() / 10.0,
                duration_hours: ((d / speed) * 100.0).round().max(1.0) / 100.0,
                weight: (weight.sample(&mut rng) * 1000.0).round() / 1000.0,
            }
        })
        .collect()
}

/// Arrival times on a quarter-hour grid: a morning peak, smaller midday and
/// afternoon shift starts and a uniform background of night work.
pub fn arrival_records() -> Vec<ArrivalRecord> {
    let normal = |x: f64, mu: f64, sd: f64| (-0.5 * ((x - mu) / sd).powi(2)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt());
    (0..96)
        .map(|i| {
            let h = i as f64 / 4.0;
            let density = 0.70 * normal(h, 8.0, 1.0) + 0.12 * normal(h, 12.5, 1.5) + 0.10 * normal(h, 16.5, 1.5) + 0.08 / 24.0;
            ArrivalRecord { arrival_hour: h, weight: (density * 0.25 * 1e6).round() / 1e6 }
        })
        .collect()
}

/// Usual weekly hours worked, part-time through overtime.
pub fn weekly_hours_records() -> Vec<WeeklyHoursRecord> {
    [
        (4.0, 0.015),
        (6.0, 0.02),
        (8.0, 0.025),
        (10.0, 0.02),
        (12.0, 0.02),
        (15.0, 0.03),
        (20.0, 0.06),
        (25.0, 0.04),
        (30.0, 0.06),
        (35.0, 0.06),
        (40.0, 0.40),
        (45.0, 0.09),
        (50.0, 0.09),
        (55.0, 0.03),
        (60.0, 0.04),
    ]
    .into_iter()
    .map(|(hours_per_week, weight)| WeeklyHoursRecord { hours_per_week, weight })
    .collect()
}

/// Best-selling US battery-electric models of 2019 with approximate annual
/// sales as weights.
pub fn ev_models() -> Vec<EvModel> {
    [
        ("Tesla Model 3", 75.0, 310.0, 158_925.0),
        ("Tesla Model X", 100.0, 325.0, 19_225.0),
        ("Chevrolet Bolt", 60.0, 238.0, 16_418.0),
        ("Tesla Model S", 100.0, 370.0, 15_090.0),
        ("Nissan Leaf", 40.0, 150.0, 12_365.0),
        ("Audi e-tron", 95.0, 204.0, 5_369.0),
        ("Hyundai Kona Electric", 64.0, 258.0, 5_112.0),
        ("BMW i3", 42.0, 153.0, 4_854.0),
        ("Kia Niro EV", 64.0, 239.0, 3_500.0),
        ("Jaguar I-Pace", 90.0, 234.0, 2_594.0),
    ]
    .into_iter()
    .map(|(name, capacity_kwh, range_miles, sales_weight)| EvModel { name: name.into(), capacity_kwh, range_miles, sales_weight })
    .collect()
}

/// Volume-weighted average lithium-ion pack prices, $/kWh (nominal).
pub fn battery_cost_history() -> Vec<(i32, f64)> {
    vec![(2010, 1183.0), (2011, 917.0), (2012, 721.0), (2013, 663.0), (2014, 588.0), (2015, 384.0), (2016, 290.0), (2017, 219.0), (2018, 180.0), (2019, 156.0)]
}

/// Serializes records to CSV text with a header row and LF endings.
pub fn to_csv<T: Serialize>(records: &[T]) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    for r in records {
        w.serialize(r).expect("in-memory CSV write");
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV output is UTF-8")
}

pub fn cost_history_csv(history: &[(i32, f64)]) -> String {
    #[derive(Serialize)]
    struct Row {
        year: i32,
        cost_usd_per_kwh: f64,
    }
    to_csv(&history.iter().map(|&(year, cost_usd_per_kwh)| Row { year, cost_usd_per_kwh }).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::load_cost_history;
    use crate::population::{load_commute_distribution, load_ev_catalog, load_work_distribution};
    use crate::timeseries::quantile;

    #[test]
    fn price_models_are_positive_and_shaped() {
        for model in [PriceModel::flat(), PriceModel::night_peak()] {
            let s = model.generate(2019, 1);
            assert_eq!(s.len(), 8760);
            assert!(s.prices().iter().all(|&p| p > 0.0));
            let median = quantile(s.prices(), 0.5).unwrap();
            assert!((median / model.base - 1.0).abs() < 0.2, "{} median {median}", model.city_id);
            let hourly: Vec<f64> = (0..24).map(|h| {
                let v: Vec<f64> = s.prices().iter().skip(h).step_by(24).cloned().collect();
                quantile(&v, 0.5).unwrap()
            }).collect();
            let ratio = hourly.iter().cloned().fold(0.0, f64::max) / hourly.iter().cloned().fold(f64::MAX, f64::min);
            assert!(ratio < 1.3, "{} peak ratio {ratio}", model.city_id);
        }
    }

    #[test]
    fn generation_is_seeded() {
        assert_eq!(PriceModel::flat().generate(2019, 4), PriceModel::flat().generate(2019, 4));
        assert_ne!(PriceModel::flat().generate(2019, 4), PriceModel::flat().generate(2019, 5));
    }

    #[test]
    fn two_regime_levels() {
        let s = two_regime_prices(2019);
        assert_eq!(s.prices()[8], 0.02);
        assert_eq!(s.prices()[9], 0.30);
        assert_eq!(s.prices()[16], 0.30);
        assert_eq!(s.prices()[17], 0.02);
    }

    #[test]
    fn tables_round_trip_through_loaders() {
        let commute = load_commute_distribution(to_csv(&commute_records(200, 3)).as_bytes()).unwrap();
        assert_eq!(commute.records().len(), 200);
        assert!(commute.records().iter().all(|r| r.distance_miles > 0.0 && r.duration_hours > 0.0));
        let work = load_work_distribution(to_csv(&arrival_records()).as_bytes(), to_csv(&weekly_hours_records()).as_bytes()).unwrap();
        assert_eq!(work.arrivals().len(), 96);
        assert!(work.weekly_hours().iter().any(|r| r.hours_per_week < 10.0));
        let catalog = load_ev_catalog(to_csv(&ev_models()).as_bytes()).unwrap();
        assert_eq!(catalog.models().len(), 10);
        let history = load_cost_history(cost_history_csv(&battery_cost_history()).as_bytes()).unwrap();
        assert_eq!(history.last(), Some(&(2019, 156.0)));
    }
}
