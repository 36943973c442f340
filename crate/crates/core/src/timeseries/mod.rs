//! Hourly electricity prices and the working-day calendar.
//!
//! A [`PriceSeries`] is a gap-free run of whole days at one-hour resolution,
//! prices in $/kWh (negative values are legal). Series and calendars are
//! immutable once built and can be shared across simulation workers.

mod calendar;
mod csv;
mod smooth;

pub use calendar::{us_federal_holidays, WorkCalendar};
pub use csv::{parse_price_csv, parse_price_csv_report, write_price_csv, ParseWarning, PRICE_CSV_HEADER};
pub use smooth::{savitzky_golay_coefficients, smooth_prices, smooth_values, EdgeMode};

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime};
use thiserror::Error;

pub const HOURS_PER_DAY: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TimeseriesError {
    #[error("price file is empty")]
    EmptyInput,
    #[error("line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("missing {count} hour(s) starting at {from} (line {line})")]
    MissingHours { from: NaiveDateTime, count: usize, line: usize },
    #[error("duplicate timestamp {timestamp} at line {line}")]
    DuplicateTimestamp { timestamp: NaiveDateTime, line: usize },
    #[error("invalid smoothing window {window} (poly order {poly_order}, series length {len})")]
    InvalidWindow { window: usize, poly_order: usize, len: usize },
    #[error("date {date} is outside calendar year {year}")]
    DateOutOfRange { date: NaiveDate, year: i32 },
    #[error("quantile {0} is outside [0, 1]")]
    QOutOfRange(f64),
    #[error("series length {0} is not a whole number of days")]
    PartialDay(usize),
}

/// Hourly locational marginal prices starting at midnight of `start`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    city_id: String,
    start: NaiveDate,
    prices: Vec<f64>,
}

impl PriceSeries {
    pub fn new(city_id: impl Into<String>, start: NaiveDate, prices: Vec<f64>) -> Result<Self, TimeseriesError> {
        if prices.is_empty() {
            return Err(TimeseriesError::EmptyInput);
        }
        if prices.len() % HOURS_PER_DAY != 0 {
            return Err(TimeseriesError::PartialDay(prices.len()));
        }
        Ok(Self { city_id: city_id.into(), start, prices })
    }

    pub fn city_id(&self) -> &str {
        &self.city_id
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn days(&self) -> usize {
        self.prices.len() / HOURS_PER_DAY
    }

    pub fn timestamp(&self, index: usize) -> NaiveDateTime {
        self.start.and_hms_opt(0, 0, 0).unwrap() + Duration::hours(index as i64)
    }

    /// Hourly prices of calendar year `year`, or `None` if the series does not
    /// cover every hour of it.
    pub fn year_slice(&self, year: i32) -> Option<&[f64]> {
        let first = NaiveDate::from_ymd_opt(year, 1, 1)?;
        let offset = first.signed_duration_since(self.start).num_days();
        if offset < 0 {
            return None;
        }
        let from = offset as usize * HOURS_PER_DAY;
        let to = from + days_in_year(year) * HOURS_PER_DAY;
        self.prices.get(from..to)
    }

    pub fn with_prices(&self, city_id: impl Into<String>, prices: Vec<f64>) -> Result<Self, TimeseriesError> {
        Self::new(city_id, self.start, prices)
    }
}

pub fn days_in_year(year: i32) -> usize {
    if NaiveDate::from_ymd_opt(year, 2, 29).is_some() {
        366
    } else {
        365
    }
}

pub(crate) fn first_weekday_on_or_after(date: NaiveDate, weekday: chrono::Weekday) -> NaiveDate {
    let shift = (7 + weekday.num_days_from_monday() as i64 - date.weekday().num_days_from_monday() as i64) % 7;
    date + Duration::days(shift)
}

/// q-quantile of the series under linear interpolation between order statistics.
pub fn price_percentile(series: &PriceSeries, q: f64) -> Result<f64, TimeseriesError> {
    quantile(series.prices(), q)
}

/// Linear-interpolation quantile of an arbitrary non-empty sample.
pub fn quantile(values: &[f64], q: f64) -> Result<f64, TimeseriesError> {
    if !(0.0..=1.0).contains(&q) {
        return Err(TimeseriesError::QOutOfRange(q));
    }
    if values.is_empty() {
        return Err(TimeseriesError::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&sorted, q))
}

pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
    }
}
