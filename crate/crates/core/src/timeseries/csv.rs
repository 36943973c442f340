//! `timestamp,price_usd_per_kwh` files.
//!
//! Timestamps are local wall-clock time at the top of each hour. US daylight
//! saving transitions are normalized: the skipped spring hour is linearly
//! interpolated and the repeated autumn hour is averaged. Any other gap or
//! repeat is an error.

use std::fmt::Write as _;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike, Weekday};

use super::{first_weekday_on_or_after, PriceSeries, TimeseriesError};

pub const PRICE_CSV_HEADER: &str = "timestamp,price_usd_per_kwh";

const TIMESTAMP_FORMATS: [&str; 4] = ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"];

#[derive(Debug, Clone, PartialEq)]
pub enum ParseWarning {
    /// Spring-forward hour absent from the export; filled by interpolation.
    InterpolatedHour { timestamp: NaiveDateTime, value: f64 },
    /// Fall-back hour present twice; the two readings were averaged.
    AveragedHour { timestamp: NaiveDateTime, value: f64 },
}

impl std::fmt::Display for ParseWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParseWarning::InterpolatedHour { timestamp, value } => {
                write!(f, "daylight-saving gap at {timestamp} interpolated to {value}")
            }
            ParseWarning::AveragedHour { timestamp, value } => {
                write!(f, "daylight-saving repeat at {timestamp} averaged to {value}")
            }
        }
    }
}

/// Parses a price file, logging any daylight-saving normalizations.
pub fn parse_price_csv(content: &[u8], city_id: &str) -> Result<PriceSeries, TimeseriesError> {
    let (series, warnings) = parse_price_csv_report(content, city_id)?;
    for w in &warnings {
        log::warn!("{city_id}: {w}");
    }
    Ok(series)
}

/// Like [`parse_price_csv`] but hands the normalization warnings back to the caller.
pub fn parse_price_csv_report(content: &[u8], city_id: &str) -> Result<(PriceSeries, Vec<ParseWarning>), TimeseriesError> {
    let mut reader = ::csv::ReaderBuilder::new().has_headers(true).trim(::csv::Trim::All).from_reader(content);
    let header = reader
        .headers()
        .map_err(|e| TimeseriesError::MalformedRow { line: 1, reason: e.to_string() })?
        .clone();
    if header.is_empty() {
        return Err(TimeseriesError::EmptyInput);
    }
    if header.len() != 2 || &header[0] != "timestamp" || &header[1] != "price_usd_per_kwh" {
        return Err(TimeseriesError::MalformedRow { line: 1, reason: format!("expected header `{PRICE_CSV_HEADER}`") });
    }

    let mut prices: Vec<f64> = Vec::new();
    let mut warnings = Vec::new();
    let mut start: Option<NaiveDateTime> = None;
    let mut expected = NaiveDateTime::MIN;
    let mut averaged: Option<NaiveDateTime> = None;

    for record in reader.records() {
        let record = record.map_err(|e| TimeseriesError::MalformedRow {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            reason: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != 2 {
            return Err(TimeseriesError::MalformedRow { line, reason: format!("expected 2 fields, found {}", record.len()) });
        }
        let ts = parse_timestamp(&record[0]).ok_or_else(|| TimeseriesError::MalformedRow {
            line,
            reason: format!("unrecognized timestamp `{}`", &record[0]),
        })?;
        if ts.minute() != 0 || ts.second() != 0 {
            return Err(TimeseriesError::MalformedRow { line, reason: format!("timestamp {ts} is not on the hour") });
        }
        let price: f64 = record[1].parse().map_err(|_| TimeseriesError::MalformedRow {
            line,
            reason: format!("unparseable price `{}`", &record[1]),
        })?;
        if !price.is_finite() {
            return Err(TimeseriesError::MalformedRow { line, reason: "price is not finite".into() });
        }

        let Some(first) = start else {
            if ts.hour() != 0 {
                return Err(TimeseriesError::MalformedRow { line, reason: "series must start at 00:00".into() });
            }
            start = Some(ts);
            prices.push(price);
            expected = ts + Duration::hours(1);
            continue;
        };

        if ts == expected {
            prices.push(price);
            expected = ts + Duration::hours(1);
        } else if ts + Duration::hours(1) == expected && is_fall_back_hour(ts) && averaged != Some(ts) {
            let last = prices.last_mut().unwrap();
            *last = 0.5 * (*last + price);
            averaged = Some(ts);
            warnings.push(ParseWarning::AveragedHour { timestamp: ts, value: *last });
        } else if ts == expected + Duration::hours(1) && is_spring_forward_hour(expected) {
            let value = 0.5 * (prices.last().unwrap() + price);
            warnings.push(ParseWarning::InterpolatedHour { timestamp: expected, value });
            prices.push(value);
            prices.push(price);
            expected = ts + Duration::hours(1);
        } else if ts > expected {
            let count = (ts - expected).num_hours() as usize;
            return Err(TimeseriesError::MissingHours { from: expected, count, line });
        } else if ts >= first && ts < expected {
            return Err(TimeseriesError::DuplicateTimestamp { timestamp: ts, line });
        } else {
            return Err(TimeseriesError::MalformedRow { line, reason: format!("timestamp {ts} is out of order") });
        }
    }

    let Some(start) = start else {
        return Err(TimeseriesError::EmptyInput);
    };
    let rem = prices.len() % super::HOURS_PER_DAY;
    if rem != 0 {
        let count = super::HOURS_PER_DAY - rem;
        return Err(TimeseriesError::MissingHours { from: expected, count, line: 0 });
    }
    let series = PriceSeries::new(city_id, start.date(), prices)?;
    Ok((series, warnings))
}

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    TIMESTAMP_FORMATS.iter().find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

/// 02:00 on the second Sunday of March (US rule since 2007).
fn is_spring_forward_hour(ts: NaiveDateTime) -> bool {
    let Some(march) = NaiveDate::from_ymd_opt(ts.year(), 3, 1) else { return false };
    let second_sunday = first_weekday_on_or_after(march, Weekday::Sun) + Duration::days(7);
    ts.date() == second_sunday && ts.hour() == 2
}

/// 01:00 on the first Sunday of November, which local clocks show twice.
fn is_fall_back_hour(ts: NaiveDateTime) -> bool {
    let Some(nov) = NaiveDate::from_ymd_opt(ts.year(), 11, 1) else { return false };
    ts.date() == first_weekday_on_or_after(nov, Weekday::Sun) && ts.hour() == 1
}

/// Serializes a series in the canonical form accepted by [`parse_price_csv`].
///
/// Prices use the shortest decimal that round-trips, so parse → write is
/// byte-stable for files produced here.
pub fn write_price_csv(series: &PriceSeries) -> String {
    let mut out = String::with_capacity(series.len() * 32);
    out.push_str(PRICE_CSV_HEADER);
    out.push('\n');
    for (i, p) in series.prices().iter().enumerate() {
        let _ = writeln!(out, "{},{}", series.timestamp(i).format("%Y-%m-%dT%H:%M:%S"), p);
    }
    out
}
