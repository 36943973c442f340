//! Table writers. Numbers use `f64`'s shortest round-trip formatting, lines
//! end in LF, and row order is fixed by the caller, so identical inputs give
//! identical bytes.

use std::fs;
use std::path::Path;

use serde::Serialize;
use v2g_core::{AnnualResult, UserProfile};

use crate::CliError;

pub const RESULT_HEADER: [&str; 12] = ["user_id", "mode", "p", "revenue", "energy_cost", "deg_cost", "net", "kwh_sold", "kwh_bought", "final_q", "n_cyc", "savings"];

pub const PROFILE_HEADER: [&str; 12] = [
    "user_id",
    "rng_seed",
    "commute_distance_miles",
    "commute_time_hours",
    "work_start_hour",
    "weekly_hours",
    "daily_work_hours",
    "vacation_weeks",
    "vacation_start_week",
    "ev_model",
    "ev_capacity_kwh",
    "ev_range_miles",
];

pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn result_row(user_id: usize, r: &AnnualResult, savings: f64) -> Vec<String> {
    vec![
        user_id.to_string(),
        r.mode.to_string(),
        r.selling_price.map(num).unwrap_or_default(),
        num(r.revenue),
        num(r.energy_cost),
        num(r.deg_cost),
        num(r.net),
        num(r.kwh_sold),
        num(r.kwh_bought),
        num(r.final_q),
        num(r.n_cyc),
        num(savings),
    ]
}

pub fn profile_row(user_id: usize, u: &UserProfile) -> Vec<String> {
    vec![
        user_id.to_string(),
        u.rng_seed.to_string(),
        num(u.commute_distance_miles),
        num(u.commute_time_hours),
        u.work_start_hour.to_string(),
        num(u.weekly_hours),
        u.daily_work_hours().to_string(),
        u.vacation_weeks.to_string(),
        u.vacation_start_week.to_string(),
        u.ev_model.clone(),
        num(u.ev_capacity_kwh),
        num(u.ev_range_miles),
    ]
}

/// Renders a header and rows as CSV text.
pub fn csv_string<I>(header: &[&str], rows: I) -> Result<String, CliError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Runtime(e.to_string());
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(&row).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Runtime(e.to_string()))
}

pub fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    write_text(path, &csv_string(header, rows)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    log::info!("wrote {}", path.display());
    Ok(())
}
