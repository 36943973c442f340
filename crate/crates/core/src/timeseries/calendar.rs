use std::collections::BTreeSet;

use chrono::{Datelike, Duration, NaiveDate, Weekday};

use super::{first_weekday_on_or_after, TimeseriesError};

/// Working days of one calendar year: Monday to Friday minus observed US
/// federal holidays.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkCalendar {
    year: i32,
    holidays: BTreeSet<NaiveDate>,
}

impl WorkCalendar {
    /// Calendar with the federal holidays observed in `year`.
    pub fn us_federal(year: i32) -> Self {
        Self { year, holidays: us_federal_holidays(year) }
    }

    /// Calendar with an explicit holiday set. Dates outside `year` are rejected.
    pub fn with_holidays(year: i32, holidays: impl IntoIterator<Item = NaiveDate>) -> Result<Self, TimeseriesError> {
        let holidays: BTreeSet<NaiveDate> = holidays.into_iter().collect();
        if let Some(&date) = holidays.iter().find(|d| d.year() != year) {
            return Err(TimeseriesError::DateOutOfRange { date, year });
        }
        Ok(Self { year, holidays })
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn holidays(&self) -> &BTreeSet<NaiveDate> {
        &self.holidays
    }

    pub fn is_working_day(&self, date: NaiveDate) -> Result<bool, TimeseriesError> {
        if date.year() != self.year {
            return Err(TimeseriesError::DateOutOfRange { date, year: self.year });
        }
        Ok(!matches!(date.weekday(), Weekday::Sat | Weekday::Sun) && !self.holidays.contains(&date))
    }

    pub fn first_day(&self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year, 1, 1).unwrap()
    }

    pub fn days(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        let first = self.first_day();
        (0..super::days_in_year(self.year) as i64).map(move |d| first + Duration::days(d))
    }

    pub fn working_days(&self) -> usize {
        self.days().filter(|&d| self.is_working_day(d).unwrap()).count()
    }
}

/// Observed federal holidays falling inside `year` (5 U.S.C. 6103 rules).
///
/// Fixed-date holidays landing on a Saturday are observed the Friday before,
/// on a Sunday the Monday after. A Saturday New Year's Day of `year + 1` is
/// therefore observed on 31 December of `year`. Juneteenth counts from 2021.
pub fn us_federal_holidays(year: i32) -> BTreeSet<NaiveDate> {
    let ymd = |m, d| NaiveDate::from_ymd_opt(year, m, d).unwrap();
    let nth = |m, wd, n: i64| first_weekday_on_or_after(ymd(m, 1), wd) + Duration::days(7 * (n - 1));
    let last_monday_of_may = first_weekday_on_or_after(ymd(5, 25), Weekday::Mon);

    let mut fixed = vec![ymd(1, 1), ymd(7, 4), ymd(11, 11), ymd(12, 25)];
    if year >= 2021 {
        fixed.push(ymd(6, 19));
    }
    if let Some(next_new_year) = NaiveDate::from_ymd_opt(year + 1, 1, 1) {
        fixed.push(next_new_year);
    }

    let mut out: BTreeSet<NaiveDate> = fixed.into_iter().map(observed).filter(|d| d.year() == year).collect();
    out.extend([
        nth(1, Weekday::Mon, 3),  // Birthday of Martin Luther King, Jr.
        nth(2, Weekday::Mon, 3),  // Washington's Birthday
        last_monday_of_may,       // Memorial Day
        nth(9, Weekday::Mon, 1),  // Labor Day
        nth(10, Weekday::Mon, 2), // Columbus Day
        nth(11, Weekday::Thu, 4), // Thanksgiving Day
    ]);
    out
}

fn observed(date: NaiveDate) -> NaiveDate {
    match date.weekday() {
        Weekday::Sat => date - Duration::days(1),
        Weekday::Sun => date + Duration::days(1),
        _ => date,
    }
}
