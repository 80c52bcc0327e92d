//! Gregorian and Jalali (Solar Hijri) dates via day numbers, using the
//! arithmetic 33-year leap cycle.

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::InteractionError;

pub const MIN_YEAR: i32 = 1900;
pub const MAX_YEAR: i32 = 2100;

const CYCLE_YEARS: i64 = 33;
const CYCLE_DAYS: i64 = 33 * 365 + 8;
const LEAP_POSITIONS: [i64; 8] = [1, 5, 9, 13, 17, 22, 26, 30];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct JalaliDate {
    pub year: i32,
    pub month: u32,
    pub day: u32,
}

pub const MONTH_NAMES: [&str; 12] = [
    "Farvardin",
    "Ordibehesht",
    "Khordad",
    "Tir",
    "Mordad",
    "Shahrivar",
    "Mehr",
    "Aban",
    "Azar",
    "Dey",
    "Bahman",
    "Esfand",
];

impl std::fmt::Display for JalaliDate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:04}-{:02}-{:02}", self.year, self.month, self.day)
    }
}

pub fn is_jalali_leap(year: i32) -> bool {
    LEAP_POSITIONS.contains(&(year as i64).rem_euclid(CYCLE_YEARS))
}

pub fn jalali_month_length(year: i32, month: u32) -> Option<u32> {
    match month {
        1..=6 => Some(31),
        7..=11 => Some(30),
        12 if is_jalali_leap(year) => Some(30),
        12 => Some(29),
        _ => None,
    }
}

/// Leap years among 1..year (exclusive), for year >= 1.
fn leaps_before(year: i64) -> i64 {
    let n = year - 1;
    let rem = n.rem_euclid(CYCLE_YEARS);
    8 * n.div_euclid(CYCLE_YEARS) + LEAP_POSITIONS.iter().filter(|&&p| p <= rem).count() as i64
}

/// Days from 1/1/1 of the Jalali era to the first day of `year`.
fn days_before_year(year: i64) -> i64 {
    365 * (year - 1) + leaps_before(year)
}

fn day_of_year(month: u32, day: u32) -> i64 {
    let m = month as i64;
    let before = if m <= 7 { 31 * (m - 1) } else { 186 + 30 * (m - 7) };
    before + day as i64 - 1
}

// 1970-01-01 is 11 Dey 1348.
fn unix_offset() -> i64 {
    days_before_year(1348) + day_of_year(10, 11)
}

fn jalali_era_day(d: JalaliDate) -> i64 {
    days_before_year(d.year as i64) + day_of_year(d.month, d.day)
}

fn unix_day(date: NaiveDate) -> i64 {
    let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid epoch");
    (date - epoch).num_days()
}

fn check_range(year: i32) -> Result<(), InteractionError> {
    if (MIN_YEAR..=MAX_YEAR).contains(&year) {
        Ok(())
    } else {
        Err(InteractionError::InvalidArgument(format!(
            "year {year} outside supported range {MIN_YEAR}-{MAX_YEAR}"
        )))
    }
}

pub fn gregorian_to_jalali(year: i32, month: u32, day: u32) -> Result<JalaliDate, InteractionError> {
    check_range(year)?;
    let date = NaiveDate::from_ymd_opt(year, month, day)
        .ok_or_else(|| InteractionError::InvalidArgument(format!("{year}-{month:02}-{day:02} is not a date")))?;
    Ok(jalali_from_era_day(unix_day(date) + unix_offset()))
}

fn jalali_from_era_day(era_day: i64) -> JalaliDate {
    let mut year = era_day.div_euclid(CYCLE_DAYS) * CYCLE_YEARS + 1;
    while days_before_year(year + 1) <= era_day {
        year += 1;
    }
    while days_before_year(year) > era_day {
        year -= 1;
    }
    let mut doy = era_day - days_before_year(year);
    let mut month = 1;
    loop {
        let len = jalali_month_length(year as i32, month).expect("month in range") as i64;
        if doy < len {
            break;
        }
        doy -= len;
        month += 1;
    }
    JalaliDate {
        year: year as i32,
        month,
        day: doy as u32 + 1,
    }
}

pub fn jalali_to_gregorian(date: JalaliDate) -> Result<NaiveDate, InteractionError> {
    let valid = jalali_month_length(date.year, date.month).is_some_and(|len| (1..=len).contains(&date.day));
    if !valid || date.year < 1 {
        return Err(InteractionError::InvalidArgument(format!(
            "{date} is not a Jalali date"
        )));
    }
    let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid epoch");
    let g = epoch + chrono::Duration::days(jalali_era_day(date) - unix_offset());
    check_range(g.year())?;
    Ok(g)
}

pub fn jalali_of(date: NaiveDate) -> Result<JalaliDate, InteractionError> {
    gregorian_to_jalali(date.year(), date.month(), date.day())
}
