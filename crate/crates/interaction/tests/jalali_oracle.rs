use canesim_interaction::jalali::{
    gregorian_to_jalali, is_jalali_leap, jalali_month_length, jalali_of, jalali_to_gregorian, JalaliDate,
};
use canesim_testkit::calendar::CalendarTable;
use chrono::{Datelike, NaiveDate};
use proptest::prelude::*;
use std::sync::OnceLock;

fn table() -> &'static CalendarTable {
    static T: OnceLock<CalendarTable> = OnceLock::new();
    T.get_or_init(CalendarTable::build)
}

const REFERENCE_DATES: [(i32, u32, u32); 20] = [
    (1900, 1, 1),
    (1900, 3, 21),
    (1925, 3, 21),
    (1947, 3, 21),
    (1969, 12, 31),
    (1970, 1, 1),
    (1979, 2, 11),
    (1996, 3, 19),
    (1996, 3, 20),
    (2000, 2, 29),
    (2016, 3, 19),
    (2016, 3, 20),
    (2024, 3, 19),
    (2024, 3, 20),
    (2025, 3, 20),
    (2025, 3, 21),
    (2050, 3, 20),
    (2079, 3, 20),
    (2099, 12, 31),
    (2100, 12, 31),
];

#[test]
fn reference_dates_match_day_walk() {
    for (y, m, d) in REFERENCE_DATES {
        let j = gregorian_to_jalali(y, m, d).unwrap();
        assert_eq!(
            Some((j.year, j.month, j.day)),
            table().jalali_of((y, m, d)),
            "{y}-{m}-{d}"
        );
        let back = jalali_to_gregorian(j).unwrap();
        assert_eq!((back.year(), back.month(), back.day()), (y, m, d));
    }
    assert_eq!(gregorian_to_jalali(2024, 3, 20).unwrap().to_string(), "1403-01-01");
    assert_eq!(gregorian_to_jalali(2025, 3, 20).unwrap().to_string(), "1403-12-30");
}

#[test]
fn leap_boundaries() {
    for y in 1280..1480 {
        let len = jalali_month_length(y, 12).unwrap();
        assert_eq!(len == 30, is_jalali_leap(y), "{y}");
        if let Some(oracle) = table().gregorian_of((y, 12, len)) {
            let last = JalaliDate {
                year: y,
                month: 12,
                day: len,
            };
            let g = jalali_to_gregorian(last).unwrap();
            assert_eq!((g.year(), g.month(), g.day()), oracle);
            let next = jalali_of(g.succ_opt().unwrap());
            if let Ok(n) = next {
                assert_eq!((n.year, n.month, n.day), (y + 1, 1, 1));
            }
        }
    }
}

#[test]
fn every_day_matches_day_walk() {
    for (g, j) in table().days() {
        let ours = gregorian_to_jalali(g.0, g.1, g.2).unwrap();
        assert_eq!((ours.year, ours.month, ours.day), j);
    }
}

proptest! {
    #[test]
    fn round_trips(days in 0i64..73_414) {
        let g = NaiveDate::from_ymd_opt(1900, 1, 1).unwrap() + chrono::Days::new(days as u64);
        let j = jalali_of(g).unwrap();
        prop_assert_eq!(jalali_to_gregorian(j).unwrap(), g);
    }
}
