//! Day-by-day calendar walk. Slow, but it shares no arithmetic with the
//! closed-form conversion it checks: it only knows month lengths, the two
//! leap rules, and one anchor date.

use std::collections::HashMap;

pub type Ymd = (i32, u32, u32);

fn gregorian_leap(y: i32) -> bool {
    (y % 4 == 0 && y % 100 != 0) || y % 400 == 0
}

fn gregorian_month_len(y: i32, m: u32) -> u32 {
    match m {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if gregorian_leap(y) => 29,
        2 => 28,
        _ => unreachable!(),
    }
}

/// Classic 33-year cycle: leap when the year's position in the cycle is one
/// of 1, 5, 9, 13, 17, 22, 26, 30.
pub fn jalali_leap(y: i32) -> bool {
    matches!(y.rem_euclid(33), 1 | 5 | 9 | 13 | 17 | 22 | 26 | 30)
}

fn jalali_month_len(y: i32, m: u32) -> u32 {
    match m {
        1..=6 => 31,
        7..=11 => 30,
        12 if jalali_leap(y) => 30,
        12 => 29,
        _ => unreachable!(),
    }
}

fn next_g((y, m, d): Ymd) -> Ymd {
    if d < gregorian_month_len(y, m) {
        (y, m, d + 1)
    } else if m < 12 {
        (y, m + 1, 1)
    } else {
        (y + 1, 1, 1)
    }
}

fn next_j((y, m, d): Ymd) -> Ymd {
    if d < jalali_month_len(y, m) {
        (y, m, d + 1)
    } else if m < 12 {
        (y, m + 1, 1)
    } else {
        (y + 1, 1, 1)
    }
}

fn prev_g((y, m, d): Ymd) -> Ymd {
    if d > 1 {
        (y, m, d - 1)
    } else if m > 1 {
        (y, m - 1, gregorian_month_len(y, m - 1))
    } else {
        (y - 1, 12, 31)
    }
}

fn prev_j((y, m, d): Ymd) -> Ymd {
    if d > 1 {
        (y, m, d - 1)
    } else if m > 1 {
        (y, m - 1, jalali_month_len(y, m - 1))
    } else {
        (y - 1, 12, jalali_month_len(y - 1, 12))
    }
}

/// Paired Gregorian/Jalali tables for every day of 1900-01-01..=2100-12-31,
/// walked outward from the anchor 1970-01-01 = 1348-10-11.
pub struct CalendarTable {
    to_jalali: HashMap<Ymd, Ymd>,
    to_gregorian: HashMap<Ymd, Ymd>,
}

impl CalendarTable {
    pub fn build() -> Self {
        let anchor_g = (1970, 1, 1);
        let anchor_j = (1348, 10, 11);
        let mut to_jalali = HashMap::new();
        let mut to_gregorian = HashMap::new();

        let (mut g, mut j) = (anchor_g, anchor_j);
        while g.0 <= 2100 {
            to_jalali.insert(g, j);
            to_gregorian.insert(j, g);
            g = next_g(g);
            j = next_j(j);
        }
        let (mut g, mut j) = (prev_g(anchor_g), prev_j(anchor_j));
        while g.0 >= 1900 {
            to_jalali.insert(g, j);
            to_gregorian.insert(j, g);
            g = prev_g(g);
            j = prev_j(j);
        }
        Self {
            to_jalali,
            to_gregorian,
        }
    }

    pub fn jalali_of(&self, g: Ymd) -> Option<Ymd> {
        self.to_jalali.get(&g).copied()
    }

    pub fn gregorian_of(&self, j: Ymd) -> Option<Ymd> {
        self.to_gregorian.get(&j).copied()
    }

    pub fn days(&self) -> impl Iterator<Item = (Ymd, Ymd)> + '_ {
        self.to_jalali.iter().map(|(g, j)| (*g, *j))
    }
}
