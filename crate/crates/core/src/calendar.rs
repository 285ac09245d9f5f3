//! Seasons, month keys, and the month-to-season calendar.

use std::fmt;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the four seasons a calendar month is assigned to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Season {
    Spring,
    Summer,
    Autumn,
    Winter,
}

impl Season {
    pub const ALL: [Season; 4] = [
        Season::Spring,
        Season::Summer,
        Season::Autumn,
        Season::Winter,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Season::Spring => "spring",
            Season::Summer => "summer",
            Season::Autumn => "autumn",
            Season::Winter => "winter",
        }
    }
}

impl fmt::Display for Season {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Fixed-order container with one slot per season.
///
/// Serializes with a stable field order, which keeps every artifact that
/// contains per-season data byte-reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerSeason<T> {
    pub spring: T,
    pub summer: T,
    pub autumn: T,
    pub winter: T,
}

impl<T> PerSeason<T> {
    pub fn get(&self, season: Season) -> &T {
        match season {
            Season::Spring => &self.spring,
            Season::Summer => &self.summer,
            Season::Autumn => &self.autumn,
            Season::Winter => &self.winter,
        }
    }

    pub fn get_mut(&mut self, season: Season) -> &mut T {
        match season {
            Season::Spring => &mut self.spring,
            Season::Summer => &mut self.summer,
            Season::Autumn => &mut self.autumn,
            Season::Winter => &mut self.winter,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Season, &T)> {
        Season::ALL.iter().map(move |&s| (s, self.get(s)))
    }

    pub fn from_fn(mut f: impl FnMut(Season) -> T) -> Self {
        PerSeason {
            spring: f(Season::Spring),
            summer: f(Season::Summer),
            autumn: f(Season::Autumn),
            winter: f(Season::Winter),
        }
    }
}

impl<T: Default> Default for PerSeason<T> {
    fn default() -> Self {
        PerSeason::from_fn(|_| T::default())
    }
}

/// Calendar month identified by year and month number (1-12).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MonthKey {
    pub year: i32,
    pub month: u32,
}

impl MonthKey {
    pub fn new(year: i32, month: u32) -> Self {
        debug_assert!((1..=12).contains(&month));
        MonthKey { year, month }
    }

    pub fn of(date: NaiveDate) -> Self {
        MonthKey {
            year: date.year(),
            month: date.month(),
        }
    }

    /// Number of days in this calendar month.
    pub fn days(self) -> u32 {
        let first = NaiveDate::from_ymd_opt(self.year, self.month, 1).expect("valid month");
        let next = if self.month == 12 {
            NaiveDate::from_ymd_opt(self.year + 1, 1, 1)
        } else {
            NaiveDate::from_ymd_opt(self.year, self.month + 1, 1)
        }
        .expect("valid month");
        (next - first).num_days() as u32
    }

    pub fn first_day(self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year, self.month, 1).expect("valid month")
    }

    pub fn next(self) -> Self {
        if self.month == 12 {
            MonthKey::new(self.year + 1, 1)
        } else {
            MonthKey::new(self.year, self.month + 1)
        }
    }
}

impl fmt::Display for MonthKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

/// Maps each calendar month to a season.
///
/// The default follows the meteorological convention: Mar-May spring,
/// Jun-Aug summer, Sep-Nov autumn, Dec-Feb winter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeasonCalendar {
    /// `by_month[m - 1]` is the season of month `m`.
    by_month: [Season; 12],
}

impl Default for SeasonCalendar {
    fn default() -> Self {
        use Season::*;
        SeasonCalendar {
            by_month: [
                Winter, Winter, Spring, Spring, Spring, Summer, Summer, Summer, Autumn, Autumn,
                Autumn, Winter,
            ],
        }
    }
}

impl SeasonCalendar {
    /// Builds a calendar from explicit month lists. Every month 1-12 must be
    /// assigned to exactly one season.
    pub fn from_month_lists(
        spring: &[u32],
        summer: &[u32],
        autumn: &[u32],
        winter: &[u32],
    ) -> Result<Self> {
        let mut by_month = [None; 12];
        for (months, season) in [
            (spring, Season::Spring),
            (summer, Season::Summer),
            (autumn, Season::Autumn),
            (winter, Season::Winter),
        ] {
            for &m in months {
                if !(1..=12).contains(&m) {
                    return Err(Error::InvalidConfig(format!("month {m} out of range 1-12")));
                }
                let slot = &mut by_month[(m - 1) as usize];
                if slot.is_some() {
                    return Err(Error::InvalidConfig(format!(
                        "month {m} assigned to more than one season"
                    )));
                }
                *slot = Some(season);
            }
        }
        let mut filled = [Season::Winter; 12];
        for (i, slot) in by_month.iter().enumerate() {
            match slot {
                Some(s) => filled[i] = *s,
                None => {
                    return Err(Error::InvalidConfig(format!(
                        "month {} not assigned to any season",
                        i + 1
                    )))
                }
            }
        }
        Ok(SeasonCalendar { by_month: filled })
    }

    pub fn season_of_month(&self, month: u32) -> Season {
        self.by_month[(month - 1) as usize]
    }

    pub fn season_of(&self, date: NaiveDate) -> Season {
        self.season_of_month(date.month())
    }

    pub fn months_of(&self, season: Season) -> Vec<u32> {
        (1..=12)
            .filter(|&m| self.season_of_month(m) == season)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_calendar_partitions_the_year() {
        let cal = SeasonCalendar::default();
        let mut count = 0;
        for season in Season::ALL {
            count += cal.months_of(season).len();
        }
        assert_eq!(count, 12);
        assert_eq!(cal.season_of_month(7), Season::Summer);
        assert_eq!(cal.season_of_month(12), Season::Winter);
        assert_eq!(cal.season_of_month(3), Season::Spring);
        assert_eq!(cal.season_of_month(10), Season::Autumn);
    }

    #[test]
    fn month_lists_must_cover_every_month_once() {
        let err = SeasonCalendar::from_month_lists(&[3, 4], &[6, 7, 8], &[9, 10, 11], &[12, 1, 2]);
        assert!(err.is_err());
        let err =
            SeasonCalendar::from_month_lists(&[3, 4, 5, 6], &[6, 7, 8], &[9, 10, 11], &[12, 1, 2]);
        assert!(err.is_err());
        let ok =
            SeasonCalendar::from_month_lists(&[3, 4, 5], &[6, 7, 8], &[9, 10, 11], &[12, 1, 2])
                .unwrap();
        assert_eq!(ok, SeasonCalendar::default());
    }

    #[test]
    fn month_key_days() {
        assert_eq!(MonthKey::new(2021, 4).days(), 30);
        assert_eq!(MonthKey::new(2021, 2).days(), 28);
        assert_eq!(MonthKey::new(2020, 2).days(), 29);
        assert_eq!(MonthKey::new(2021, 12).days(), 31);
        assert_eq!(MonthKey::new(2021, 12).next(), MonthKey::new(2022, 1));
    }
}
