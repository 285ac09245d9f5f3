//! Hourly time series for customer meters and the system feeder.
//!
//! Both types store a dense hour-aligned vector starting at `start`; gaps are
//! `NaN` until the cleaning stage fills them. Timestamps are timezone-naive
//! local hours on a uniform calendar.

use chrono::{NaiveDate, NaiveDateTime, TimeDelta, Timelike};

use crate::calendar::MonthKey;

/// One customer's hourly interval consumption in kWh.
#[derive(Debug, Clone, PartialEq)]
pub struct MeterSeries {
    pub customer_id: String,
    start: NaiveDateTime,
    values: Vec<f64>,
}

/// System-level (SCADA) hourly load in kW.
#[derive(Debug, Clone, PartialEq)]
pub struct FeederSeries {
    start: NaiveDateTime,
    values: Vec<f64>,
}

/// Shared dense-hourly behavior.
pub trait HourlySeries {
    fn start(&self) -> NaiveDateTime;
    fn values(&self) -> &[f64];
    fn values_mut(&mut self) -> &mut [f64];

    fn len(&self) -> usize {
        self.values().len()
    }

    fn is_empty(&self) -> bool {
        self.values().is_empty()
    }

    fn end(&self) -> NaiveDateTime {
        self.start() + TimeDelta::hours(self.len() as i64 - 1)
    }

    /// Index of an instant within the series, if in range.
    fn index_of(&self, t: NaiveDateTime) -> Option<usize> {
        let delta = t - self.start();
        let hours = delta.num_hours();
        if hours < 0 || delta != TimeDelta::hours(hours) {
            return None;
        }
        let idx = hours as usize;
        (idx < self.len()).then_some(idx)
    }

    /// Value at an instant; `None` when out of range or not recorded.
    fn value_at(&self, t: NaiveDateTime) -> Option<f64> {
        let idx = self.index_of(t)?;
        let v = self.values()[idx];
        (!v.is_nan()).then_some(v)
    }

    fn timestamp_of(&self, idx: usize) -> NaiveDateTime {
        self.start() + TimeDelta::hours(idx as i64)
    }

    /// Fraction of hours between start and end that hold a value.
    fn coverage(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let present = self.values().iter().filter(|v| !v.is_nan()).count();
        present as f64 / self.len() as f64
    }

    /// The 24 values of `date`, if the whole day lies in range and every hour
    /// is present.
    fn complete_day(&self, date: NaiveDate) -> Option<[f64; 24]> {
        let day_start = date.and_hms_opt(0, 0, 0).unwrap();
        let first = self.index_of(day_start)?;
        if first + 24 > self.len() {
            return None;
        }
        let mut out = [0.0; 24];
        for (h, slot) in out.iter_mut().enumerate() {
            let v = self.values()[first + h];
            if v.is_nan() {
                return None;
            }
            *slot = v;
        }
        Some(out)
    }

    /// Dates touched by the series, first and last possibly partial.
    fn dates(&self) -> Vec<NaiveDate> {
        if self.is_empty() {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut d = self.start().date();
        let last = self.end().date();
        while d <= last {
            out.push(d);
            d = d.succ_opt().unwrap();
        }
        out
    }

    /// Calendar months touched by the series.
    fn months(&self) -> Vec<MonthKey> {
        if self.is_empty() {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut m = MonthKey::of(self.start().date());
        let last = MonthKey::of(self.end().date());
        while m <= last {
            out.push(m);
            m = m.next();
        }
        out
    }

    /// Hour-of-day and value of the maximum over `date`, over present hours
    /// only; ties break to the earliest hour. `None` if no hour is present.
    fn daily_argmax(&self, date: NaiveDate) -> Option<(u32, f64)> {
        let mut best: Option<(u32, f64)> = None;
        for h in 0..24 {
            let t = date.and_hms_opt(h, 0, 0).unwrap();
            if let Some(v) = self.value_at(t) {
                match best {
                    Some((_, bv)) if v <= bv => {}
                    _ => best = Some((h, v)),
                }
            }
        }
        best
    }

    /// Instant and value of the maximum over a month; ties break earliest.
    fn monthly_argmax(&self, month: MonthKey) -> Option<(NaiveDateTime, f64)> {
        let mut best: Option<(NaiveDateTime, f64)> = None;
        let mut date = month.first_day();
        for _ in 0..month.days() {
            for h in 0..24 {
                let t = date.and_hms_opt(h, 0, 0).unwrap();
                if let Some(v) = self.value_at(t) {
                    match best {
                        Some((_, bv)) if v <= bv => {}
                        _ => best = Some((t, v)),
                    }
                }
            }
            date = date.succ_opt().unwrap();
        }
        best
    }
}

impl MeterSeries {
    /// Builds a series from (timestamp, kWh) samples. Timestamps are
    /// truncated to the hour; multiple samples within an hour are summed, so
    /// sub-hourly input aggregates to hourly on entry.
    pub fn from_samples(customer_id: impl Into<String>, samples: &[(NaiveDateTime, f64)]) -> Self {
        let (start, values) = dense_from_samples(samples);
        MeterSeries {
            customer_id: customer_id.into(),
            start,
            values,
        }
    }

    pub fn from_parts(
        customer_id: impl Into<String>,
        start: NaiveDateTime,
        values: Vec<f64>,
    ) -> Self {
        MeterSeries {
            customer_id: customer_id.into(),
            start,
            values,
        }
    }
}

impl FeederSeries {
    pub fn from_samples(samples: &[(NaiveDateTime, f64)]) -> Self {
        let (start, values) = dense_from_samples(samples);
        FeederSeries { start, values }
    }

    pub fn from_parts(start: NaiveDateTime, values: Vec<f64>) -> Self {
        FeederSeries { start, values }
    }
}

impl HourlySeries for MeterSeries {
    fn start(&self) -> NaiveDateTime {
        self.start
    }
    fn values(&self) -> &[f64] {
        &self.values
    }
    fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

impl HourlySeries for FeederSeries {
    fn start(&self) -> NaiveDateTime {
        self.start
    }
    fn values(&self) -> &[f64] {
        &self.values
    }
    fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

fn truncate_to_hour(t: NaiveDateTime) -> NaiveDateTime {
    t.with_minute(0)
        .and_then(|t| t.with_second(0))
        .and_then(|t| t.with_nanosecond(0))
        .unwrap()
}

fn dense_from_samples(samples: &[(NaiveDateTime, f64)]) -> (NaiveDateTime, Vec<f64>) {
    if samples.is_empty() {
        let epoch = NaiveDate::from_ymd_opt(1970, 1, 1)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap();
        return (epoch, Vec::new());
    }
    let start = truncate_to_hour(samples.iter().map(|(t, _)| *t).min().unwrap());
    let end = truncate_to_hour(samples.iter().map(|(t, _)| *t).max().unwrap());
    let n = (end - start).num_hours() as usize + 1;
    let mut values = vec![f64::NAN; n];
    for (t, v) in samples {
        let idx = (truncate_to_hour(*t) - start).num_hours() as usize;
        if values[idx].is_nan() {
            values[idx] = *v;
        } else {
            values[idx] += *v;
        }
    }
    (start, values)
}
