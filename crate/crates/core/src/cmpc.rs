//! Coincident monthly peak contribution and peak-timing statistics.
//!
//! A customer's CMPC for a month is the average over days of their share of
//! the system load at each day's system peak hour:
//! `F = (1/n) * sum_d p(t_d) / P(t_d)`, where `t_d` is the hour of the
//! system's daily peak and `P(t_d)` its value. Days missing either meter or
//! feeder data are dropped from `n` rather than imputed.

use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::calendar::MonthKey;
use crate::error::{Error, Result};
use crate::par::maybe_par_map;
use crate::series::{FeederSeries, HourlySeries, MeterSeries};

/// CMPC of one customer for one month.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmpcRecord {
    pub customer_id: String,
    pub month: MonthKey,
    /// Dimensionless share; non-negative, and at most 1 when the customer
    /// never exceeds the system load at a peak hour.
    pub value: f64,
    /// Days with both meter and feeder data that entered the average.
    pub n_days: usize,
}

/// System peak of one day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DailyPeak {
    pub day: NaiveDate,
    /// Hour-of-day of the system peak; argmax ties break to the earliest hour.
    pub hour: u32,
    /// Peak value in kW; strictly positive wherever used as a denominator.
    pub value_kw: f64,
}

/// Empirical distribution of a customer's daily peak hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakTimingDistribution {
    pub customer_id: String,
    /// `probs[h]` is the fraction of days whose customer-level argmax hour is
    /// `h`; entries sum to 1.
    pub probs: [f64; 24],
}

impl PeakTimingDistribution {
    /// Shannon entropy (natural log) of the distribution.
    pub fn entropy(&self) -> f64 {
        self.probs
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.ln())
            .sum()
    }
}

/// Daily system peaks for one month. Days with no feeder data are skipped and
/// reported in `skipped`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthlyPeaks {
    pub month: MonthKey,
    pub peaks: Vec<DailyPeak>,
    pub skipped: Vec<NaiveDate>,
}

/// Finds the system peak hour and value for every day of `month`.
pub fn daily_peaks(feeder: &FeederSeries, month: MonthKey) -> MonthlyPeaks {
    let mut peaks = Vec::new();
    let mut skipped = Vec::new();
    let mut date = month.first_day();
    for _ in 0..month.days() {
        match feeder.daily_argmax(date) {
            Some((hour, value_kw)) => peaks.push(DailyPeak {
                day: date,
                hour,
                value_kw,
            }),
            None => skipped.push(date),
        }
        date = date.succ_opt().unwrap();
    }
    MonthlyPeaks {
        month,
        peaks,
        skipped,
    }
}

/// Computes one customer's CMPC over the given daily peaks.
///
/// Only days where the meter has a value at the peak hour contribute. Errors
/// when no day is usable or when any used peak value is not strictly positive.
pub fn compute_cmpc(meter: &MeterSeries, peaks: &MonthlyPeaks) -> Result<CmpcRecord> {
    if peaks.peaks.is_empty() {
        return Err(Error::InsufficientData {
            context: format!("compute_cmpc {} {}", meter.customer_id, peaks.month),
            needed: 1,
            got: 0,
        });
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for peak in &peaks.peaks {
        let t = peak.day.and_hms_opt(peak.hour, 0, 0).unwrap();
        if let Some(p) = meter.value_at(t) {
            if peak.value_kw <= 0.0 {
                return Err(Error::InvariantViolation(format!(
                    "system peak is {} kW (must be > 0) on {}",
                    peak.value_kw, peak.day
                )));
            }
            sum += p / peak.value_kw;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::InsufficientData {
            context: format!("compute_cmpc {} {}", meter.customer_id, peaks.month),
            needed: 1,
            got: 0,
        });
    }
    Ok(CmpcRecord {
        customer_id: meter.customer_id.clone(),
        month: peaks.month,
        value: sum / n as f64,
        n_days: n,
    })
}

/// CMPC for every customer and every month the feeder covers, in parallel
/// per customer. Customers with no usable days in a month are skipped.
pub fn compute_all(meters: &[MeterSeries], feeder: &FeederSeries) -> Vec<CmpcRecord> {
    let months = feeder.months();
    let monthly_peaks: Vec<MonthlyPeaks> = months.iter().map(|&m| daily_peaks(feeder, m)).collect();
    let per_customer: Vec<Vec<CmpcRecord>> = maybe_par_map(meters, |meter| {
        monthly_peaks
            .iter()
            .filter_map(|peaks| compute_cmpc(meter, peaks).ok())
            .collect()
    });
    per_customer.into_iter().flatten().collect()
}

/// Empirical peak-timing distribution over the customer's complete days among
/// `dates`. Argmax ties break to the earliest hour.
pub fn peak_timing_distribution(
    meter: &MeterSeries,
    dates: &[NaiveDate],
) -> Result<PeakTimingDistribution> {
    let mut counts = [0usize; 24];
    let mut n = 0usize;
    for &date in dates {
        if meter.complete_day(date).is_some() {
            if let Some((hour, _)) = meter.daily_argmax(date) {
                counts[hour as usize] += 1;
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::InsufficientData {
            context: format!("peak_timing_distribution {}", meter.customer_id),
            needed: 1,
            got: 0,
        });
    }
    let mut probs = [0.0; 24];
    for (p, c) in probs.iter_mut().zip(counts) {
        *p = c as f64 / n as f64;
    }
    Ok(PeakTimingDistribution {
        customer_id: meter.customer_id.clone(),
        probs,
    })
}

/// Fraction of customers whose monthly peak instant coincides with the
/// feeder's monthly peak instant.
pub fn coincidence_rate(meters: &[MeterSeries], feeder: &FeederSeries, month: MonthKey) -> f64 {
    let Some((system_peak_at, _)) = feeder.monthly_argmax(month) else {
        return 0.0;
    };
    let mut counted = 0usize;
    let mut coincident = 0usize;
    for meter in meters {
        if let Some((t, _)) = meter.monthly_argmax(month) {
            counted += 1;
            if t == system_peak_at {
                coincident += 1;
            }
        }
    }
    if counted == 0 {
        0.0
    } else {
        coincident as f64 / counted as f64
    }
}

/// Writes `cmpc.csv` with header `customer_id,year,month,cmpc,n_days`.
pub fn write_cmpc_csv<W: Write>(writer: W, records: &[CmpcRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["customer_id", "year", "month", "cmpc", "n_days"])?;
    for r in records {
        w.write_record([
            r.customer_id.as_str(),
            &r.month.year.to_string(),
            &r.month.month.to_string(),
            &r.value.to_string(),
            &r.n_days.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `cmpc.csv` back into records.
pub fn read_cmpc_csv<R: std::io::Read>(reader: R) -> Result<Vec<CmpcRecord>> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let mut out = Vec::new();
    for record in csv.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let parse_err = |msg: String| Error::MalformedRecord { line, msg };
        out.push(CmpcRecord {
            customer_id: record[0].to_string(),
            month: MonthKey::new(
                record[1]
                    .parse()
                    .map_err(|e| parse_err(format!("bad year: {e}")))?,
                record[2]
                    .parse()
                    .map_err(|e| parse_err(format!("bad month: {e}")))?,
            ),
            value: record[3]
                .parse()
                .map_err(|e| parse_err(format!("bad cmpc: {e}")))?,
            n_days: record[4]
                .parse()
                .map_err(|e| parse_err(format!("bad n_days: {e}")))?,
        });
    }
    Ok(out)
}
