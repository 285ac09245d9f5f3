//! Parsing, validation, cleaning, and calendar partitioning of raw meter and
//! SCADA data.
//!
//! Cleaning marks samples whose z-score magnitude exceeds a threshold
//! (default 5, computed against the mean and standard deviation of the full
//! raw series) as erroneous and replaces them by linear interpolation between
//! the nearest surviving neighbors; missing hours are filled the same way and
//! boundary gaps take the nearest surviving value.

use std::io::{Read, Write};
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::calendar::{MonthKey, PerSeason, Season, SeasonCalendar};
use crate::error::{Error, Result};
use crate::par::maybe_par_map;
use crate::series::{FeederSeries, HourlySeries, MeterSeries};

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

/// One validated row of the meter CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct RawReading {
    pub customer_id: String,
    pub timestamp: NaiveDateTime,
    pub kwh: f64,
}

/// Per-series outcome of [`clean_series`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanReport {
    pub customer_id: String,
    /// Samples flagged erroneous by the z-score rule and replaced.
    pub n_replaced: usize,
    /// Missing hours filled by interpolation.
    pub n_filled: usize,
}

/// One customer's data restricted to a season.
#[derive(Debug, Clone, PartialEq)]
pub struct SeasonalCustomer {
    pub customer_id: String,
    /// Complete days (24 present hours) falling in the season.
    pub days: Vec<(NaiveDate, [f64; 24])>,
    /// Arithmetic mean over `days`, hour by hour.
    pub avg_profile: [f64; 24],
}

/// All customers' seasonal slices plus the feeder restricted to the season.
#[derive(Debug, Clone, PartialEq)]
pub struct SeasonalDataset {
    pub season: Season,
    pub customers: Vec<SeasonalCustomer>,
}

impl SeasonalDataset {
    pub fn profiles(&self) -> Vec<[f64; 24]> {
        self.customers.iter().map(|c| c.avg_profile).collect()
    }

    pub fn customer_ids(&self) -> Vec<String> {
        self.customers
            .iter()
            .map(|c| c.customer_id.clone())
            .collect()
    }
}

/// Output of [`split_seasons`].
#[derive(Debug, Clone)]
pub struct SeasonalSplit {
    pub datasets: PerSeason<SeasonalDataset>,
    pub feeders: PerSeason<FeederSeries>,
    /// Customers excluded from a season for having zero complete days there.
    pub warnings: Vec<(String, Season)>,
}

/// Monthly billing total for one customer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlyBilling {
    pub customer_id: String,
    pub month: MonthKey,
    pub energy_kwh: f64,
}

/// Parses the meter CSV (`customer_id,timestamp,kwh`).
///
/// Every well-formed row is returned in input order. A malformed row, a
/// duplicate (customer, timestamp) pair, or an out-of-order timestamp within
/// a customer aborts with an error citing the line number.
pub fn parse_readings<R: Read>(reader: R) -> Result<Vec<RawReading>> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    {
        let headers = csv.headers()?;
        let expect = ["customer_id", "timestamp", "kwh"];
        let got: Vec<&str> = headers.iter().collect();
        if got != expect {
            return Err(Error::MalformedRecord {
                line: 1,
                msg: format!(
                    "expected header customer_id,timestamp,kwh, found {}",
                    got.join(",")
                ),
            });
        }
    }
    let mut out: Vec<RawReading> = Vec::new();
    // last seen timestamp per customer, to enforce strictly increasing order
    let mut last: std::collections::HashMap<String, NaiveDateTime> =
        std::collections::HashMap::new();
    for record in csv.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 3 {
            return Err(Error::MalformedRecord {
                line,
                msg: format!("expected 3 fields, found {}", record.len()),
            });
        }
        let customer_id = record[0].to_string();
        if customer_id.is_empty() {
            return Err(Error::MalformedRecord {
                line,
                msg: "empty customer_id".into(),
            });
        }
        let timestamp =
            NaiveDateTime::parse_from_str(&record[1], TIMESTAMP_FORMAT).map_err(|e| {
                Error::MalformedRecord {
                    line,
                    msg: format!("bad timestamp {:?}: {e}", &record[1]),
                }
            })?;
        let kwh: f64 = record[2].parse().map_err(|e| Error::MalformedRecord {
            line,
            msg: format!("bad kwh {:?}: {e}", &record[2]),
        })?;
        if !kwh.is_finite() || kwh < 0.0 {
            return Err(Error::MalformedRecord {
                line,
                msg: format!("kwh must be finite and non-negative, found {kwh}"),
            });
        }
        match last.get(&customer_id) {
            Some(prev) if *prev == timestamp => {
                return Err(Error::DuplicateReading {
                    customer: customer_id,
                    timestamp: timestamp.format(TIMESTAMP_FORMAT).to_string(),
                    line,
                })
            }
            Some(prev) if *prev > timestamp => {
                return Err(Error::OutOfOrder {
                    customer: customer_id,
                    timestamp: timestamp.format(TIMESTAMP_FORMAT).to_string(),
                    line,
                })
            }
            _ => {}
        }
        last.insert(customer_id.clone(), timestamp);
        out.push(RawReading {
            customer_id,
            timestamp,
            kwh,
        });
    }
    if out.is_empty() {
        return Err(Error::DatasetEmpty("no data rows in meter CSV".into()));
    }
    Ok(out)
}

/// Parses the SCADA CSV (`timestamp,system_kw`).
pub fn parse_feeder<R: Read>(reader: R) -> Result<FeederSeries> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    {
        let headers = csv.headers()?;
        let got: Vec<&str> = headers.iter().collect();
        if got != ["timestamp", "system_kw"] {
            return Err(Error::MalformedRecord {
                line: 1,
                msg: format!(
                    "expected header timestamp,system_kw, found {}",
                    got.join(",")
                ),
            });
        }
    }
    let mut samples = Vec::new();
    let mut prev: Option<NaiveDateTime> = None;
    for record in csv.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let timestamp =
            NaiveDateTime::parse_from_str(&record[0], TIMESTAMP_FORMAT).map_err(|e| {
                Error::MalformedRecord {
                    line,
                    msg: format!("bad timestamp {:?}: {e}", &record[0]),
                }
            })?;
        let kw: f64 = record[1].parse().map_err(|e| Error::MalformedRecord {
            line,
            msg: format!("bad system_kw {:?}: {e}", &record[1]),
        })?;
        if !kw.is_finite() {
            return Err(Error::MalformedRecord {
                line,
                msg: format!("system_kw must be finite, found {kw}"),
            });
        }
        match prev {
            Some(p) if p == timestamp => {
                return Err(Error::DuplicateReading {
                    customer: "feeder".into(),
                    timestamp: timestamp.format(TIMESTAMP_FORMAT).to_string(),
                    line,
                })
            }
            Some(p) if p > timestamp => {
                return Err(Error::OutOfOrder {
                    customer: "feeder".into(),
                    timestamp: timestamp.format(TIMESTAMP_FORMAT).to_string(),
                    line,
                })
            }
            _ => {}
        }
        prev = Some(timestamp);
        samples.push((timestamp, kw));
    }
    if samples.is_empty() {
        return Err(Error::DatasetEmpty("no data rows in SCADA CSV".into()));
    }
    Ok(FeederSeries::from_samples(&samples))
}

/// Groups parsed readings into one dense series per customer, in order of
/// first appearance.
pub fn build_series(readings: &[RawReading]) -> Vec<MeterSeries> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: std::collections::HashMap<String, Vec<(NaiveDateTime, f64)>> =
        std::collections::HashMap::new();
    for r in readings {
        let entry = groups.entry(r.customer_id.clone()).or_insert_with(|| {
            order.push(r.customer_id.clone());
            Vec::new()
        });
        entry.push((r.timestamp, r.kwh));
    }
    order
        .into_iter()
        .map(|id| {
            let samples = &groups[&id];
            MeterSeries::from_samples(id.clone(), samples)
        })
        .collect()
}

/// Z-score threshold above which a sample counts as erroneous.
pub const DEFAULT_Z_THRESHOLD: f64 = 5.0;

fn clean_values(values: &mut [f64], z_threshold: f64) -> Result<(usize, usize)> {
    if values.len() < 3 {
        return Err(Error::InsufficientData {
            context: "clean_series".into(),
            needed: 3,
            got: values.len(),
        });
    }
    let present: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
    if present.is_empty() {
        return Err(Error::DegenerateInput(
            "series has no recorded samples".into(),
        ));
    }
    // z-scores against the mean/std of the full raw series (population form);
    // a single present sample cannot define a scale, so only gaps get filled
    let std = if present.len() >= 2 {
        let n = present.len() as f64;
        let mean = present.iter().sum::<f64>() / n;
        let var = present.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        (mean, var.sqrt())
    } else {
        (present[0], 0.0)
    };
    let (mean, std) = std;

    // survivors keep their original value; everything else is rebuilt
    let mut outlier = vec![false; values.len()];
    let mut n_replaced = 0;
    let mut n_filled = 0;
    for (i, v) in values.iter().enumerate() {
        if v.is_nan() {
            n_filled += 1;
        } else if std > 0.0 && ((v - mean) / std).abs() > z_threshold {
            outlier[i] = true;
            n_replaced += 1;
        }
    }
    if n_replaced + n_filled == 0 {
        return Ok((0, 0));
    }
    let survives: Vec<bool> = (0..values.len())
        .map(|i| !values[i].is_nan() && !outlier[i])
        .collect();
    if !survives.iter().any(|&s| s) {
        return Err(Error::DegenerateInput(
            "no surviving samples after outlier flagging".into(),
        ));
    }
    let original = values.to_vec();
    for i in 0..values.len() {
        if survives[i] {
            continue;
        }
        let left = (0..i).rev().find(|&j| survives[j]);
        let right = (i + 1..values.len()).find(|&j| survives[j]);
        values[i] = match (left, right) {
            (Some(l), Some(r)) => {
                let frac = (i - l) as f64 / (r - l) as f64;
                original[l] + frac * (original[r] - original[l])
            }
            (Some(l), None) => original[l],
            (None, Some(r)) => original[r],
            (None, None) => unreachable!("at least one survivor exists"),
        };
    }
    Ok((n_replaced, n_filled))
}

/// Cleans one meter series: replaces z-score outliers and fills gaps.
pub fn clean_series(series: &MeterSeries, z_threshold: f64) -> Result<(MeterSeries, CleanReport)> {
    let mut cleaned = series.clone();
    let (n_replaced, n_filled) = clean_values(cleaned.values_mut(), z_threshold)?;
    let report = CleanReport {
        customer_id: series.customer_id.clone(),
        n_replaced,
        n_filled,
    };
    Ok((cleaned, report))
}

/// Cleans the feeder series with the same rule as customer series.
pub fn clean_feeder(
    feeder: &FeederSeries,
    z_threshold: f64,
) -> Result<(FeederSeries, CleanReport)> {
    let mut cleaned = feeder.clone();
    let (n_replaced, n_filled) = clean_values(cleaned.values_mut(), z_threshold)?;
    let report = CleanReport {
        customer_id: "feeder".into(),
        n_replaced,
        n_filled,
    };
    Ok((cleaned, report))
}

/// Cleans every series, in parallel per customer.
pub fn clean_all(
    series: &[MeterSeries],
    z_threshold: f64,
) -> Result<(Vec<MeterSeries>, Vec<CleanReport>)> {
    let results = maybe_par_map(series, |s| clean_series(s, z_threshold));
    let mut cleaned = Vec::with_capacity(series.len());
    let mut reports = Vec::with_capacity(series.len());
    for r in results {
        let (s, rep) = r?;
        cleaned.push(s);
        reports.push(rep);
    }
    Ok((cleaned, reports))
}

/// Partitions cleaned series into the four seasons and computes per-customer
/// average daily profiles. Only complete days (24 present hours) enter a
/// seasonal dataset; a customer with zero complete days in a season is
/// excluded from that season with a warning record.
pub fn split_seasons(
    series: &[MeterSeries],
    feeder: &FeederSeries,
    calendar: &SeasonCalendar,
) -> SeasonalSplit {
    let per_customer: Vec<PerSeason<Option<SeasonalCustomer>>> = maybe_par_map(series, |s| {
        let mut days: PerSeason<Vec<(NaiveDate, [f64; 24])>> = PerSeason::default();
        for date in s.dates() {
            if let Some(hours) = s.complete_day(date) {
                days.get_mut(calendar.season_of(date)).push((date, hours));
            }
        }
        PerSeason::from_fn(|season| {
            let season_days = days.get(season);
            if season_days.is_empty() {
                return None;
            }
            let mut avg = [0.0; 24];
            for (_, hours) in season_days {
                for (a, h) in avg.iter_mut().zip(hours) {
                    *a += h;
                }
            }
            let n = season_days.len() as f64;
            for a in avg.iter_mut() {
                *a /= n;
            }
            Some(SeasonalCustomer {
                customer_id: s.customer_id.clone(),
                days: season_days.clone(),
                avg_profile: avg,
            })
        })
    });

    let mut warnings = Vec::new();
    let datasets = PerSeason::from_fn(|season| {
        let mut customers = Vec::new();
        for (i, per) in per_customer.iter().enumerate() {
            match per.get(season) {
                Some(c) => customers.push(c.clone()),
                None => warnings.push((series[i].customer_id.clone(), season)),
            }
        }
        SeasonalDataset { season, customers }
    });

    let feeders = PerSeason::from_fn(|season| {
        let mut samples = Vec::new();
        for date in feeder.dates() {
            if calendar.season_of(date) != season {
                continue;
            }
            for h in 0..24 {
                let t = date.and_hms_opt(h, 0, 0).unwrap();
                if let Some(v) = feeder.value_at(t) {
                    samples.push((t, v));
                }
            }
        }
        if samples.is_empty() {
            FeederSeries::from_parts(feeder.start(), Vec::new())
        } else {
            FeederSeries::from_samples(&samples)
        }
    });

    SeasonalSplit {
        datasets,
        feeders,
        warnings,
    }
}

/// Aggregates one cleaned series into monthly billing totals: one record per
/// calendar month holding any data, energy equal to the sum of that month's
/// present hours.
pub fn aggregate_monthly(series: &MeterSeries) -> Vec<MonthlyBilling> {
    let mut out = Vec::new();
    for month in series.months() {
        let mut energy = 0.0;
        let mut any = false;
        let mut date = month.first_day();
        for _ in 0..month.days() {
            for h in 0..24 {
                let t = date.and_hms_opt(h, 0, 0).unwrap();
                if let Some(v) = series.value_at(t) {
                    energy += v;
                    any = true;
                }
            }
            date = date.succ_opt().unwrap();
        }
        if any {
            out.push(MonthlyBilling {
                customer_id: series.customer_id.clone(),
                month,
                energy_kwh: energy,
            });
        }
    }
    out
}

/// Convenience: meter CSV path -> cleaned series + reports.
pub fn load_and_clean_meters(
    path: &Path,
    z_threshold: f64,
) -> Result<(Vec<MeterSeries>, Vec<CleanReport>)> {
    let file = std::fs::File::open(path)?;
    let readings = parse_readings(std::io::BufReader::new(file))?;
    let series = build_series(&readings);
    clean_all(&series, z_threshold)
}

/// Convenience: SCADA CSV path -> cleaned feeder series.
pub fn load_and_clean_feeder(path: &Path, z_threshold: f64) -> Result<(FeederSeries, CleanReport)> {
    let file = std::fs::File::open(path)?;
    let feeder = parse_feeder(std::io::BufReader::new(file))?;
    clean_feeder(&feeder, z_threshold)
}

/// Writes `clean_report.csv` with header `customer_id,n_replaced,n_filled`.
pub fn write_clean_report<W: Write>(writer: W, reports: &[CleanReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["customer_id", "n_replaced", "n_filled"])?;
    for r in reports {
        w.write_record([
            r.customer_id.as_str(),
            &r.n_replaced.to_string(),
            &r.n_filled.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
