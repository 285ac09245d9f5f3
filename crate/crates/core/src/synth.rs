//! Deterministic synthetic population generator.
//!
//! Each customer draws one behavioral archetype (morning peaker, evening
//! peaker, dual peak, flat, midday dip, night heavy) and a lognormal monthly
//! consumption scale. Hourly load is
//! `scale * seasonal_shape(hour) * day_of_week * noise`, where on a
//! label-noise day the shape is rotated so its peak lands on a uniformly
//! drawn hour. The feeder is the exact customer sum plus a configurable base
//! load, so contribution shares reconstruct to 1 by construction.

use std::io::{Read, Write};

use chrono::{Datelike, NaiveDate, NaiveDateTime, Weekday};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::calendar::{PerSeason, Season, SeasonCalendar};
use crate::error::{Error, Result};
use crate::ingest::TIMESTAMP_FORMAT;
use crate::series::{FeederSeries, HourlySeries, MeterSeries};

/// Number of archetype families shipped with the generator.
pub const N_ARCHETYPES: usize = 6;

pub const ARCHETYPE_NAMES: [&str; N_ARCHETYPES] = [
    "morning_peaker",
    "evening_peaker",
    "dual_peak",
    "flat",
    "midday_dip",
    "night_heavy",
];

/// Generator configuration. Every field participates in the seed-determined
/// output, so identical configs produce byte-identical artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_customers: usize,
    pub start_year: i32,
    pub start_month: u32,
    pub n_months: u32,
    pub seed: u64,
    /// Archetype families in play (1 to 6).
    pub archetypes: usize,
    /// Median of the lognormal monthly-consumption scale, in kWh.
    pub scale_median_kwh: f64,
    /// Lognormal sigma of the scale; 0 collapses every customer to the median.
    pub scale_sigma: f64,
    /// Sigma of the mean-one hourly lognormal noise; 0 disables noise.
    pub noise_sigma: f64,
    /// Sigma of the mean-one day-level multiplier shared by every customer
    /// (common weather-like swings that drive coincident peaks); 0 disables.
    pub day_wave_sigma: f64,
    /// Probability that one survey response lands on a uniformly random hour
    /// instead of the archetype's peak neighborhood. Controls how informative
    /// survey.csv is, and with it the classifier's difficulty.
    pub label_noise: f64,
    /// Fraction of customers marked observable (metered for training).
    pub observable_fraction: f64,
    /// Constant system load added on top of the customer sum, in kW.
    pub base_load_kw: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_customers: 200,
            start_year: 2021,
            start_month: 1,
            n_months: 12,
            seed: 42,
            archetypes: N_ARCHETYPES,
            scale_median_kwh: 700.0,
            scale_sigma: 0.45,
            noise_sigma: 0.35,
            day_wave_sigma: 0.15,
            label_noise: 0.70,
            observable_fraction: 0.8,
            base_load_kw: 0.0,
        }
    }
}

/// Survey responses sampled per customer; a small count keeps the survey a
/// coarse instrument compared to interval metering.
pub const SURVEY_SAMPLES: usize = 8;

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.archetypes == 0 || self.archetypes > N_ARCHETYPES {
            return Err(Error::InvalidConfig(format!(
                "archetypes must be 1..={N_ARCHETYPES}, got {}",
                self.archetypes
            )));
        }
        if self.n_customers < 2 * self.archetypes {
            return Err(Error::InvalidConfig(format!(
                "n_customers={} must be at least twice the archetype count {}",
                self.n_customers, self.archetypes
            )));
        }
        if !(1..=12).contains(&self.start_month) || self.n_months == 0 {
            return Err(Error::InvalidConfig("bad start month or span".into()));
        }
        if !(0.0..=1.0).contains(&self.label_noise) {
            return Err(Error::InvalidConfig("label_noise outside [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.observable_fraction) || self.observable_fraction == 0.0 {
            return Err(Error::InvalidConfig(
                "observable_fraction outside (0, 1]".into(),
            ));
        }
        if self.scale_median_kwh <= 0.0
            || self.scale_sigma < 0.0
            || self.noise_sigma < 0.0
            || self.day_wave_sigma < 0.0
            || self.base_load_kw < 0.0
        {
            return Err(Error::InvalidConfig(
                "negative scale/noise parameter".into(),
            ));
        }
        Ok(())
    }
}

/// What the generator knows about one customer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomerTruth {
    pub customer_id: String,
    /// Archetype family per season (the family is stable across seasons; the
    /// realized shape varies with the season).
    pub archetype: PerSeason<usize>,
    pub scale_kwh_month: f64,
    pub observable: bool,
}

/// Ground-truth artifact (`ground_truth.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub version: u32,
    pub config: SynthConfig,
    pub customers: Vec<CustomerTruth>,
}

pub const GROUND_TRUTH_VERSION: u32 = 1;

impl GroundTruth {
    pub fn save<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    pub fn load<R: Read>(reader: R) -> Result<Self> {
        Ok(serde_json::from_reader(reader)?)
    }

    pub fn archetype_labels(&self, season: Season) -> Vec<usize> {
        self.customers
            .iter()
            .map(|c| *c.archetype.get(season))
            .collect()
    }

    pub fn observable_ids(&self) -> Vec<String> {
        self.customers
            .iter()
            .filter(|c| c.observable)
            .map(|c| c.customer_id.clone())
            .collect()
    }

    pub fn unobservable_ids(&self) -> Vec<String> {
        self.customers
            .iter()
            .filter(|c| !c.observable)
            .map(|c| c.customer_id.clone())
            .collect()
    }
}

/// Everything one generator run produces.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub meters: Vec<MeterSeries>,
    pub feeder: FeederSeries,
    pub survey: Vec<(String, [f64; 24])>,
    pub truth: GroundTruth,
}

fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    d.min(24.0 - d)
}

/// Deterministic daily shape of an archetype family in a season, normalized
/// to sum to 1 over the 24 hours.
pub fn archetype_shape(family: usize, season: Season) -> [f64; 24] {
    assert!(family < N_ARCHETYPES);
    // (base, bumps as (center hour, sigma, amplitude)). Families pair up so
    // that each pair shares nearly the same daily-argmax behavior (hourly
    // noise flips between the same bumps at similar rates) while their base
    // levels keep the 24-hour mean profiles far apart: morning/dual share
    // the morning-vs-evening flip, evening/midday-dip share the pure evening
    // peak. That is what bounds the peak-timing classifier away from a
    // perfect separation even though the clustering stage sees six clean
    // shapes.
    let (base, bumps): (f64, Vec<(f64, f64, f64)>) = match family {
        0 => (0.28, vec![(7.0, 1.3, 1.05), (19.0, 1.3, 0.95)]),
        1 => (0.25, vec![(19.0, 1.3, 1.20)]),
        2 => (0.70, vec![(7.0, 1.25, 1.15), (19.0, 1.3, 1.05)]),
        3 => (0.80, vec![(19.0, 2.0, 0.45)]),
        4 => (
            0.55,
            vec![(8.0, 1.3, 0.62), (19.0, 1.35, 1.05), (13.0, 2.6, -0.45)],
        ),
        _ => (0.32, vec![(23.0, 1.3, 1.25)]),
    };
    let mut shape = [0.0; 24];
    for (h, slot) in shape.iter_mut().enumerate() {
        let mut v = base;
        for &(center, sigma, amp) in &bumps {
            let (center, amp) = match season {
                Season::Summer if (17.0..=21.0).contains(&center) => (center - 1.0, amp * 1.30),
                Season::Winter if center <= 9.0 => (center, amp * 1.20),
                Season::Winter if center >= 17.0 => (center, amp * 1.10),
                _ => (center, amp),
            };
            let d = circular_distance(h as f64, center);
            v += amp * (-d * d / (2.0 * sigma * sigma)).exp();
        }
        *slot = v.max(0.02);
    }
    let total: f64 = shape.iter().sum();
    for v in shape.iter_mut() {
        *v /= total;
    }
    shape
}

/// Hour of the shape's maximum.
pub fn archetype_peak_hour(family: usize, season: Season) -> usize {
    let shape = archetype_shape(family, season);
    shape
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(h, _)| h)
        .unwrap()
}

fn dow_factor(date: NaiveDate) -> f64 {
    match date.weekday() {
        Weekday::Sat => 1.05,
        Weekday::Sun => 1.08,
        _ => 1.0,
    }
}

/// Samples one customer's survey vector: a small number of peak-propensity
/// responses, each landing near the archetype's seasonal peak hour or, with
/// probability `label_noise`, on a uniformly random hour.
fn survey_vector(family: usize, label_noise: f64, rng: &mut ChaCha8Rng) -> [f64; 24] {
    let mut counts = [0usize; 24];
    for i in 0..SURVEY_SAMPLES {
        let hour = if rng.random::<f64>() < label_noise {
            rng.random_range(0..24usize)
        } else {
            let season = Season::ALL[i % 4];
            let peak = archetype_peak_hour(family, season);
            // respondents place their peak within an hour of the truth
            match rng.random_range(0..10u32) {
                0 | 1 => (peak + 23) % 24,
                2 | 3 => (peak + 1) % 24,
                _ => peak,
            }
        };
        counts[hour] += 1;
    }
    let mut probs = [0.0f64; 24];
    for (p, c) in probs.iter_mut().zip(counts) {
        *p = c as f64 / SURVEY_SAMPLES as f64;
    }
    probs
}

/// Generates the full synthetic population. Single-threaded by design: the
/// RNG stream is consumed in a fixed order, so equal configs give
/// byte-identical output.
pub fn generate(config: &SynthConfig) -> Result<SynthOutput> {
    config.validate()?;
    let calendar = SeasonCalendar::default();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let start = NaiveDate::from_ymd_opt(config.start_year, config.start_month, 1)
        .ok_or_else(|| Error::InvalidConfig("invalid start date".into()))?;
    let mut end_month = crate::calendar::MonthKey::new(config.start_year, config.start_month);
    for _ in 0..config.n_months {
        end_month = end_month.next();
    }
    let end = end_month.first_day();
    let n_days = (end - start).num_days() as usize;
    let n_hours = n_days * 24;
    let start_instant = start.and_hms_opt(0, 0, 0).unwrap();

    let scale_dist = if config.scale_sigma > 0.0 {
        Some(
            LogNormal::new(config.scale_median_kwh.ln(), config.scale_sigma)
                .map_err(|e| Error::InvalidConfig(format!("scale distribution: {e}")))?,
        )
    } else {
        None
    };
    // mean-one hourly noise, clamped so a single draw cannot mimic a meter fault
    let noise_dist = if config.noise_sigma > 0.0 {
        Some(
            LogNormal::new(
                -config.noise_sigma * config.noise_sigma / 2.0,
                config.noise_sigma,
            )
            .map_err(|e| Error::InvalidConfig(format!("noise distribution: {e}")))?,
        )
    } else {
        None
    };

    let dates: Vec<NaiveDate> = (0..n_days)
        .map(|i| start + chrono::TimeDelta::days(i as i64))
        .collect();
    let day_seasons: Vec<Season> = dates.iter().map(|d| calendar.season_of(*d)).collect();
    // shared day-level wave, drawn before the customer loop so every
    // customer sees the same sequence
    let wave_dist = if config.day_wave_sigma > 0.0 {
        Some(
            LogNormal::new(
                -config.day_wave_sigma * config.day_wave_sigma / 2.0,
                config.day_wave_sigma,
            )
            .map_err(|e| Error::InvalidConfig(format!("day wave distribution: {e}")))?,
        )
    } else {
        None
    };
    let day_factors: Vec<f64> = dates
        .iter()
        .map(|d| {
            let wave = match &wave_dist {
                Some(dist) => dist.sample(&mut rng).clamp(0.6, 1.8),
                None => 1.0,
            };
            dow_factor(*d) * wave
        })
        .collect();

    let id_width = (config.n_customers as f64).log10().ceil().max(1.0) as usize;
    let mut meters = Vec::with_capacity(config.n_customers);
    let mut customers = Vec::with_capacity(config.n_customers);
    let mut feeder_values = vec![config.base_load_kw; n_hours];

    for j in 0..config.n_customers {
        let customer_id = format!("c{j:0width$}", width = id_width);
        let family = j % config.archetypes;
        let scale_month = match &scale_dist {
            Some(d) => d.sample(&mut rng),
            None => config.scale_median_kwh,
        };
        let scale_day = scale_month / 30.44;

        let shapes: PerSeason<[f64; 24]> = PerSeason::from_fn(|s| archetype_shape(family, s));

        let mut values = vec![0.0f64; n_hours];
        for (d, date) in dates.iter().enumerate() {
            let _ = date;
            let season = day_seasons[d];
            let shape = shapes.get(season);
            let day_scale = scale_day * day_factors[d];
            for h in 0..24 {
                let noise = match &noise_dist {
                    Some(dist) => dist.sample(&mut rng).clamp(0.2, 4.0),
                    None => 1.0,
                };
                let v = day_scale * shape[h] * noise;
                values[d * 24 + h] = v;
                feeder_values[d * 24 + h] += v;
            }
        }
        meters.push(MeterSeries::from_parts(
            customer_id.clone(),
            start_instant,
            values,
        ));
        customers.push(CustomerTruth {
            customer_id,
            archetype: PerSeason::from_fn(|_| family),
            scale_kwh_month: scale_month,
            observable: true, // assigned below
        });
    }

    // deterministic observability draw: shuffle indices, mark the first slice
    let n_observable = ((config.n_customers as f64) * config.observable_fraction)
        .round()
        .clamp(1.0, config.n_customers as f64) as usize;
    let mut indices: Vec<usize> = (0..config.n_customers).collect();
    for i in (1..indices.len()).rev() {
        let j = rng.random_range(0..=i);
        indices.swap(i, j);
    }
    for (pos, &idx) in indices.iter().enumerate() {
        customers[idx].observable = pos < n_observable;
    }

    let survey = customers
        .iter()
        .map(|c| {
            (
                c.customer_id.clone(),
                survey_vector(
                    *c.archetype.get(Season::Spring),
                    config.label_noise,
                    &mut rng,
                ),
            )
        })
        .collect();

    Ok(SynthOutput {
        meters,
        feeder: FeederSeries::from_parts(start_instant, feeder_values),
        survey,
        truth: GroundTruth {
            version: GROUND_TRUTH_VERSION,
            config: config.clone(),
            customers,
        },
    })
}

fn fmt_instant(t: NaiveDateTime) -> String {
    t.format(TIMESTAMP_FORMAT).to_string()
}

/// Writes `sm_readings.csv` in the ingest module's schema.
pub fn write_sm_readings_csv<W: Write>(writer: W, meters: &[MeterSeries]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["customer_id", "timestamp", "kwh"])?;
    for meter in meters {
        for (i, v) in meter.values().iter().enumerate() {
            if v.is_nan() {
                continue;
            }
            w.write_record([
                meter.customer_id.as_str(),
                &fmt_instant(meter.timestamp_of(i)),
                &v.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `scada.csv` in the ingest module's schema.
pub fn write_scada_csv<W: Write>(writer: W, feeder: &FeederSeries) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["timestamp", "system_kw"])?;
    for (i, v) in feeder.values().iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        w.write_record([fmt_instant(feeder.timestamp_of(i)), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `survey.csv` (`customer_id,x0,...,x23`).
pub fn write_survey_csv<W: Write>(writer: W, survey: &[(String, [f64; 24])]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["customer_id".to_string()];
    header.extend((0..24).map(|i| format!("x{i}")));
    w.write_record(&header)?;
    for (id, probs) in survey {
        let mut row = vec![id.clone()];
        row.extend(probs.iter().map(|p| p.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes ground-truth archetype labels per season (`labels.csv`) for
/// external scoring of clustering quality.
pub fn write_labels_csv<W: Write>(writer: W, truth: &GroundTruth) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["customer_id", "season", "archetype"])?;
    for c in &truth.customers {
        for season in Season::ALL {
            w.write_record([
                c.customer_id.as_str(),
                season.as_str(),
                &c.archetype.get(season).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calendar::MonthKey;
    use crate::cmpc;
    use crate::ingest;

    fn small_config() -> SynthConfig {
        SynthConfig {
            n_customers: 12,
            n_months: 2,
            seed: 7,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn config_rejects_too_few_customers() {
        let config = SynthConfig {
            n_customers: 5,
            archetypes: 6,
            ..SynthConfig::default()
        };
        assert!(config.validate().is_err());
    }

    #[test]
    fn shapes_are_normalized_distributions() {
        for family in 0..N_ARCHETYPES {
            for season in Season::ALL {
                let shape = archetype_shape(family, season);
                let total: f64 = shape.iter().sum();
                assert!((total - 1.0).abs() < 1e-12);
                assert!(shape.iter().all(|&v| v > 0.0));
            }
        }
        // morning-tilted families peak at 7, the night family at 23, the
        // rest anchor on the evening hour, which shifts earlier in summer
        for (family, winter_peak) in [(0, 7), (1, 19), (2, 7), (3, 19), (4, 19), (5, 23)] {
            assert_eq!(
                archetype_peak_hour(family, Season::Winter),
                winter_peak,
                "family {family}"
            );
        }
        assert_eq!(archetype_peak_hour(1, Season::Summer), 18);
        assert_eq!(archetype_peak_hour(4, Season::Summer), 18);
    }

    #[test]
    fn generation_is_deterministic() {
        let config = small_config();
        let a = generate(&config).unwrap();
        let b = generate(&config).unwrap();
        assert_eq!(a.meters, b.meters);
        assert_eq!(a.feeder, b.feeder);
        assert_eq!(a.truth, b.truth);

        let mut csv_a = Vec::new();
        write_sm_readings_csv(&mut csv_a, &a.meters).unwrap();
        let mut csv_b = Vec::new();
        write_sm_readings_csv(&mut csv_b, &b.meters).unwrap();
        assert_eq!(csv_a, csv_b);
    }

    #[test]
    fn feeder_is_exact_customer_sum_plus_base() {
        let config = SynthConfig {
            base_load_kw: 25.0,
            ..small_config()
        };
        let out = generate(&config).unwrap();
        for i in 0..out.feeder.len() {
            let mut expect = config.base_load_kw;
            for m in &out.meters {
                expect += m.values()[i];
            }
            assert_eq!(out.feeder.values()[i], expect, "hour {i}");
        }
    }

    #[test]
    fn noiseless_single_archetype_feeder_peaks_at_archetype_hour() {
        let config = SynthConfig {
            n_customers: 2,
            archetypes: 1,
            noise_sigma: 0.0,
            label_noise: 0.0,
            scale_sigma: 0.0,
            n_months: 1,
            start_month: 7,
            ..SynthConfig::default()
        };
        let out = generate(&config).unwrap();
        let expected_hour = archetype_peak_hour(0, Season::Summer) as u32;
        for date in out.feeder.dates() {
            if let Some((hour, _)) = out.feeder.daily_argmax(date) {
                assert_eq!(hour, expected_hour, "{date}");
            }
        }
    }

    #[test]
    fn csv_round_trip_preserves_values_exactly() {
        let out = generate(&small_config()).unwrap();
        let mut sm = Vec::new();
        write_sm_readings_csv(&mut sm, &out.meters).unwrap();
        let readings = ingest::parse_readings(sm.as_slice()).unwrap();
        let rebuilt = ingest::build_series(&readings);
        assert_eq!(rebuilt, out.meters);

        let mut scada = Vec::new();
        write_scada_csv(&mut scada, &out.feeder).unwrap();
        let feeder = ingest::parse_feeder(scada.as_slice()).unwrap();
        assert_eq!(feeder, out.feeder);
    }

    #[test]
    fn survey_rows_are_probability_vectors() {
        let out = generate(&small_config()).unwrap();
        let mut buf = Vec::new();
        write_survey_csv(&mut buf, &out.survey).unwrap();
        let rows = crate::classify::read_survey(buf.as_slice()).unwrap();
        assert_eq!(rows.len(), out.survey.len());
    }

    #[test]
    fn monthly_consumption_mostly_below_1000() {
        let out = generate(&SynthConfig::default()).unwrap();
        let mut below = 0usize;
        let mut total = 0usize;
        for m in &out.meters {
            for bill in ingest::aggregate_monthly(m) {
                total += 1;
                if bill.energy_kwh < 1000.0 {
                    below += 1;
                }
            }
        }
        let fraction = below as f64 / total as f64;
        assert!(
            (0.75..=0.85).contains(&fraction),
            "fraction below 1000 kWh = {fraction}"
        );
    }

    #[test]
    fn coincidence_rate_matches_low_observed_band() {
        let out = generate(&SynthConfig::default()).unwrap();
        let months: Vec<MonthKey> = out.feeder.months();
        let mut rates = Vec::new();
        for month in months {
            rates.push(cmpc::coincidence_rate(&out.meters, &out.feeder, month));
        }
        let mean = rates.iter().sum::<f64>() / rates.len() as f64;
        assert!(
            (0.03..=0.09).contains(&mean),
            "mean monthly coincidence {mean}, monthly {rates:?}"
        );
    }

    #[test]
    fn archetypes_recoverable_without_noise() {
        let config = SynthConfig {
            n_customers: 40,
            archetypes: 4,
            noise_sigma: 0.0,
            label_noise: 0.0,
            scale_sigma: 0.0,
            n_months: 3,
            start_month: 6,
            seed: 3,
            ..SynthConfig::default()
        };
        let out = generate(&config).unwrap();
        let calendar = SeasonCalendar::default();
        let split = ingest::split_seasons(&out.meters, &out.feeder, &calendar);
        let dataset = split.datasets.get(Season::Summer);
        let profiles: Vec<Vec<f64>> = dataset.profiles().iter().map(|p| p.to_vec()).collect();
        let result = crate::spectral::select_k_and_cluster(
            &profiles,
            &crate::spectral::SpectralConfig {
                phi: 7,
                k_min: 2,
                k_max: 10,
                seed: 1,
                ..crate::spectral::SpectralConfig::default()
            },
        )
        .unwrap();
        assert_eq!(result.chosen_k, 4);
        let truth: Vec<usize> = dataset
            .customers
            .iter()
            .map(|c| {
                let idx = out
                    .truth
                    .customers
                    .iter()
                    .position(|t| t.customer_id == c.customer_id)
                    .unwrap();
                *out.truth.customers[idx].archetype.get(Season::Summer)
            })
            .collect();
        let ari = crate::spectral::adjusted_rand_index(&result.labels, &truth);
        assert_eq!(ari, 1.0);
    }
}
