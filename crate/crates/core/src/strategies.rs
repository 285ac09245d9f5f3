//! Segmentation strategy comparison and the direct-load-control
//! demand-response simulation.
//!
//! A strategy is a deterministic total ordering over candidate customers
//! (ties break on the customer id). The simulation sheds
//! `elasticity * load` from every selected customer during the system's
//! daily peak window and scores the drop of the daily system peak, as an
//! energy-accounting exercise with no network model.

use std::collections::HashMap;
use std::io::Write;

use chrono::NaiveDate;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calendar::MonthKey;
use crate::cmpc::{self, CmpcRecord};
use crate::error::{Error, Result};
use crate::ingest::MonthlyBilling;
use crate::par::maybe_par_map;
use crate::series::{FeederSeries, HourlySeries, MeterSeries};
use crate::wcr::{fit_cluster_ols, ClusterRegression};

/// Customer-ranking strategies under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Random,
    MonthlyDemandRank,
    CustomerPeakRank,
    EntropyRank,
    CmpcRankActual,
    CmpcRankEstimated,
    BaselineOls,
}

impl Strategy {
    pub const ALL: [Strategy; 7] = [
        Strategy::Random,
        Strategy::MonthlyDemandRank,
        Strategy::CustomerPeakRank,
        Strategy::EntropyRank,
        Strategy::CmpcRankActual,
        Strategy::CmpcRankEstimated,
        Strategy::BaselineOls,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::MonthlyDemandRank => "monthly_demand_rank",
            Strategy::CustomerPeakRank => "customer_peak_rank",
            Strategy::EntropyRank => "entropy_rank",
            Strategy::CmpcRankActual => "cmpc_rank_actual",
            Strategy::CmpcRankEstimated => "cmpc_rank_estimated",
            Strategy::BaselineOls => "baseline_ols",
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Maximum hourly value of a customer in a month.
pub fn customer_peak(meter: &MeterSeries, month: MonthKey) -> Result<f64> {
    meter
        .monthly_argmax(month)
        .map(|(_, v)| v)
        .ok_or_else(|| Error::InsufficientData {
            context: format!("customer_peak {} {month}", meter.customer_id),
            needed: 1,
            got: 0,
        })
}

/// Shannon entropy (natural log) of the customer's daily-peak-hour
/// distribution over the given dates. Requires at least 7 complete days.
pub fn profile_entropy(meter: &MeterSeries, dates: &[NaiveDate]) -> Result<f64> {
    let complete = dates
        .iter()
        .filter(|&&d| meter.complete_day(d).is_some())
        .count();
    if complete < 7 {
        return Err(Error::InsufficientData {
            context: format!("profile_entropy {}", meter.customer_id),
            needed: 7,
            got: complete,
        });
    }
    let dist = cmpc::peak_timing_distribution(meter, dates)?;
    Ok(dist.entropy())
}

/// Global OLS from monthly energy to peak contribution, with no clustering
/// and no classifier: the single-line baseline.
pub fn baseline_ols_peak(
    billing: &[MonthlyBilling],
    contributions: &[CmpcRecord],
) -> Result<ClusterRegression> {
    let mut by_key: HashMap<(&str, MonthKey), f64> = HashMap::new();
    for b in billing {
        by_key.insert((b.customer_id.as_str(), b.month), b.energy_kwh);
    }
    let mut pairs = Vec::new();
    for record in contributions {
        if let Some(&energy) = by_key.get(&(record.customer_id.as_str(), record.month)) {
            pairs.push((energy, record.value));
        }
    }
    fit_cluster_ols(0, &pairs)
}

/// Configuration of the direct-load-control simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrSimConfig {
    pub n_houses: usize,
    /// Fraction of houses enrolled for control.
    pub selection_fraction: f64,
    /// Per-unit share of a selected customer's load shed in the peak window.
    pub elasticity: f64,
    pub horizon_days: u32,
    /// Width of the shed window starting at the daily system peak hour.
    pub window_hours: u32,
}

impl Default for DrSimConfig {
    fn default() -> Self {
        DrSimConfig {
            n_houses: 300,
            selection_fraction: 0.35,
            elasticity: 0.21,
            horizon_days: 28,
            window_hours: 1,
        }
    }
}

impl DrSimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.selection_fraction) || self.selection_fraction == 0.0 {
            return Err(Error::InvalidConfig(
                "selection fraction outside (0, 1]".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.elasticity) {
            return Err(Error::InvalidConfig("elasticity outside [0, 1]".into()));
        }
        if self.n_houses == 0 || self.horizon_days == 0 || self.window_hours == 0 {
            return Err(Error::InvalidConfig("zero-sized simulation".into()));
        }
        Ok(())
    }
}

/// One simulated day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrDay {
    pub day: NaiveDate,
    pub peak_before_kw: f64,
    pub peak_after_kw: f64,
    pub reduction_kwh: f64,
}

/// Outcome of one strategy's simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrSimResult {
    pub strategy: Strategy,
    pub selected: Vec<String>,
    pub daily: Vec<DrDay>,
    pub total_reduction_kwh: f64,
}

/// Per-customer metrics a strategy can rank on.
#[derive(Debug, Clone)]
pub struct StrategyInputs {
    pub customer_ids: Vec<String>,
    pub monthly_energy: Vec<f64>,
    pub peak_kw: Vec<f64>,
    pub entropy: Vec<f64>,
    pub cmpc_actual: Vec<f64>,
    /// Estimated contribution; NaN when no estimate is known.
    pub cmpc_estimated: Vec<f64>,
    pub baseline_prediction: Vec<f64>,
}

impl StrategyInputs {
    /// Computes every ranking metric for a candidate population over the
    /// simulation horizon.
    pub fn compute(
        meters: &[MeterSeries],
        feeder: &FeederSeries,
        dates: &[NaiveDate],
        estimates: &HashMap<String, f64>,
    ) -> Result<Self> {
        let months: Vec<MonthKey> = {
            let mut seen = Vec::new();
            for d in dates {
                let m = MonthKey::of(*d);
                if !seen.contains(&m) {
                    seen.push(m);
                }
            }
            seen
        };
        let customer_ids: Vec<String> = meters.iter().map(|m| m.customer_id.clone()).collect();

        let per_meter: Vec<Result<(f64, f64, f64, f64)>> = maybe_par_map(meters, |meter| {
            let mut energy = 0.0;
            for d in dates {
                if let Some(day) = meter.complete_day(*d) {
                    energy += day.iter().sum::<f64>();
                }
            }
            let peak = months
                .iter()
                .filter_map(|&m| meter.monthly_argmax(m).map(|(_, v)| v))
                .fold(0.0f64, f64::max);
            let entropy = profile_entropy(meter, dates)?;
            let mut cmpc_sum = 0.0;
            let mut cmpc_n = 0usize;
            for &m in &months {
                let peaks = cmpc::daily_peaks(feeder, m);
                if let Ok(rec) = cmpc::compute_cmpc(meter, &peaks) {
                    cmpc_sum += rec.value;
                    cmpc_n += 1;
                }
            }
            if cmpc_n == 0 {
                return Err(Error::InsufficientData {
                    context: format!("cmpc over horizon for {}", meter.customer_id),
                    needed: 1,
                    got: 0,
                });
            }
            Ok((energy, peak, entropy, cmpc_sum / cmpc_n as f64))
        });

        let mut monthly_energy = Vec::new();
        let mut peak_kw = Vec::new();
        let mut entropy = Vec::new();
        let mut cmpc_actual = Vec::new();
        for item in per_meter {
            let (e, p, h, c) = item?;
            monthly_energy.push(e);
            peak_kw.push(p);
            entropy.push(h);
            cmpc_actual.push(c);
        }

        let cmpc_estimated: Vec<f64> = customer_ids
            .iter()
            .map(|id| estimates.get(id).copied().unwrap_or(f64::NAN))
            .collect();

        // single global line fit on (energy, actual contribution)
        let pairs: Vec<(f64, f64)> = monthly_energy
            .iter()
            .zip(&cmpc_actual)
            .map(|(&e, &f)| (e, f))
            .collect();
        let baseline = fit_cluster_ols(0, &pairs)?;
        let baseline_prediction: Vec<f64> = monthly_energy
            .iter()
            .map(|&e| baseline.predict(e))
            .collect();

        Ok(StrategyInputs {
            customer_ids,
            monthly_energy,
            peak_kw,
            entropy,
            cmpc_actual,
            cmpc_estimated,
            baseline_prediction,
        })
    }
}

/// Deterministic priority ordering of candidates under a strategy.
pub fn rank_customers(strategy: Strategy, inputs: &StrategyInputs, seed: u64) -> Vec<usize> {
    let n = inputs.customer_ids.len();
    let mut order: Vec<usize> = (0..n).collect();
    match strategy {
        Strategy::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for i in (1..n).rev() {
                let j = rng.random_range(0..=i);
                order.swap(i, j);
            }
        }
        Strategy::MonthlyDemandRank => sort_desc(&mut order, &inputs.monthly_energy, inputs),
        Strategy::CustomerPeakRank => sort_desc(&mut order, &inputs.peak_kw, inputs),
        Strategy::EntropyRank => {
            // stable consumers (low entropy) first
            let negated: Vec<f64> = inputs.entropy.iter().map(|e| -e).collect();
            sort_desc(&mut order, &negated, inputs);
        }
        Strategy::CmpcRankActual => sort_desc(&mut order, &inputs.cmpc_actual, inputs),
        Strategy::CmpcRankEstimated => sort_desc(&mut order, &inputs.cmpc_estimated, inputs),
        Strategy::BaselineOls => sort_desc(&mut order, &inputs.baseline_prediction, inputs),
    }
    order
}

fn sort_desc(order: &mut [usize], metric: &[f64], inputs: &StrategyInputs) {
    // NaN (missing metric) ranks last; ties break on the customer id
    order.sort_by(|&a, &b| {
        let ka = if metric[a].is_nan() {
            f64::NEG_INFINITY
        } else {
            metric[a]
        };
        let kb = if metric[b].is_nan() {
            f64::NEG_INFINITY
        } else {
            metric[b]
        };
        kb.total_cmp(&ka)
            .then_with(|| inputs.customer_ids[a].cmp(&inputs.customer_ids[b]))
    });
}

/// Runs the direct-load-control simulation for one strategy.
///
/// Selected customers shed `elasticity * load` in the `window_hours`-wide
/// window starting at each day's system peak hour; the day's score is the
/// drop of the system peak, in kWh over the one-hour metering interval.
pub fn simulate_dr(
    config: &DrSimConfig,
    meters: &[MeterSeries],
    feeder: &FeederSeries,
    strategy: Strategy,
    inputs: &StrategyInputs,
    dates: &[NaiveDate],
    seed: u64,
) -> Result<DrSimResult> {
    config.validate()?;
    if meters.len() < config.n_houses {
        return Err(Error::InsufficientData {
            context: "simulate_dr candidate population".into(),
            needed: config.n_houses,
            got: meters.len(),
        });
    }
    let n_selected = (config.n_houses as f64 * config.selection_fraction).floor() as usize;
    if n_selected == 0 {
        return Err(Error::InvalidConfig(
            "selection fraction yields zero customers".into(),
        ));
    }
    let ranking = rank_customers(strategy, inputs, seed);
    let selected_idx: Vec<usize> = ranking.into_iter().take(n_selected).collect();
    let selected: Vec<String> = selected_idx
        .iter()
        .map(|&i| inputs.customer_ids[i].clone())
        .collect();

    let horizon: Vec<NaiveDate> = dates
        .iter()
        .copied()
        .take(config.horizon_days as usize)
        .collect();
    let mut daily = Vec::with_capacity(horizon.len());
    let mut total = 0.0;
    for &day in &horizon {
        let Some((peak_hour, peak_before)) = feeder.daily_argmax(day) else {
            continue;
        };
        // shed inside the window, then re-find the day's maximum
        let mut modified = [0.0f64; 24];
        let mut present = [false; 24];
        for h in 0..24u32 {
            let t = day.and_hms_opt(h, 0, 0).unwrap();
            if let Some(v) = feeder.value_at(t) {
                present[h as usize] = true;
                modified[h as usize] = v;
            }
        }
        for w in 0..config.window_hours {
            let h = peak_hour + w;
            if h >= 24 || !present[h as usize] {
                continue;
            }
            let t = day.and_hms_opt(h, 0, 0).unwrap();
            let mut shed = 0.0;
            for &i in &selected_idx {
                if let Some(v) = meters[i].value_at(t) {
                    shed += config.elasticity * v;
                }
            }
            modified[h as usize] -= shed;
        }
        let peak_after = modified
            .iter()
            .zip(&present)
            .filter(|(_, p)| **p)
            .map(|(v, _)| *v)
            .fold(f64::NEG_INFINITY, f64::max);
        let reduction = (peak_before - peak_after).max(0.0) * 1.0; // 1 h interval
        total += reduction;
        daily.push(DrDay {
            day,
            peak_before_kw: peak_before,
            peak_after_kw: peak_after,
            reduction_kwh: reduction,
        });
    }

    Ok(DrSimResult {
        strategy,
        selected,
        daily,
        total_reduction_kwh: total,
    })
}

/// Simulates a set of strategies, in parallel, with deterministic per-strategy
/// results merged in input order.
pub fn simulate_strategies(
    config: &DrSimConfig,
    meters: &[MeterSeries],
    feeder: &FeederSeries,
    strategies: &[Strategy],
    inputs: &StrategyInputs,
    dates: &[NaiveDate],
    seed: u64,
) -> Result<Vec<DrSimResult>> {
    let results = maybe_par_map(strategies, |&s| {
        simulate_dr(config, meters, feeder, s, inputs, dates, seed)
    });
    results.into_iter().collect()
}

/// Writes `dr_report.csv`:
/// `strategy,day,peak_before_kw,peak_after_kw,reduction_kwh`.
pub fn write_dr_report_csv<W: Write>(writer: W, results: &[DrSimResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "strategy",
        "day",
        "peak_before_kw",
        "peak_after_kw",
        "reduction_kwh",
    ])?;
    for result in results {
        for day in &result.daily {
            w.write_record([
                result.strategy.as_str(),
                &day.day.format("%Y-%m-%d").to_string(),
                &day.peak_before_kw.to_string(),
                &day.peak_after_kw.to_string(),
                &day.reduction_kwh.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Pairwise percentage improvements between strategy totals
/// (`strategy_summary.json` payload).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub totals_kwh: Vec<(String, f64)>,
    /// (a, b, percent): total of `a` exceeds total of `b` by `percent`.
    pub pairwise_improvement_pct: Vec<(String, String, f64)>,
}

impl StrategySummary {
    pub fn from_results(results: &[DrSimResult]) -> Self {
        let totals_kwh: Vec<(String, f64)> = results
            .iter()
            .map(|r| (r.strategy.as_str().to_string(), r.total_reduction_kwh))
            .collect();
        let mut pairwise = Vec::new();
        for a in results {
            for b in results {
                if a.strategy == b.strategy || b.total_reduction_kwh == 0.0 {
                    continue;
                }
                let pct =
                    (a.total_reduction_kwh - b.total_reduction_kwh) / b.total_reduction_kwh * 100.0;
                pairwise.push((
                    a.strategy.as_str().to_string(),
                    b.strategy.as_str().to_string(),
                    pct,
                ));
            }
        }
        StrategySummary {
            totals_kwh,
            pairwise_improvement_pct: pairwise,
        }
    }
}
