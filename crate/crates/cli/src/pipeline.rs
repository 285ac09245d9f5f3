//! One function per subcommand. Every command validates its declared inputs,
//! runs, writes its artifacts, and records a manifest entry with input and
//! output hashes.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;
use std::time::Instant;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use peakshare_core::calendar::{MonthKey, PerSeason, Season, SeasonCalendar};
use peakshare_core::classify::{self, CvReport, MlrModel, SeasonMlr};
use peakshare_core::cmpc::{self, CmpcRecord};
use peakshare_core::ingest::{self, MonthlyBilling};
use peakshare_core::series::{FeederSeries, HourlySeries, MeterSeries};
use peakshare_core::spectral::{self, PatternBank, SeasonPatterns};
use peakshare_core::strategies::{self, Strategy, StrategySummary};
use peakshare_core::synth::{self, GroundTruth};
use peakshare_core::wcr::{
    self, ClusterRegression, EstimateDetail, EstimateRecord, EstimateReport, SeasonWcr, WcrModel,
};

use crate::config::{EstimateFeatures, PipelineConfig};
use crate::manifest::{hash_file, ManifestEntry, RunManifest};
use crate::CliError;

pub const SM_READINGS: &str = "sm_readings.csv";
pub const SCADA: &str = "scada.csv";
pub const SURVEY: &str = "survey.csv";
pub const GROUND_TRUTH: &str = "ground_truth.json";
pub const LABELS: &str = "labels.csv";
pub const CLEAN_REPORT: &str = "clean_report.csv";
pub const CMPC_CSV: &str = "cmpc.csv";
pub const PATTERNS: &str = "patterns.json";
pub const MLR_MODEL: &str = "mlr_model.json";
pub const WCR_MODEL: &str = "wcr_model.json";
pub const ESTIMATES: &str = "estimates.csv";
pub const ESTIMATE_REPORT: &str = "estimate_report.json";
pub const BENCH_REPORT: &str = "bench_report.json";
pub const DR_REPORT: &str = "dr_report.csv";
pub const STRATEGY_SUMMARY: &str = "strategy_summary.json";
pub const REPORT: &str = "report.json";
pub const REPORT_SEASONAL: &str = "report_seasonal.csv";
pub const DBI_CURVES: &str = "dbi_curves.csv";

/// Subcommand that produces each artifact, for actionable missing-input errors.
fn producer_of(file: &str) -> &'static str {
    match file {
        SM_READINGS | SCADA | SURVEY | GROUND_TRUTH | LABELS => "synth",
        CLEAN_REPORT => "ingest",
        CMPC_CSV => "cmpc",
        PATTERNS => "cluster",
        MLR_MODEL | WCR_MODEL => "train",
        ESTIMATES | ESTIMATE_REPORT => "estimate",
        BENCH_REPORT => "bench",
        DR_REPORT | STRATEGY_SUMMARY => "dr",
        _ => "synth",
    }
}

/// Shared command context.
pub struct Ctx {
    pub config: PipelineConfig,
    pub out_dir: PathBuf,
    pub strict: bool,
    pub config_hash: String,
}

impl Ctx {
    pub fn new(config: PipelineConfig, out_dir: PathBuf, strict: bool) -> Result<Self, CliError> {
        std::fs::create_dir_all(&out_dir)
            .map_err(|e| CliError::Validation(format!("cannot create {out_dir:?}: {e}")))?;
        let config_hash = crate::manifest::hash_bytes(config.canonical_string().as_bytes());
        Ok(Ctx {
            config,
            out_dir,
            strict,
            config_hash,
        })
    }

    fn path(&self, file: &str) -> PathBuf {
        self.out_dir.join(file)
    }

    fn require(&self, inputs: &[&str]) -> Result<(), CliError> {
        for file in inputs {
            if !self.path(file).exists() {
                return Err(CliError::MissingArtifact {
                    path: self.path(file).display().to_string(),
                    producer: producer_of(file),
                });
            }
        }
        if self.strict {
            let manifest = RunManifest::load_or_default(&self.out_dir)?;
            manifest.verify_strict(&self.out_dir, &self.config_hash, inputs)?;
        }
        Ok(())
    }

    fn record(
        &self,
        command: &str,
        inputs: &[&str],
        outputs: &[&str],
        started: Instant,
    ) -> Result<(), CliError> {
        let mut manifest = RunManifest::load_or_default(&self.out_dir)?;
        let hash_all = |files: &[&str]| -> Result<BTreeMap<String, String>, CliError> {
            files
                .iter()
                .map(|f| Ok((f.to_string(), hash_file(&self.path(f))?)))
                .collect()
        };
        manifest.record(ManifestEntry {
            command: command.into(),
            config_hash: self.config_hash.clone(),
            inputs: hash_all(inputs)?,
            outputs: hash_all(outputs)?,
            duration_ms: started.elapsed().as_millis() as u64,
        });
        manifest.save(&self.out_dir)
    }

    fn writer(&self, file: &str) -> Result<BufWriter<File>, CliError> {
        File::create(self.path(file))
            .map(BufWriter::new)
            .map_err(|e| CliError::Validation(format!("cannot create {file}: {e}")))
    }

    fn reader(&self, file: &str) -> Result<BufReader<File>, CliError> {
        File::open(self.path(file))
            .map(BufReader::new)
            .map_err(|e| CliError::Validation(format!("cannot open {file}: {e}")))
    }
}

// ---------------------------------------------------------------------------
// shared loading

struct LoadedData {
    meters: Vec<MeterSeries>,
    feeder: FeederSeries,
    meter_reports: Vec<ingest::CleanReport>,
    feeder_report: ingest::CleanReport,
    calendar: SeasonCalendar,
}

fn load_cleaned(ctx: &Ctx) -> Result<LoadedData, CliError> {
    let z = ctx.config.ingest.z_threshold;
    let (meters, meter_reports) = ingest::load_and_clean_meters(&ctx.path(SM_READINGS), z)?;
    let (feeder, feeder_report) = ingest::load_and_clean_feeder(&ctx.path(SCADA), z)?;
    Ok(LoadedData {
        meters,
        feeder,
        meter_reports,
        feeder_report,
        calendar: ctx.config.ingest.calendar()?,
    })
}

fn load_truth(ctx: &Ctx) -> Result<GroundTruth, CliError> {
    Ok(GroundTruth::load(ctx.reader(GROUND_TRUTH)?)?)
}

fn load_patterns(ctx: &Ctx) -> Result<PatternBank, CliError> {
    Ok(PatternBank::load(ctx.reader(PATTERNS)?)?)
}

fn load_cmpc_map(ctx: &Ctx) -> Result<HashMap<(String, MonthKey), f64>, CliError> {
    let records = cmpc::read_cmpc_csv(ctx.reader(CMPC_CSV)?)?;
    Ok(records
        .into_iter()
        .map(|r| ((r.customer_id, r.month), r.value))
        .collect())
}

fn season_dates(
    feeder: &FeederSeries,
    calendar: &SeasonCalendar,
    season: Season,
) -> Vec<NaiveDate> {
    feeder
        .dates()
        .into_iter()
        .filter(|d| calendar.season_of(*d) == season)
        .collect()
}

fn billing_map(meters: &[MeterSeries]) -> HashMap<(String, MonthKey), f64> {
    let mut map = HashMap::new();
    for meter in meters {
        for bill in ingest::aggregate_monthly(meter) {
            map.insert((bill.customer_id, bill.month), bill.energy_kwh);
        }
    }
    map
}

// ---------------------------------------------------------------------------
// commands

pub fn cmd_synth(ctx: &Ctx) -> Result<(), CliError> {
    let started = Instant::now();
    ctx.require(&[])?;
    let config = ctx.config.synth.to_core(ctx.config.seed);
    let out = synth::generate(&config)?;
    synth::write_sm_readings_csv(ctx.writer(SM_READINGS)?, &out.meters)?;
    synth::write_scada_csv(ctx.writer(SCADA)?, &out.feeder)?;
    synth::write_survey_csv(ctx.writer(SURVEY)?, &out.survey)?;
    out.truth.save(ctx.writer(GROUND_TRUTH)?)?;
    synth::write_labels_csv(ctx.writer(LABELS)?, &out.truth)?;
    ctx.record(
        "synth",
        &[],
        &[SM_READINGS, SCADA, SURVEY, GROUND_TRUTH, LABELS],
        started,
    )?;
    println!(
        "synth: {} customers x {} months -> {}",
        config.n_customers,
        config.n_months,
        ctx.out_dir.display()
    );
    Ok(())
}

pub fn cmd_ingest(ctx: &Ctx) -> Result<(), CliError> {
    let started = Instant::now();
    ctx.require(&[SM_READINGS, SCADA])?;
    let data = load_cleaned(ctx)?;
    let mut reports = data.meter_reports.clone();
    reports.push(data.feeder_report.clone());
    ingest::write_clean_report(ctx.writer(CLEAN_REPORT)?, &reports)?;
    ctx.record("ingest", &[SM_READINGS, SCADA], &[CLEAN_REPORT], started)?;
    let replaced: usize = reports.iter().map(|r| r.n_replaced).sum();
    let filled: usize = reports.iter().map(|r| r.n_filled).sum();
    println!(
        "ingest: {} series cleaned ({replaced} replaced, {filled} filled)",
        data.meters.len()
    );
    Ok(())
}

pub fn cmd_cmpc(ctx: &Ctx) -> Result<(), CliError> {
    let started = Instant::now();
    ctx.require(&[SM_READINGS, SCADA])?;
    let data = load_cleaned(ctx)?;
    let records = cmpc::compute_all(&data.meters, &data.feeder);
    cmpc::write_cmpc_csv(ctx.writer(CMPC_CSV)?, &records)?;
    ctx.record("cmpc", &[SM_READINGS, SCADA], &[CMPC_CSV], started)?;
    println!("cmpc: {} customer-month records", records.len());
    Ok(())
}

pub fn cmd_cluster(ctx: &Ctx) -> Result<(), CliError> {
    let started = Instant::now();
    ctx.require(&[SM_READINGS, SCADA, GROUND_TRUTH])?;
    let data = load_cleaned(ctx)?;
    let truth = load_truth(ctx)?;
    let observable: std::collections::HashSet<String> =
        truth.observable_ids().into_iter().collect();
    let training: Vec<MeterSeries> = data
        .meters
        .iter()
        .filter(|m| observable.contains(&m.customer_id))
        .cloned()
        .collect();
    let split = ingest::split_seasons(&training, &data.feeder, &data.calendar);
    if !split.warnings.is_empty() {
        println!(
            "cluster: {} customer-season exclusions (no complete days)",
            split.warnings.len()
        );
    }
    let spectral_config = ctx.config.spectral.to_core(ctx.config.seed);

    let mut seasons: PerSeason<Option<SeasonPatterns>> = PerSeason::from_fn(|_| None);
    for season in Season::ALL {
        let dataset = split.datasets.get(season);
        if dataset.customers.len() < 3 {
            println!(
                "cluster: {season} skipped ({} customers with complete days)",
                dataset.customers.len()
            );
            continue;
        }
        let profiles: Vec<Vec<f64>> = dataset.profiles().iter().map(|p| p.to_vec()).collect();
        let clustering = match spectral::select_k_and_cluster(&profiles, &spectral_config) {
            Ok(c) => c,
            Err(peakshare_core::Error::InsufficientData { .. }) => {
                println!("cluster: {season} skipped (not enough data for the k range)");
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        *seasons.get_mut(season) = Some(SeasonPatterns {
            chosen_k: clustering.chosen_k,
            centroids: clustering.centroids,
            member_counts: clustering.member_counts,
            dbi_curve: clustering
                .dbi_curve
                .iter()
                .map(|&(k, v)| (k, v.is_finite().then_some(v)))
                .collect(),
            customer_ids: dataset.customer_ids(),
            labels: clustering.labels,
        });
    }

    let bank = PatternBank {
        version: spectral::PATTERN_BANK_VERSION,
        config: spectral_config,
        seasons,
    };
    bank.save(ctx.writer(PATTERNS)?)?;
    ctx.record(
        "cluster",
        &[SM_READINGS, SCADA, GROUND_TRUTH],
        &[PATTERNS],
        started,
    )?;
    for (season, entry) in bank.seasons.iter() {
        if let Some(p) = entry {
            println!(
                "cluster: {season} k={} members={:?}",
                p.chosen_k, p.member_counts
            );
        }
    }
    Ok(())
}

/// Timing features for a set of customers over one season's dates.
fn timing_features(
    meters: &HashMap<&str, &MeterSeries>,
    ids: &[String],
    dates: &[NaiveDate],
) -> Result<Vec<Vec<f64>>, CliError> {
    let mut out = Vec::with_capacity(ids.len());
    for id in ids {
        let meter = meters
            .get(id.as_str())
            .ok_or_else(|| CliError::Validation(format!("no meter data for customer {id}")))?;
        let dist = cmpc::peak_timing_distribution(meter, dates)?;
        out.push(dist.probs.to_vec());
    }
    Ok(out)
}

pub fn cmd_train(ctx: &Ctx) -> Result<(), CliError> {
    let started = Instant::now();
    let inputs = [SM_READINGS, SCADA, SURVEY, GROUND_TRUTH, PATTERNS, CMPC_CSV];
    ctx.require(&inputs)?;
    let data = load_cleaned(ctx)?;
    let patterns = load_patterns(ctx)?;
    let cmpc_map = load_cmpc_map(ctx)?;
    let survey: HashMap<String, [f64; 24]> = classify::read_survey(ctx.reader(SURVEY)?)?
        .into_iter()
        .collect();
    let billing = billing_map(&data.meters);
    let by_id: HashMap<&str, &MeterSeries> = data
        .meters
        .iter()
        .map(|m| (m.customer_id.as_str(), m))
        .collect();

    let feature_spec = ctx.config.classify.feature_spec();
    let train_options = ctx.config.classify.train_options();
    let season_months: PerSeason<Vec<u32>> = PerSeason::from_fn(|s| data.calendar.months_of(s));

    let mut mlr_seasons: PerSeason<Option<SeasonMlr>> = PerSeason::from_fn(|_| None);
    let mut cv_survey_seasons: PerSeason<Option<CvReport>> = PerSeason::from_fn(|_| None);
    let mut cv_meter_seasons: PerSeason<Option<CvReport>> = PerSeason::from_fn(|_| None);
    let mut wcr_seasons: PerSeason<Option<SeasonWcr>> = PerSeason::from_fn(|_| None);

    for season in Season::ALL {
        let Some(season_patterns) = patterns.seasons.get(season) else {
            continue;
        };
        let dates = season_dates(&data.feeder, &data.calendar, season);
        let raw_features = timing_features(&by_id, &season_patterns.customer_ids, &dates)?;
        let labels = &season_patterns.labels;
        let k = season_patterns.chosen_k;

        // classifier: fit on every observable customer of the season
        let transformed: Vec<Vec<f64>> = raw_features
            .iter()
            .map(|x| feature_spec.transform(x))
            .collect();
        let model = classify::train_irls(&transformed, labels, k, &train_options)?;
        let cv_meter = classify::kfold_cv(
            &raw_features,
            labels,
            k,
            ctx.config.classify.k_folds,
            ctx.config.seed,
            &feature_spec,
            &train_options,
        )?;
        let survey_features: Vec<Vec<f64>> = season_patterns
            .customer_ids
            .iter()
            .map(|id| {
                survey
                    .get(id)
                    .map(|v| v.to_vec())
                    .ok_or_else(|| CliError::Validation(format!("no survey row for {id}")))
            })
            .collect::<Result<_, _>>()?;
        let cv_survey = classify::kfold_cv(
            &survey_features,
            labels,
            k,
            ctx.config.classify.k_folds,
            ctx.config.seed,
            &feature_spec,
            &train_options,
        )?;

        // clusterwise regression: fit lines on the train side of a seeded
        // customer split, report held-out accuracy on the other side
        let ids = &season_patterns.customer_ids;
        let (train_ids, test_ids) =
            wcr::split_train_test(ids, ctx.config.wcr.split_ratio, ctx.config.seed)?;
        let train_set: std::collections::HashSet<&str> =
            train_ids.iter().map(String::as_str).collect();
        let label_of: HashMap<&str, usize> = ids
            .iter()
            .zip(labels)
            .map(|(id, &z)| (id.as_str(), z))
            .collect();

        let months = &season_months.get(season);
        let sample_pairs = |id: &str| -> Vec<(f64, f64)> {
            let mut out = Vec::new();
            for month in data.feeder.months() {
                if !months.contains(&month.month) {
                    continue;
                }
                let key = (id.to_string(), month);
                if let (Some(&e), Some(&f)) = (billing.get(&key), cmpc_map.get(&key)) {
                    out.push((e, f));
                }
            }
            out
        };

        let mut fallback_clusters = Vec::new();
        let global_pairs: Vec<(f64, f64)> = ids
            .iter()
            .filter(|id| train_set.contains(id.as_str()))
            .flat_map(|id| sample_pairs(id))
            .collect();
        let global_line = wcr::fit_cluster_ols(0, &global_pairs)?;
        let mut regressions: Vec<ClusterRegression> = Vec::with_capacity(k);
        for z in 0..k {
            let pairs: Vec<(f64, f64)> = ids
                .iter()
                .filter(|id| train_set.contains(id.as_str()) && label_of[id.as_str()] == z)
                .flat_map(|id| sample_pairs(id))
                .collect();
            match wcr::fit_cluster_ols(z, &pairs) {
                Ok(line) => regressions.push(line),
                // a tiny or degenerate cluster falls back to the global line
                Err(peakshare_core::Error::InsufficientData { .. })
                | Err(peakshare_core::Error::SingularSystem(_)) => {
                    fallback_clusters.push(z);
                    regressions.push(ClusterRegression {
                        cluster: z,
                        ..global_line.clone()
                    });
                }
                Err(e) => return Err(e.into()),
            }
        }

        // held-out diagnostics with the full probabilistic estimator
        let mut actual = Vec::new();
        let mut predicted = Vec::new();
        for id in &test_ids {
            let meter = by_id[id.as_str()];
            let Ok(dist) = cmpc::peak_timing_distribution(meter, &dates) else {
                continue;
            };
            let probs = classify::predict(&model, &feature_spec.transform(&dist.probs));
            for month in data.feeder.months() {
                if !months.contains(&month.month) {
                    continue;
                }
                let key = (id.clone(), month);
                if let (Some(&e), Some(&f)) = (billing.get(&key), cmpc_map.get(&key)) {
                    let (value, _, _) = wcr::estimate(&regressions, &probs, e)?;
                    actual.push(f);
                    predicted.push(value);
                }
            }
        }
        let holdout_r2 = wcr::r2(&actual, &predicted).ok();
        let holdout_mape = wcr::mape(&actual, &predicted).ok().map(|(m, _)| m);

        if !fallback_clusters.is_empty() {
            println!("train: {season} clusters {fallback_clusters:?} fell back to the global line");
        }
        *mlr_seasons.get_mut(season) = Some(model);
        *cv_survey_seasons.get_mut(season) = Some(cv_survey);
        *cv_meter_seasons.get_mut(season) = Some(cv_meter);
        *wcr_seasons.get_mut(season) = Some(SeasonWcr {
            regressions,
            holdout_r2,
            holdout_mape,
        });
    }

    let mlr = MlrModel {
        version: classify::MLR_MODEL_VERSION,
        features: feature_spec,
        ridge_lambda: train_options.ridge_lambda,
        seasons: mlr_seasons,
        cv_survey: cv_survey_seasons,
        cv_meter: cv_meter_seasons,
    };
    mlr.save(ctx.writer(MLR_MODEL)?)?;
    let wcr_model = WcrModel {
        version: wcr::WCR_MODEL_VERSION,
        split_ratio: ctx.config.wcr.split_ratio,
        split_seed: ctx.config.seed,
        seasons: wcr_seasons,
    };
    wcr_model.save(ctx.writer(WCR_MODEL)?)?;
    ctx.record("train", &inputs, &[MLR_MODEL, WCR_MODEL], started)?;
    for (season, entry) in wcr_model.seasons.iter() {
        if let Some(s) = entry {
            println!(
                "train: {season} holdout r2={:?} mape={:?}",
                s.holdout_r2.map(|v| (v * 1e4).round() / 1e4),
                s.holdout_mape.map(|v| (v * 100.0).round() / 100.0)
            );
        }
    }
    Ok(())
}

pub fn cmd_estimate(ctx: &Ctx) -> Result<(), CliError> {
    let started = Instant::now();
    let inputs = [
        SM_READINGS,
        SCADA,
        GROUND_TRUTH,
        PATTERNS,
        MLR_MODEL,
        WCR_MODEL,
        CMPC_CSV,
    ];
    ctx.require(&inputs)?;
    let data = load_cleaned(ctx)?;
    let truth = load_truth(ctx)?;
    let mlr = MlrModel::load(ctx.reader(MLR_MODEL)?)?;
    let wcr_model = WcrModel::load(ctx.reader(WCR_MODEL)?)?;
    let cmpc_map = load_cmpc_map(ctx)?;
    let billing = billing_map(&data.meters);
    let by_id: HashMap<&str, &MeterSeries> = data
        .meters
        .iter()
        .map(|m| (m.customer_id.as_str(), m))
        .collect();

    let survey: HashMap<String, [f64; 24]> = match ctx.config.estimate.features {
        EstimateFeatures::Survey => {
            ctx.require(&[SURVEY])?;
            classify::read_survey(ctx.reader(SURVEY)?)?
                .into_iter()
                .collect()
        }
        EstimateFeatures::Meter => HashMap::new(),
    };

    let unobservable: Vec<String> = {
        let set: std::collections::HashSet<String> = truth.unobservable_ids().into_iter().collect();
        // meter order keeps the output deterministic
        data.meters
            .iter()
            .filter(|m| set.contains(&m.customer_id))
            .map(|m| m.customer_id.clone())
            .collect()
    };
    if unobservable.is_empty() {
        return Err(CliError::Validation(
            "no unobservable customers to estimate (observable_fraction is 1?)".into(),
        ));
    }

    let dates_by_season: PerSeason<Vec<NaiveDate>> =
        PerSeason::from_fn(|s| season_dates(&data.feeder, &data.calendar, s));

    let mut records: Vec<EstimateRecord> = Vec::new();
    let mut details: Vec<EstimateDetail> = Vec::new();
    for id in &unobservable {
        let meter = by_id[id.as_str()];
        // per-season probabilities, computed once per customer
        let probs_by_season: PerSeason<Option<Vec<f64>>> = PerSeason::from_fn(|season| {
            let model = mlr.seasons.get(season).as_ref()?;
            let raw: Vec<f64> = match ctx.config.estimate.features {
                EstimateFeatures::Meter => {
                    let dates = dates_by_season.get(season);
                    cmpc::peak_timing_distribution(meter, dates)
                        .ok()?
                        .probs
                        .to_vec()
                }
                EstimateFeatures::Survey => survey.get(id)?.to_vec(),
            };
            Some(classify::predict(model, &mlr.features.transform(&raw)))
        });
        for month in data.feeder.months() {
            let season = data.calendar.season_of_month(month.month);
            let (Some(probs), Some(season_wcr)) = (
                probs_by_season.get(season).as_ref(),
                wcr_model.seasons.get(season).as_ref(),
            ) else {
                continue;
            };
            let key = (id.clone(), month);
            let Some(&energy) = billing.get(&key) else {
                continue;
            };
            let (value, raw, clamped) = wcr::estimate(&season_wcr.regressions, probs, energy)?;
            let actual = cmpc_map.get(&key).copied();
            records.push(EstimateRecord {
                customer_id: id.clone(),
                month,
                actual,
                estimated: value,
                pre_clamp: raw,
                clamped,
            });
            details.push(EstimateDetail {
                customer_id: id.clone(),
                month,
                season,
                actual,
                estimated: value,
                pre_clamp: raw,
                clamped,
                probs: probs.clone(),
            });
        }
    }

    wcr::write_estimates_csv(ctx.writer(ESTIMATES)?, &records)?;

    let seasons = PerSeason::from_fn(|season| {
        let season_details: Vec<(&EstimateDetail, f64)> = details
            .iter()
            .filter(|d| d.season == season)
            .map(|d| {
                let e = billing[&(d.customer_id.clone(), d.month)];
                (d, e)
            })
            .collect();
        wcr::summarize_season(&season_details).ok()
    });
    let report = EstimateReport {
        version: wcr::ESTIMATE_REPORT_VERSION,
        seasons,
        records: details,
    };
    report.save(ctx.writer(ESTIMATE_REPORT)?)?;
    ctx.record("estimate", &inputs, &[ESTIMATES, ESTIMATE_REPORT], started)?;
    for (season, entry) in report.seasons.iter() {
        if let Some(s) = entry {
            println!(
                "estimate: {season} r2={:.4} mape={:.2}% ({} records, {} clamped)",
                s.r2_pooled, s.mape_pooled, s.n_records, s.clamped_count
            );
        }
    }
    Ok(())
}

/// Strategy comparison payload (`bench_report.json`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub version: u32,
    /// Global single-line baseline evaluated on the same held-out records
    /// the clusterwise estimator is scored on.
    pub baseline_slope: f64,
    pub baseline_intercept: f64,
    pub baseline_mape: f64,
    pub baseline_r2: f64,
    pub wcr_mape: f64,
    pub wcr_r2: f64,
    /// Percentage points by which the clusterwise estimator beats the baseline.
    pub mape_gap_points: f64,
    /// Pearson correlation between seasonal mean contribution and peak-hour
    /// entropy, per season.
    pub entropy_cmpc_pearson: PerSeason<Option<f64>>,
    /// Customer peak over mean contribution at the system peak, distribution
    /// over customer-months.
    pub peak_ratio_mean: f64,
    pub peak_ratio_p95: f64,
    pub peak_ratio_max: f64,
}

fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

pub fn cmd_bench(ctx: &Ctx) -> Result<(), CliError> {
    let started = Instant::now();
    let inputs = [SM_READINGS, SCADA, GROUND_TRUTH, CMPC_CSV, ESTIMATES];
    ctx.require(&inputs)?;
    let data = load_cleaned(ctx)?;
    let truth = load_truth(ctx)?;
    let cmpc_records = cmpc::read_cmpc_csv(ctx.reader(CMPC_CSV)?)?;
    let estimates = wcr::read_estimates_csv(ctx.reader(ESTIMATES)?)?;
    let billing = billing_map(&data.meters);

    // global baseline fit on observable customers only, like the estimator
    let observable: std::collections::HashSet<String> =
        truth.observable_ids().into_iter().collect();
    let observable_billing: Vec<MonthlyBilling> = data
        .meters
        .iter()
        .filter(|m| observable.contains(&m.customer_id))
        .flat_map(ingest::aggregate_monthly)
        .collect();
    let observable_cmpc: Vec<CmpcRecord> = cmpc_records
        .iter()
        .filter(|r| observable.contains(&r.customer_id))
        .cloned()
        .collect();
    let baseline = strategies::baseline_ols_peak(&observable_billing, &observable_cmpc)?;

    // score both estimators on the same held-out records
    let mut actual = Vec::new();
    let mut wcr_pred = Vec::new();
    let mut baseline_pred = Vec::new();
    for record in &estimates {
        let Some(a) = record.actual else { continue };
        let Some(&e) = billing.get(&(record.customer_id.clone(), record.month)) else {
            continue;
        };
        actual.push(a);
        wcr_pred.push(record.estimated);
        baseline_pred.push(baseline.predict(e).clamp(0.0, 1.0));
    }
    let (wcr_mape, _) = wcr::mape(&actual, &wcr_pred)?;
    let wcr_r2 = wcr::r2(&actual, &wcr_pred)?;
    let (baseline_mape, _) = wcr::mape(&actual, &baseline_pred)?;
    let baseline_r2 = wcr::r2(&actual, &baseline_pred)?;

    // entropy vs contribution, per season over observable customers
    let entropy_cmpc_pearson = PerSeason::from_fn(|season| {
        let dates = season_dates(&data.feeder, &data.calendar, season);
        let months: Vec<MonthKey> = {
            let mut seen = Vec::new();
            for d in &dates {
                let m = MonthKey::of(*d);
                if !seen.contains(&m) {
                    seen.push(m);
                }
            }
            seen
        };
        let mut entropies = Vec::new();
        let mut contributions = Vec::new();
        for meter in &data.meters {
            if !observable.contains(&meter.customer_id) {
                continue;
            }
            let Ok(h) = strategies::profile_entropy(meter, &dates) else {
                continue;
            };
            let values: Vec<f64> = cmpc_records
                .iter()
                .filter(|r| r.customer_id == meter.customer_id && months.contains(&r.month))
                .map(|r| r.value)
                .collect();
            if values.is_empty() {
                continue;
            }
            entropies.push(h);
            contributions.push(values.iter().sum::<f64>() / values.len() as f64);
        }
        pearson(&contributions, &entropies)
    });

    // customer peak over mean contribution at the system peak hour
    let mut ratios = Vec::new();
    for meter in &data.meters {
        for month in data.feeder.months() {
            let peaks = cmpc::daily_peaks(&data.feeder, month);
            let mut contribution_sum = 0.0;
            let mut n = 0usize;
            for p in &peaks.peaks {
                let t = p.day.and_hms_opt(p.hour, 0, 0).unwrap();
                if let Some(v) = meter.value_at(t) {
                    contribution_sum += v;
                    n += 1;
                }
            }
            if n == 0 || contribution_sum == 0.0 {
                continue;
            }
            let mean_contribution = contribution_sum / n as f64;
            if let Ok(peak) = strategies::customer_peak(meter, month) {
                ratios.push(peak / mean_contribution);
            }
        }
    }
    ratios.sort_by(|a, b| a.total_cmp(b));
    let peak_ratio_mean = ratios.iter().sum::<f64>() / ratios.len().max(1) as f64;
    let peak_ratio_p95 = ratios
        .get(((ratios.len() as f64) * 0.95) as usize)
        .copied()
        .unwrap_or(f64::NAN);
    let peak_ratio_max = ratios.last().copied().unwrap_or(f64::NAN);

    let report = BenchReport {
        version: 1,
        baseline_slope: baseline.slope,
        baseline_intercept: baseline.intercept,
        baseline_mape,
        baseline_r2,
        wcr_mape,
        wcr_r2,
        mape_gap_points: baseline_mape - wcr_mape,
        entropy_cmpc_pearson,
        peak_ratio_mean,
        peak_ratio_p95,
        peak_ratio_max,
    };
    serde_json::to_writer_pretty(ctx.writer(BENCH_REPORT)?, &report)
        .map_err(|e| CliError::Validation(format!("cannot write {BENCH_REPORT}: {e}")))?;
    ctx.record("bench", &inputs, &[BENCH_REPORT], started)?;
    println!(
        "bench: wcr mape {:.2}% vs baseline {:.2}% (gap {:.2} points)",
        report.wcr_mape, report.baseline_mape, report.mape_gap_points
    );
    Ok(())
}

pub fn cmd_dr(ctx: &Ctx) -> Result<(), CliError> {
    let started = Instant::now();
    let inputs = [SM_READINGS, SCADA, PATTERNS, MLR_MODEL, WCR_MODEL];
    ctx.require(&inputs)?;
    let data = load_cleaned(ctx)?;
    let mlr = MlrModel::load(ctx.reader(MLR_MODEL)?)?;
    let wcr_model = WcrModel::load(ctx.reader(WCR_MODEL)?)?;
    let billing = billing_map(&data.meters);
    let dr_config = ctx.config.dr.to_core();

    let all_dates = data.feeder.dates();
    let dates: Vec<NaiveDate> = all_dates
        .iter()
        .copied()
        .take(dr_config.horizon_days as usize)
        .collect();
    if dates.len() < dr_config.horizon_days as usize {
        return Err(CliError::Validation(format!(
            "data covers {} days, horizon needs {}",
            all_dates.len(),
            dr_config.horizon_days
        )));
    }
    let candidates: Vec<MeterSeries> = data
        .meters
        .iter()
        .filter(|m| dates.iter().all(|d| m.complete_day(*d).is_some()))
        .cloned()
        .collect();

    // estimated contribution for every candidate, through the trained models
    let dates_by_season: PerSeason<Vec<NaiveDate>> =
        PerSeason::from_fn(|s| season_dates(&data.feeder, &data.calendar, s));
    let mut estimates: HashMap<String, f64> = HashMap::new();
    for meter in &candidates {
        let mut sum = 0.0;
        let mut n = 0usize;
        for month in dates
            .iter()
            .map(|d| MonthKey::of(*d))
            .collect::<std::collections::BTreeSet<_>>()
        {
            let season = data.calendar.season_of_month(month.month);
            let (Some(model), Some(season_wcr)) = (
                mlr.seasons.get(season).as_ref(),
                wcr_model.seasons.get(season).as_ref(),
            ) else {
                continue;
            };
            let Ok(dist) = cmpc::peak_timing_distribution(meter, dates_by_season.get(season))
            else {
                continue;
            };
            let probs = classify::predict(model, &mlr.features.transform(&dist.probs));
            let Some(&energy) = billing.get(&(meter.customer_id.clone(), month)) else {
                continue;
            };
            if let Ok((value, _, _)) = wcr::estimate(&season_wcr.regressions, &probs, energy) {
                sum += value;
                n += 1;
            }
        }
        if n > 0 {
            estimates.insert(meter.customer_id.clone(), sum / n as f64);
        }
    }

    let strategy_inputs =
        strategies::StrategyInputs::compute(&candidates, &data.feeder, &dates, &estimates)?;
    let results = strategies::simulate_strategies(
        &dr_config,
        &candidates,
        &data.feeder,
        &Strategy::ALL,
        &strategy_inputs,
        &dates,
        ctx.config.seed,
    )?;
    strategies::write_dr_report_csv(ctx.writer(DR_REPORT)?, &results)?;
    let summary = StrategySummary::from_results(&results);
    serde_json::to_writer_pretty(ctx.writer(STRATEGY_SUMMARY)?, &summary)
        .map_err(|e| CliError::Validation(format!("cannot write {STRATEGY_SUMMARY}: {e}")))?;
    ctx.record("dr", &inputs, &[DR_REPORT, STRATEGY_SUMMARY], started)?;
    for (name, total) in &summary.totals_kwh {
        println!("dr: {name} total reduction {total:.1} kWh");
    }
    Ok(())
}

/// Final merged report (`report.json`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeasonReportRow {
    pub season: Season,
    pub chosen_k: usize,
    pub member_counts: Vec<usize>,
    /// Macro AUC on survey-grade features (deployment difficulty).
    pub cv_mean_auc: Option<f64>,
    pub cv_fold_aucs: Vec<f64>,
    /// Macro AUC on meter-derived timing features (upper bound).
    pub cv_mean_auc_meter: Option<f64>,
    pub r2_pooled: Option<f64>,
    pub mape_pooled: Option<f64>,
    pub r2_per_cluster_mean: Option<f64>,
    pub mape_per_cluster_mean: Option<f64>,
    pub holdout_r2: Option<f64>,
    pub holdout_mape: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub version: u32,
    pub n_estimate_records: usize,
    pub seasons: Vec<SeasonReportRow>,
}

pub fn cmd_report(ctx: &Ctx) -> Result<(), CliError> {
    let started = Instant::now();
    let inputs = [PATTERNS, MLR_MODEL, WCR_MODEL, ESTIMATES, ESTIMATE_REPORT];
    ctx.require(&inputs)?;
    let patterns = load_patterns(ctx)?;
    let mlr = MlrModel::load(ctx.reader(MLR_MODEL)?)?;
    let wcr_model = WcrModel::load(ctx.reader(WCR_MODEL)?)?;
    let estimate_report = EstimateReport::load(ctx.reader(ESTIMATE_REPORT)?)?;
    let estimates = wcr::read_estimates_csv(ctx.reader(ESTIMATES)?)?;

    let mut rows = Vec::new();
    for season in Season::ALL {
        let Some(p) = patterns.seasons.get(season) else {
            continue;
        };
        let cv = mlr.cv_survey.get(season).as_ref();
        let cv_meter = mlr.cv_meter.get(season).as_ref();
        let stats = estimate_report.seasons.get(season).as_ref();
        let season_wcr = wcr_model.seasons.get(season).as_ref();
        rows.push(SeasonReportRow {
            season,
            chosen_k: p.chosen_k,
            member_counts: p.member_counts.clone(),
            cv_mean_auc: cv.map(|c| c.mean_auc),
            cv_fold_aucs: cv.map(|c| c.fold_aucs.clone()).unwrap_or_default(),
            cv_mean_auc_meter: cv_meter.map(|c| c.mean_auc),
            r2_pooled: stats.map(|s| s.r2_pooled),
            mape_pooled: stats.map(|s| s.mape_pooled),
            r2_per_cluster_mean: stats.and_then(|s| s.r2_per_cluster_mean),
            mape_per_cluster_mean: stats.and_then(|s| s.mape_per_cluster_mean),
            holdout_r2: season_wcr.and_then(|s| s.holdout_r2),
            holdout_mape: season_wcr.and_then(|s| s.holdout_mape),
        });
    }

    let report = Report {
        version: 1,
        n_estimate_records: estimates.len(),
        seasons: rows,
    };
    serde_json::to_writer_pretty(ctx.writer(REPORT)?, &report)
        .map_err(|e| CliError::Validation(format!("cannot write {REPORT}: {e}")))?;

    // plot-ready CSVs
    {
        let mut w = csv::WriterBuilder::new().from_writer(ctx.writer(REPORT_SEASONAL)?);
        w.write_record(["season", "chosen_k", "cv_mean_auc", "r2", "mape_pct"])
            .and_then(|_| {
                for row in &report.seasons {
                    w.write_record([
                        row.season.as_str().to_string(),
                        row.chosen_k.to_string(),
                        row.cv_mean_auc.map_or(String::new(), |v| v.to_string()),
                        row.r2_pooled.map_or(String::new(), |v| v.to_string()),
                        row.mape_pooled.map_or(String::new(), |v| v.to_string()),
                    ])?;
                }
                w.flush()?;
                Ok(())
            })
            .map_err(|e| CliError::Validation(format!("cannot write {REPORT_SEASONAL}: {e}")))?;
    }
    {
        let mut w = csv::WriterBuilder::new().from_writer(ctx.writer(DBI_CURVES)?);
        w.write_record(["season", "k", "dbi"])
            .and_then(|_| {
                for season in Season::ALL {
                    if let Some(p) = patterns.seasons.get(season) {
                        for (k, dbi) in &p.dbi_curve {
                            w.write_record([
                                season.as_str().to_string(),
                                k.to_string(),
                                dbi.map_or("inf".to_string(), |v| v.to_string()),
                            ])?;
                        }
                    }
                }
                w.flush()?;
                Ok(())
            })
            .map_err(|e| CliError::Validation(format!("cannot write {DBI_CURVES}: {e}")))?;
    }
    ctx.record(
        "report",
        &inputs,
        &[REPORT, REPORT_SEASONAL, DBI_CURVES],
        started,
    )?;
    for row in &report.seasons {
        println!(
            "report: {} k={} auc={:?} r2={:?} mape={:?}",
            row.season, row.chosen_k, row.cv_mean_auc, row.r2_pooled, row.mape_pooled
        );
    }
    Ok(())
}

/// Runs the whole pipeline in order.
pub fn run_all(ctx: &Ctx) -> Result<(), CliError> {
    cmd_synth(ctx)?;
    cmd_ingest(ctx)?;
    cmd_cmpc(ctx)?;
    cmd_cluster(ctx)?;
    cmd_train(ctx)?;
    cmd_estimate(ctx)?;
    cmd_bench(ctx)?;
    cmd_dr(ctx)?;
    cmd_report(ctx)?;
    Ok(())
}

/// File names every pipeline run is expected to produce, in a stable order.
pub fn all_artifacts() -> Vec<&'static str> {
    vec![
        SM_READINGS,
        SCADA,
        SURVEY,
        GROUND_TRUTH,
        LABELS,
        CLEAN_REPORT,
        CMPC_CSV,
        PATTERNS,
        MLR_MODEL,
        WCR_MODEL,
        ESTIMATES,
        ESTIMATE_REPORT,
        BENCH_REPORT,
        DR_REPORT,
        STRATEGY_SUMMARY,
        REPORT,
        REPORT_SEASONAL,
        DBI_CURVES,
    ]
}
