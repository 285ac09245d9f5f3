//! Clusterwise ordinary least squares from monthly energy to peak
//! contribution, combined across clusters by classifier probabilities.
//!
//! Each cluster `z` carries an affine map `F ~ W_z * E + b_z` fit by OLS on
//! that cluster's (energy, contribution) pairs; the weighted estimator for a
//! customer is `sum_z P(C = z | X) * (W_z * E + b_z)`, clamped to [0, 1] with
//! the pre-clamp value retained.

use std::io::{Read, Write};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calendar::{MonthKey, PerSeason};
use crate::error::{Error, Result};

/// Affine map for one cluster with fit diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRegression {
    pub cluster: usize,
    /// Contribution per kWh.
    pub slope: f64,
    pub intercept: f64,
    pub n: usize,
    /// Unbiased residual variance (0 for an exact two-point fit).
    pub residual_variance: f64,
    /// Mean residual; near zero by the OLS normal equations.
    pub mean_residual: f64,
}

impl ClusterRegression {
    pub fn predict(&self, energy_kwh: f64) -> f64 {
        self.slope * energy_kwh + self.intercept
    }
}

/// Per-season regressions aligned with the pattern bank's clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonWcr {
    pub regressions: Vec<ClusterRegression>,
    /// Held-out diagnostics from the train/test split, when evaluated.
    pub holdout_r2: Option<f64>,
    pub holdout_mape: Option<f64>,
}

/// Versioned regression artifact (`wcr_model.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WcrModel {
    pub version: u32,
    pub split_ratio: f64,
    pub split_seed: u64,
    pub seasons: PerSeason<Option<SeasonWcr>>,
}

pub const WCR_MODEL_VERSION: u32 = 1;

impl WcrModel {
    pub fn save<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    pub fn load<R: Read>(reader: R) -> Result<Self> {
        Ok(serde_json::from_reader(reader)?)
    }
}

/// One estimate with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub customer_id: String,
    pub month: MonthKey,
    pub actual: Option<f64>,
    pub estimated: f64,
    /// Estimator output before clamping to [0, 1].
    pub pre_clamp: f64,
    pub clamped: bool,
}

/// One estimate with full provenance for the JSON report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateDetail {
    pub customer_id: String,
    pub month: MonthKey,
    pub season: crate::calendar::Season,
    pub actual: Option<f64>,
    pub estimated: f64,
    pub pre_clamp: f64,
    pub clamped: bool,
    /// Class probabilities the mixture used.
    pub probs: Vec<f64>,
}

/// Per-season accuracy aggregates over estimate records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonEstimateStats {
    pub n_records: usize,
    /// Pooled over every (customer, month) record of the season.
    pub r2_pooled: f64,
    pub mape_pooled: f64,
    /// Zero-actual records excluded from the MAPE.
    pub mape_excluded: usize,
    /// Unweighted means over per-cluster metrics (customers grouped by their
    /// most probable cluster); `None` when undefined for every cluster.
    pub r2_per_cluster_mean: Option<f64>,
    pub mape_per_cluster_mean: Option<f64>,
    pub clamped_count: usize,
    pub mean_residual: f64,
    /// Residual variance in the upper energy half over the lower half.
    pub heteroskedasticity_ratio: Option<f64>,
}

/// Estimation report artifact (`estimate_report.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub version: u32,
    pub seasons: PerSeason<Option<SeasonEstimateStats>>,
    pub records: Vec<EstimateDetail>,
}

pub const ESTIMATE_REPORT_VERSION: u32 = 1;

impl EstimateReport {
    pub fn save<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    pub fn load<R: Read>(reader: R) -> Result<Self> {
        Ok(serde_json::from_reader(reader)?)
    }
}

/// Aggregates one season's estimate details (with known actuals and monthly
/// energies) into [`SeasonEstimateStats`].
pub fn summarize_season(details: &[(&EstimateDetail, f64)]) -> Result<SeasonEstimateStats> {
    let with_actual: Vec<(&EstimateDetail, f64)> = details
        .iter()
        .filter(|(d, _)| d.actual.is_some())
        .map(|(d, e)| (*d, *e))
        .collect();
    if with_actual.len() < 2 {
        return Err(Error::InsufficientData {
            context: "summarize_season".into(),
            needed: 2,
            got: with_actual.len(),
        });
    }
    let actual: Vec<f64> = with_actual.iter().map(|(d, _)| d.actual.unwrap()).collect();
    let predicted: Vec<f64> = with_actual.iter().map(|(d, _)| d.estimated).collect();
    let r2_pooled = r2(&actual, &predicted)?;
    let (mape_pooled, mape_excluded) = mape(&actual, &predicted)?;

    // per-cluster metrics by most probable cluster
    let k = with_actual
        .iter()
        .map(|(d, _)| d.probs.len())
        .max()
        .unwrap_or(0);
    let mut r2_sum = 0.0;
    let mut r2_n = 0usize;
    let mut mape_sum = 0.0;
    let mut mape_n = 0usize;
    for z in 0..k {
        let members: Vec<&(&EstimateDetail, f64)> = with_actual
            .iter()
            .filter(|(d, _)| {
                d.probs
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(i, _)| i)
                    == Some(z)
            })
            .collect();
        if members.len() < 2 {
            continue;
        }
        let a: Vec<f64> = members.iter().map(|(d, _)| d.actual.unwrap()).collect();
        let p: Vec<f64> = members.iter().map(|(d, _)| d.estimated).collect();
        if let Ok(v) = r2(&a, &p) {
            r2_sum += v;
            r2_n += 1;
        }
        if let Ok((v, _)) = mape(&a, &p) {
            mape_sum += v;
            mape_n += 1;
        }
    }

    let mean_residual = with_actual
        .iter()
        .map(|(d, _)| d.actual.unwrap() - d.estimated)
        .sum::<f64>()
        / with_actual.len() as f64;

    // heteroskedasticity: residual variance in the upper vs lower energy half
    let mut by_energy: Vec<(f64, f64)> = with_actual
        .iter()
        .map(|(d, e)| (*e, d.actual.unwrap() - d.estimated))
        .collect();
    by_energy.sort_by(|a, b| a.0.total_cmp(&b.0));
    let half = by_energy.len() / 2;
    let var = |xs: &[(f64, f64)]| {
        if xs.len() < 2 {
            return None;
        }
        let m = xs.iter().map(|(_, r)| r).sum::<f64>() / xs.len() as f64;
        Some(xs.iter().map(|(_, r)| (r - m).powi(2)).sum::<f64>() / xs.len() as f64)
    };
    let heteroskedasticity_ratio = match (var(&by_energy[half..]), var(&by_energy[..half])) {
        (Some(hi), Some(lo)) if lo > 0.0 => Some(hi / lo),
        _ => None,
    };

    Ok(SeasonEstimateStats {
        n_records: details.len(),
        r2_pooled,
        mape_pooled,
        mape_excluded,
        r2_per_cluster_mean: (r2_n > 0).then(|| r2_sum / r2_n as f64),
        mape_per_cluster_mean: (mape_n > 0).then(|| mape_sum / mape_n as f64),
        clamped_count: details.iter().filter(|(d, _)| d.clamped).count(),
        mean_residual,
        heteroskedasticity_ratio,
    })
}

/// Fits one cluster's OLS line in closed form.
///
/// Requires at least two points with at least two distinct energies.
pub fn fit_cluster_ols(cluster: usize, pairs: &[(f64, f64)]) -> Result<ClusterRegression> {
    let n = pairs.len();
    if n < 2 {
        return Err(Error::InsufficientData {
            context: format!("fit_cluster_ols cluster {cluster}"),
            needed: 2,
            got: n,
        });
    }
    let first_e = pairs[0].0;
    if pairs.iter().all(|(e, _)| *e == first_e) {
        return Err(Error::SingularSystem(format!(
            "cluster {cluster}: all {n} energies identical ({first_e} kWh); slope unidentifiable"
        )));
    }
    let nf = n as f64;
    let mean_e = pairs.iter().map(|(e, _)| e).sum::<f64>() / nf;
    let mean_f = pairs.iter().map(|(_, f)| f).sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (e, f) in pairs {
        sxx += (e - mean_e) * (e - mean_e);
        sxy += (e - mean_e) * (f - mean_f);
    }
    let slope = sxy / sxx;
    let intercept = mean_f - slope * mean_e;
    let mut ss_res = 0.0;
    let mut residual_sum = 0.0;
    for (e, f) in pairs {
        let r = f - (slope * e + intercept);
        ss_res += r * r;
        residual_sum += r;
    }
    let residual_variance = if n > 2 { ss_res / (nf - 2.0) } else { 0.0 };
    Ok(ClusterRegression {
        cluster,
        slope,
        intercept,
        n,
        residual_variance,
        mean_residual: residual_sum / nf,
    })
}

/// Probability-weighted estimate for one customer-month.
///
/// Returns the clamped estimate together with the raw value and a clamp flag.
pub fn estimate(
    regressions: &[ClusterRegression],
    probs: &[f64],
    energy_kwh: f64,
) -> Result<(f64, f64, bool)> {
    if regressions.len() != probs.len() {
        return Err(Error::Mismatch(format!(
            "{} cluster regressions vs {} class probabilities",
            regressions.len(),
            probs.len()
        )));
    }
    let raw: f64 = regressions
        .iter()
        .zip(probs)
        .map(|(r, p)| p * r.predict(energy_kwh))
        .sum();
    let clamped_value = raw.clamp(0.0, 1.0);
    Ok((clamped_value, raw, clamped_value != raw))
}

/// Deterministic seeded split at customer granularity: a customer's records
/// all land on one side.
pub fn split_train_test(
    customers: &[String],
    ratio: f64,
    seed: u64,
) -> Result<(Vec<String>, Vec<String>)> {
    if !(0.0..1.0).contains(&ratio) || ratio == 0.0 {
        return Err(Error::InvalidConfig(format!(
            "split ratio {ratio} outside (0, 1)"
        )));
    }
    let mut shuffled: Vec<String> = customers.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..shuffled.len()).rev() {
        let j = rng.random_range(0..=i);
        shuffled.swap(i, j);
    }
    let n_train = (customers.len() as f64 * ratio).floor() as usize;
    if n_train == 0 || n_train == customers.len() {
        return Err(Error::InsufficientData {
            context: "split_train_test: one side empty".into(),
            needed: 1,
            got: 0,
        });
    }
    let test = shuffled.split_off(n_train);
    Ok((shuffled, test))
}

/// Coefficient of determination. Undefined for zero-variance actuals.
pub fn r2(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    if actual.len() != predicted.len() || actual.len() < 2 {
        return Err(Error::InsufficientData {
            context: "r2".into(),
            needed: 2,
            got: actual.len().min(predicted.len()),
        });
    }
    let n = actual.len() as f64;
    let mean = actual.iter().sum::<f64>() / n;
    let ss_tot: f64 = actual.iter().map(|a| (a - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::DegenerateInput(
            "r2 undefined: actual values have zero variance".into(),
        ));
    }
    let ss_res: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| (a - p).powi(2))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Mean absolute percentage error over records with non-zero actuals.
/// Returns the percentage and the count of excluded zero-actual records.
pub fn mape(actual: &[f64], predicted: &[f64]) -> Result<(f64, usize)> {
    if actual.len() != predicted.len() || actual.len() < 2 {
        return Err(Error::InsufficientData {
            context: "mape".into(),
            needed: 2,
            got: actual.len().min(predicted.len()),
        });
    }
    let mut sum = 0.0;
    let mut used = 0usize;
    let mut excluded = 0usize;
    for (a, p) in actual.iter().zip(predicted) {
        if *a == 0.0 {
            excluded += 1;
        } else {
            sum += ((a - p) / a).abs();
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::DegenerateInput(
            "mape undefined: every actual is zero".into(),
        ));
    }
    Ok((sum / used as f64 * 100.0, excluded))
}

/// Writes `estimates.csv` with header
/// `customer_id,year,month,cmpc_actual,cmpc_estimated,clamped`.
pub fn write_estimates_csv<W: Write>(writer: W, records: &[EstimateRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "customer_id",
        "year",
        "month",
        "cmpc_actual",
        "cmpc_estimated",
        "clamped",
    ])?;
    for r in records {
        w.write_record([
            r.customer_id.as_str(),
            &r.month.year.to_string(),
            &r.month.month.to_string(),
            &r.actual.map_or(String::new(), |a| a.to_string()),
            &r.estimated.to_string(),
            &(r.clamped as u8).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `estimates.csv` back into records.
pub fn read_estimates_csv<R: Read>(reader: R) -> Result<Vec<EstimateRecord>> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let mut out = Vec::new();
    for record in csv.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |msg: String| Error::MalformedRecord { line, msg };
        let actual = if record[3].is_empty() {
            None
        } else {
            Some(
                record[3]
                    .parse()
                    .map_err(|e| bad(format!("bad actual: {e}")))?,
            )
        };
        let estimated: f64 = record[4]
            .parse()
            .map_err(|e| bad(format!("bad estimate: {e}")))?;
        let clamped = &record[5] == "1";
        out.push(EstimateRecord {
            customer_id: record[0].to_string(),
            month: MonthKey::new(
                record[1]
                    .parse()
                    .map_err(|e| bad(format!("bad year: {e}")))?,
                record[2]
                    .parse()
                    .map_err(|e| bad(format!("bad month: {e}")))?,
            ),
            actual,
            estimated,
            pre_clamp: estimated,
            clamped,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_line_recovered() {
        let pairs: Vec<(f64, f64)> = (1..=8)
            .map(|i| {
                let e = i as f64 * 100.0;
                (e, 0.001 * e + 0.01)
            })
            .collect();
        let fit = fit_cluster_ols(0, &pairs).unwrap();
        assert!((fit.slope - 0.001).abs() < 1e-12);
        assert!((fit.intercept - 0.01).abs() < 1e-12);
        assert!(fit.residual_variance < 1e-20);
    }

    #[test]
    fn two_points_give_interpolating_line() {
        let fit = fit_cluster_ols(0, &[(100.0, 0.2), (300.0, 0.6)]).unwrap();
        assert!((fit.predict(100.0) - 0.2).abs() < 1e-12);
        assert!((fit.predict(300.0) - 0.6).abs() < 1e-12);
        assert_eq!(fit.residual_variance, 0.0);
    }

    #[test]
    fn noisy_fit_matches_normal_equation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let n = rng.random_range(3..30);
            let pairs: Vec<(f64, f64)> = (0..n)
                .map(|_| {
                    let e: f64 = rng.random_range(50.0..2000.0);
                    let f = 0.0005 * e + rng.random_range(-0.05..0.05);
                    (e, f)
                })
                .collect();
            let fit = fit_cluster_ols(0, &pairs).unwrap();

            // independent route: raw 2x2 normal equations
            let nf = n as f64;
            let se: f64 = pairs.iter().map(|(e, _)| e).sum();
            let sf: f64 = pairs.iter().map(|(_, f)| f).sum();
            let see: f64 = pairs.iter().map(|(e, _)| e * e).sum();
            let sef: f64 = pairs.iter().map(|(e, f)| e * f).sum();
            let det = nf * see - se * se;
            let slope = (nf * sef - se * sf) / det;
            let intercept = (sf * see - se * sef) / det;
            assert!((fit.slope - slope).abs() <= 1e-10 * slope.abs().max(1.0));
            assert!((fit.intercept - intercept).abs() <= 1e-10);

            // residual orthogonality to [E, 1]
            let mut dot_e = 0.0;
            let mut dot_1 = 0.0;
            for (e, f) in &pairs {
                let r = f - fit.predict(*e);
                dot_e += r * e;
                dot_1 += r;
            }
            assert!(dot_e.abs() < 1e-7, "residual . E = {dot_e}");
            assert!(dot_1.abs() < 1e-10, "residual . 1 = {dot_1}");
        }
    }

    #[test]
    fn degenerate_fits_are_rejected() {
        assert!(matches!(
            fit_cluster_ols(0, &[(1.0, 0.5)]),
            Err(Error::InsufficientData { .. })
        ));
        assert!(matches!(
            fit_cluster_ols(0, &[(1.0, 0.5), (1.0, 0.7), (1.0, 0.9)]),
            Err(Error::SingularSystem(_))
        ));
    }

    fn lines() -> Vec<ClusterRegression> {
        vec![
            ClusterRegression {
                cluster: 0,
                slope: 0.001,
                intercept: 0.01,
                n: 10,
                residual_variance: 0.0,
                mean_residual: 0.0,
            },
            ClusterRegression {
                cluster: 1,
                slope: 0.002,
                intercept: 0.0,
                n: 10,
                residual_variance: 0.0,
                mean_residual: 0.0,
            },
        ]
    }

    #[test]
    fn estimate_hand_mixture() {
        let (value, raw, clamped) = estimate(&lines(), &[0.3, 0.7], 500.0).unwrap();
        assert!((value - 0.853).abs() < 1e-12, "{value}");
        assert_eq!(value, raw);
        assert!(!clamped);
    }

    #[test]
    fn estimate_one_hot_equals_single_line() {
        let regs = lines();
        let (value, raw, _) = estimate(&regs, &[0.0, 1.0], 321.0).unwrap();
        let direct = regs[1].predict(321.0);
        assert_eq!(value, direct);
        assert_eq!(raw, direct);
    }

    #[test]
    fn estimate_uniform_probs_over_identical_lines() {
        let reg = ClusterRegression {
            cluster: 0,
            slope: 0.0007,
            intercept: 0.02,
            n: 5,
            residual_variance: 0.0,
            mean_residual: 0.0,
        };
        let mut twin = reg.clone();
        twin.cluster = 1;
        let (value, ..) = estimate(&[reg.clone(), twin], &[0.5, 0.5], 800.0).unwrap();
        assert!((value - reg.predict(800.0)).abs() < 1e-15);
    }

    #[test]
    fn estimate_clamps_and_reports() {
        let regs = vec![ClusterRegression {
            cluster: 0,
            slope: -0.01,
            intercept: 0.0,
            n: 3,
            residual_variance: 0.0,
            mean_residual: 0.0,
        }];
        let (value, raw, clamped) = estimate(&regs, &[1.0], 100.0).unwrap();
        assert_eq!(value, 0.0);
        assert!(raw < 0.0);
        assert!(clamped);
    }

    #[test]
    fn estimate_rejects_mismatched_shapes() {
        assert!(estimate(&lines(), &[1.0], 10.0).is_err());
    }

    #[test]
    fn split_is_deterministic_and_sized() {
        let customers: Vec<String> = (0..10).map(|i| format!("c{i}")).collect();
        let (train, test) = split_train_test(&customers, 0.8, 42).unwrap();
        assert_eq!(train.len(), 8);
        assert_eq!(test.len(), 2);
        let (train2, test2) = split_train_test(&customers, 0.8, 42).unwrap();
        assert_eq!(train, train2);
        assert_eq!(test, test2);
    }

    #[test]
    fn r2_and_mape_basics() {
        let actual = vec![0.1, 0.2, 0.3];
        assert!((r2(&actual, &actual).unwrap() - 1.0).abs() < 1e-15);
        let mean = vec![0.2, 0.2, 0.2];
        assert!(r2(&actual, &mean).unwrap().abs() < 1e-12);
        assert!(matches!(
            r2(&[0.5, 0.5], &[0.4, 0.6]),
            Err(Error::DegenerateInput(_))
        ));

        let (m, excluded) = mape(&[0.1, 0.2], &[0.11, 0.18]).unwrap();
        assert!((m - 10.0).abs() < 1e-9, "{m}");
        assert_eq!(excluded, 0);
        let (m, excluded) = mape(&[0.0, 0.2], &[0.3, 0.1]).unwrap();
        assert!((m - 50.0).abs() < 1e-9);
        assert_eq!(excluded, 1);
        let (m, _) = mape(&[0.1, 0.2], &[0.1, 0.2]).unwrap();
        assert_eq!(m, 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// Train/test split is a disjoint, exhaustive partition for any seed.
        #[test]
        fn split_partitions_customers(seed in 0u64..1000, n in 3usize..40) {
            let customers: Vec<String> = (0..n).map(|i| format!("c{i}")).collect();
            let (train, test) = split_train_test(&customers, 0.8, seed).unwrap();
            let mut all: Vec<&String> = train.iter().chain(test.iter()).collect();
            prop_assert_eq!(all.len(), n);
            all.sort();
            all.dedup();
            prop_assert_eq!(all.len(), n);
        }

        /// The estimator is affine in energy for fixed probabilities.
        #[test]
        fn estimator_linear_in_energy(
            a in 0.0f64..1.0,
            e1 in 0.0f64..3000.0,
            e2 in 0.0f64..3000.0,
            p in 0.0f64..1.0,
        ) {
            let regs = lines();
            let probs = [p, 1.0 - p];
            let raw = |e: f64| estimate(&regs, &probs, e).unwrap().1;
            let mixed = raw(a * e1 + (1.0 - a) * e2);
            let expect = a * raw(e1) + (1.0 - a) * raw(e2);
            prop_assert!((mixed - expect).abs() < 1e-9);
        }
    }
}
