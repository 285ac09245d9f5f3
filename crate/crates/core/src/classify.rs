//! Multinomial logistic regression from peak-timing distributions to typical
//! load patterns, trained by ridge-penalized Newton/IRLS steps, plus the
//! one-vs-rest AUC machinery and stratified k-fold cross-validation.
//!
//! The decision function for class `z` is `softmax_z(w_z . x)` over all
//! classes; the training objective is the multinomial log-likelihood minus a
//! ridge penalty `(lambda/2) ||w||^2`, which keeps the Hessian negative
//! definite and the maximizer unique (the softmax itself is shift-invariant).

use std::io::{Read, Write};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calendar::PerSeason;
use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, Mat};

/// Probabilities over a season's typical patterns for one customer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassProbabilities {
    pub customer_id: String,
    pub probs: Vec<f64>,
}

/// Feature layout shared by training and inference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    /// Number of hourly bins in the raw peak-timing vector.
    pub h: usize,
    /// Append a constant bias feature.
    pub bias: bool,
    /// Coarsen the 24 hourly bins to morning (07-09), afternoon (12-14) and
    /// evening (18-21) intervals, renormalized.
    pub coarse_bins: bool,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        FeatureSpec {
            h: 24,
            bias: true,
            coarse_bins: false,
        }
    }
}

impl FeatureSpec {
    /// Dimension of the transformed feature vector.
    pub fn dim(&self) -> usize {
        let base = if self.coarse_bins { 3 } else { self.h };
        base + usize::from(self.bias)
    }

    /// Applies the layout to a raw timing vector.
    pub fn transform(&self, raw: &[f64]) -> Vec<f64> {
        let mut out = if self.coarse_bins {
            let sum_range = |lo: usize, hi: usize| raw[lo..=hi].iter().sum::<f64>();
            let mut bins = vec![sum_range(7, 9), sum_range(12, 14), sum_range(18, 21)];
            let total: f64 = bins.iter().sum();
            if total > 0.0 {
                for b in bins.iter_mut() {
                    *b /= total;
                }
            }
            bins
        } else {
            raw.to_vec()
        };
        if self.bias {
            out.push(1.0);
        }
        out
    }
}

/// Trained weights for one season.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonMlr {
    /// `weights[z]` is the weight vector of class `z` over transformed features.
    pub weights: Vec<Vec<f64>>,
    pub iterations: usize,
    /// Penalized log-likelihood at the accepted optimum.
    pub final_loglik: f64,
}

impl SeasonMlr {
    pub fn n_classes(&self) -> usize {
        self.weights.len()
    }
}

/// Versioned classifier artifact (`mlr_model.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlrModel {
    pub version: u32,
    pub features: FeatureSpec,
    pub ridge_lambda: f64,
    pub seasons: PerSeason<Option<SeasonMlr>>,
    /// Cross-validation on survey-grade timing vectors: the difficulty the
    /// deployed classifier faces for customers without meters.
    pub cv_survey: PerSeason<Option<CvReport>>,
    /// Cross-validation on meter-derived timing distributions: the upper
    /// bound when interval data is available.
    pub cv_meter: PerSeason<Option<CvReport>>,
}

pub const MLR_MODEL_VERSION: u32 = 1;

impl MlrModel {
    pub fn save<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    pub fn load<R: Read>(reader: R) -> Result<Self> {
        Ok(serde_json::from_reader(reader)?)
    }
}

/// Training controls for [`train_irls`].
#[derive(Debug, Clone, Copy)]
pub struct TrainOptions {
    pub ridge_lambda: f64,
    pub max_iter: usize,
    /// Stop when the sup-norm of the gradient falls below this.
    pub tol: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            ridge_lambda: 1e-3,
            max_iter: 100,
            tol: 1e-8,
        }
    }
}

fn check_inputs(weights: &[Vec<f64>], xs: &[Vec<f64>], targets: &[usize]) -> Result<()> {
    let k = weights.len();
    let d = weights.first().map_or(0, |w| w.len());
    if xs.len() != targets.len() {
        return Err(Error::Mismatch(format!(
            "{} samples vs {} targets",
            xs.len(),
            targets.len()
        )));
    }
    for w in weights {
        if w.len() != d || w.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("non-finite or ragged weights".into()));
        }
    }
    for (x, &t) in xs.iter().zip(targets) {
        if x.len() != d || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("non-finite or ragged features".into()));
        }
        if t >= k {
            return Err(Error::Mismatch(format!("target {t} out of range 0..{k}")));
        }
    }
    Ok(())
}

/// Softmax probabilities with max-subtraction for numerical stability.
fn softmax_scores(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Ridge-penalized multinomial log-likelihood and its analytic gradient.
///
/// `J = sum_j [ w_{t_j}.x_j - log sum_z exp(w_z.x_j) ] - (lambda/2) ||w||^2`.
pub fn mlr_loglik(
    weights: &[Vec<f64>],
    xs: &[Vec<f64>],
    targets: &[usize],
    lambda: f64,
) -> Result<(f64, Vec<Vec<f64>>)> {
    check_inputs(weights, xs, targets)?;
    let k = weights.len();
    let d = weights[0].len();
    let mut value = 0.0;
    let mut grad = vec![vec![0.0; d]; k];
    for (x, &t) in xs.iter().zip(targets) {
        let scores: Vec<f64> = weights.iter().map(|w| crate::linalg::dot(w, x)).collect();
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_z = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
        value += scores[t] - log_z;
        for z in 0..k {
            let p = (scores[z] - log_z).exp();
            let coef = if z == t { 1.0 - p } else { -p };
            for (g, xv) in grad[z].iter_mut().zip(x) {
                *g += coef * xv;
            }
        }
    }
    let mut penalty = 0.0;
    for z in 0..k {
        for (g, w) in grad[z].iter_mut().zip(&weights[z]) {
            *g -= lambda * w;
            penalty += w * w;
        }
    }
    value -= 0.5 * lambda * penalty;
    Ok((value, grad))
}

/// Trains a k-class model by Newton/IRLS ascent on the penalized likelihood.
///
/// Each step solves the regularized normal equations from the exact Hessian;
/// step-halving guarantees the penalized objective never decreases across
/// accepted steps.
pub fn train_irls(
    xs: &[Vec<f64>],
    targets: &[usize],
    n_classes: usize,
    options: &TrainOptions,
) -> Result<SeasonMlr> {
    if options.ridge_lambda <= 0.0 {
        return Err(Error::InvalidConfig("ridge lambda must be positive".into()));
    }
    if xs.is_empty() {
        return Err(Error::InsufficientData {
            context: "train_irls".into(),
            needed: 1,
            got: 0,
        });
    }
    let d = xs[0].len();
    let mut seen = vec![false; n_classes];
    for &t in targets {
        if t >= n_classes {
            return Err(Error::Mismatch(format!(
                "target {t} out of range 0..{n_classes}"
            )));
        }
        seen[t] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::ClassMissing { class: missing });
    }

    let lambda = options.ridge_lambda;
    let mut weights = vec![vec![0.0; d]; n_classes];
    let (mut value, mut grad) = mlr_loglik(&weights, xs, targets, lambda)?;
    let mut iterations = 0usize;

    for _ in 0..options.max_iter {
        let grad_inf = grad
            .iter()
            .flatten()
            .fold(0.0f64, |acc, g| acc.max(g.abs()));
        if grad_inf < options.tol {
            break;
        }
        iterations += 1;

        // negative Hessian: sum_j [diag(p) - p p^T] (x) x x^T + lambda I
        let dim = n_classes * d;
        let mut neg_hessian = Mat::zeros(dim, dim);
        for x in xs {
            let scores: Vec<f64> = weights.iter().map(|w| crate::linalg::dot(w, x)).collect();
            let p = softmax_scores(&scores);
            for z in 0..n_classes {
                for y in z..n_classes {
                    let coef = if z == y {
                        p[z] * (1.0 - p[z])
                    } else {
                        -p[z] * p[y]
                    };
                    if coef == 0.0 {
                        continue;
                    }
                    for a in 0..d {
                        let xa = x[a] * coef;
                        if xa == 0.0 {
                            continue;
                        }
                        for b in 0..d {
                            neg_hessian[(z * d + a, y * d + b)] += xa * x[b];
                        }
                    }
                }
            }
        }
        for i in 0..dim {
            for j in 0..i {
                neg_hessian[(i, j)] = neg_hessian[(j, i)];
            }
            neg_hessian[(i, i)] += lambda;
        }

        let grad_flat: Vec<f64> = grad.iter().flatten().copied().collect();
        let step = cholesky_solve(&neg_hessian, &grad_flat)
            .map_err(|e| Error::SingularSystem(format!("IRLS normal equations failed: {e}")))?;

        // step-halving keeps the penalized objective non-decreasing
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let candidate: Vec<Vec<f64>> = weights
                .iter()
                .enumerate()
                .map(|(z, w)| {
                    w.iter()
                        .enumerate()
                        .map(|(a, v)| v + t * step[z * d + a])
                        .collect()
                })
                .collect();
            let (cand_value, cand_grad) = mlr_loglik(&candidate, xs, targets, lambda)?;
            if cand_value >= value {
                weights = candidate;
                value = cand_value;
                grad = cand_grad;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break; // step direction exhausted; gradient is numerically flat
        }
    }

    Ok(SeasonMlr {
        weights,
        iterations,
        final_loglik: value,
    })
}

/// Class probabilities for one transformed feature vector.
pub fn predict(model: &SeasonMlr, features: &[f64]) -> Vec<f64> {
    let scores: Vec<f64> = model
        .weights
        .iter()
        .map(|w| crate::linalg::dot(w, features))
        .collect();
    softmax_scores(&scores)
}

/// One-vs-rest AUC for one class from scores and binary relevance, computed
/// as the midrank statistic (ties contribute 1/2).
pub fn auc_ovr(scores: &[f64], positives: &[bool], class: usize) -> Result<f64> {
    assert_eq!(scores.len(), positives.len());
    let n_pos = positives.iter().filter(|p| **p).count();
    let n_neg = positives.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedAuc {
            class,
            positives: n_pos,
            negatives: n_neg,
        });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // midranks over tied score groups
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            if positives[idx] {
                rank_sum_pos += midrank;
            }
        }
        i = j + 1;
    }
    let n_pos_f = n_pos as f64;
    let n_neg_f = n_neg as f64;
    Ok((rank_sum_pos - n_pos_f * (n_pos_f + 1.0) / 2.0) / (n_pos_f * n_neg_f))
}

/// Macro AUC over classes: unweighted mean of the defined one-vs-rest AUCs.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroAuc {
    pub value: f64,
    /// Per-class AUC; `None` where the class had no positives or negatives.
    pub per_class: Vec<Option<f64>>,
}

pub fn macro_auc(probs: &[Vec<f64>], labels: &[usize], n_classes: usize) -> Result<MacroAuc> {
    let mut per_class = Vec::with_capacity(n_classes);
    let mut sum = 0.0;
    let mut defined = 0usize;
    for z in 0..n_classes {
        let scores: Vec<f64> = probs.iter().map(|p| p[z]).collect();
        let positives: Vec<bool> = labels.iter().map(|&l| l == z).collect();
        match auc_ovr(&scores, &positives, z) {
            Ok(a) => {
                per_class.push(Some(a));
                sum += a;
                defined += 1;
            }
            Err(Error::UndefinedAuc { .. }) => per_class.push(None),
            Err(e) => return Err(e),
        }
    }
    if defined == 0 {
        return Err(Error::UndefinedAuc {
            class: 0,
            positives: 0,
            negatives: 0,
        });
    }
    Ok(MacroAuc {
        value: sum / defined as f64,
        per_class,
    })
}

/// Cross-validation outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    /// Test-set size of every constructed fold.
    pub fold_sizes: Vec<usize>,
    /// Macro AUC of each fold where at least one class had both positives and
    /// negatives on the test side.
    pub fold_aucs: Vec<f64>,
    pub mean_auc: f64,
    /// (fold, class) pairs where the class was absent from the fold's test
    /// side and therefore skipped in that fold's macro AUC.
    pub skipped: Vec<(usize, usize)>,
    /// Classes with fewer than 2 members, excluded from CV entirely.
    pub dropped_classes: Vec<usize>,
}

/// Stratified k-fold cross-validation of the classifier.
///
/// Shuffling is deterministic under `seed`. Classes with fewer than 2
/// members cannot appear in every training split and are dropped up front.
pub fn kfold_cv(
    raw_features: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    k_folds: usize,
    seed: u64,
    features: &FeatureSpec,
    options: &TrainOptions,
) -> Result<CvReport> {
    if k_folds < 2 {
        return Err(Error::InvalidConfig("k_folds must be at least 2".into()));
    }
    if raw_features.len() != labels.len() {
        return Err(Error::Mismatch(format!(
            "{} features vs {} labels",
            raw_features.len(),
            labels.len()
        )));
    }
    let mut class_members: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        class_members[l].push(i);
    }
    let dropped_classes: Vec<usize> = (0..n_classes)
        .filter(|&z| class_members[z].len() < 2)
        .collect();
    let kept: Vec<usize> = (0..n_classes)
        .filter(|z| !dropped_classes.contains(z))
        .collect();
    if kept.len() < 2 {
        return Err(Error::InsufficientData {
            context: "kfold_cv classes with >= 2 members".into(),
            needed: 2,
            got: kept.len(),
        });
    }
    let compact_of: Vec<Option<usize>> = (0..n_classes)
        .map(|z| kept.iter().position(|&w| w == z))
        .collect();

    // stratified deal: shuffle within class, then deal over folds with a
    // cursor that rolls across classes so small datasets still spread out
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k_folds];
    let mut cursor = 0usize;
    for &z in &kept {
        let mut members = class_members[z].clone();
        for i in (1..members.len()).rev() {
            let j = rng.random_range(0..=i);
            members.swap(i, j);
        }
        for &idx in &members {
            folds[cursor % k_folds].push(idx);
            cursor += 1;
        }
    }

    let fold_sizes: Vec<usize> = folds.iter().map(|f| f.len()).collect();
    let mut fold_aucs = Vec::with_capacity(k_folds);
    let mut skipped = Vec::new();
    for (f, test_idx) in folds.iter().enumerate() {
        if test_idx.is_empty() {
            continue;
        }
        let mut train_x = Vec::new();
        let mut train_y = Vec::new();
        for (g, fold) in folds.iter().enumerate() {
            if g == f {
                continue;
            }
            for &i in fold {
                train_x.push(features.transform(&raw_features[i]));
                train_y.push(compact_of[labels[i]].expect("kept class"));
            }
        }
        let model = train_irls(&train_x, &train_y, kept.len(), options)?;
        let probs: Vec<Vec<f64>> = test_idx
            .iter()
            .map(|&i| predict(&model, &features.transform(&raw_features[i])))
            .collect();
        let test_y: Vec<usize> = test_idx
            .iter()
            .map(|&i| compact_of[labels[i]].expect("kept class"))
            .collect();
        match macro_auc(&probs, &test_y, kept.len()) {
            Ok(auc) => {
                for (compact_z, per) in auc.per_class.iter().enumerate() {
                    if per.is_none() {
                        skipped.push((f, kept[compact_z]));
                    }
                }
                fold_aucs.push(auc.value);
            }
            // every class one-sided in this fold (e.g. singleton folds)
            Err(Error::UndefinedAuc { .. }) => {
                for &z in &kept {
                    skipped.push((f, z));
                }
            }
            Err(e) => return Err(e),
        }
    }
    let mean_auc = if fold_aucs.is_empty() {
        f64::NAN
    } else {
        fold_aucs.iter().sum::<f64>() / fold_aucs.len() as f64
    };
    Ok(CvReport {
        fold_sizes,
        fold_aucs,
        mean_auc,
        skipped,
        dropped_classes,
    })
}

/// Reads `survey.csv` (`customer_id,x0,...,x23`), validating that every row
/// is a probability vector over the 24 hours.
pub fn read_survey<R: Read>(reader: R) -> Result<Vec<(String, [f64; 24])>> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    {
        let headers = csv.headers()?;
        let mut expect = vec!["customer_id".to_string()];
        expect.extend((0..24).map(|i| format!("x{i}")));
        let got: Vec<String> = headers.iter().map(|s| s.to_string()).collect();
        if got != expect {
            return Err(Error::MalformedRecord {
                line: 1,
                msg: "expected header customer_id,x0,...,x23".into(),
            });
        }
    }
    let mut out = Vec::new();
    for record in csv.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 25 {
            return Err(Error::MalformedRecord {
                line,
                msg: format!("expected 25 fields, found {}", record.len()),
            });
        }
        let id = record[0].to_string();
        let mut probs = [0.0; 24];
        for (i, slot) in probs.iter_mut().enumerate() {
            let v: f64 = record[i + 1].parse().map_err(|e| Error::MalformedRecord {
                line,
                msg: format!("bad x{i}: {e}"),
            })?;
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::MalformedRecord {
                    line,
                    msg: format!("x{i}={v} outside [0, 1]"),
                });
            }
            *slot = v;
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::MalformedRecord {
                line,
                msg: format!("row sums to {total}, expected 1"),
            });
        }
        out.push((id, probs));
    }
    if out.is_empty() {
        return Err(Error::DatasetEmpty("no rows in survey CSV".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy_two_class() -> (Vec<Vec<f64>>, Vec<usize>) {
        // linearly separable on the first coordinate
        let xs = vec![
            vec![0.9, 0.1, 1.0],
            vec![0.8, 0.2, 1.0],
            vec![0.7, 0.3, 1.0],
            vec![0.2, 0.8, 1.0],
            vec![0.1, 0.9, 1.0],
            vec![0.3, 0.7, 1.0],
        ];
        let ys = vec![0, 0, 0, 1, 1, 1];
        (xs, ys)
    }

    #[test]
    fn loglik_at_zero_weights_is_uniform() {
        let (xs, ys) = toy_two_class();
        let w = vec![vec![0.0; 3]; 2];
        let (value, _) = mlr_loglik(&w, &xs, &ys, 0.0).unwrap();
        let expected = -(xs.len() as f64) * 2.0f64.ln();
        assert!((value - expected).abs() < 1e-12);
    }

    #[test]
    fn loglik_matches_direct_summation_oracle() {
        let xs = vec![vec![0.5, 1.0], vec![-0.3, 1.0], vec![0.9, 1.0]];
        let ys = vec![0, 1, 0];
        let w = vec![vec![0.7, -0.2], vec![-0.4, 0.3]];
        let lambda = 0.05;
        let (value, _) = mlr_loglik(&w, &xs, &ys, lambda).unwrap();

        // independent route: direct exponential sums, no log-sum-exp trick
        let mut expect = 0.0;
        for (x, &t) in xs.iter().zip(&ys) {
            let s0 = w[0][0] * x[0] + w[0][1] * x[1];
            let s1 = w[1][0] * x[0] + w[1][1] * x[1];
            let st = if t == 0 { s0 } else { s1 };
            expect += st - (s0.exp() + s1.exp()).ln();
        }
        let norm: f64 = w.iter().flatten().map(|v| v * v).sum();
        expect -= 0.5 * lambda * norm;
        assert!((value - expect).abs() < 1e-12);
    }

    #[test]
    fn loglik_near_zero_when_model_is_confident_and_right() {
        let xs = vec![vec![1.0, 0.0]];
        let ys = vec![0];
        let w = vec![vec![10.0, 0.0], vec![-10.0, 0.0]];
        let (value, _) = mlr_loglik(&w, &xs, &ys, 0.0).unwrap();
        assert!(value < 0.0 && value > -1e-8, "J = {value}");
    }

    #[test]
    fn gradient_matches_central_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let xs: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let ys: Vec<usize> = (0..8).map(|_| rng.random_range(0..3)).collect();
        let lambda = 0.01;
        for trial in 0..10 {
            let w: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let (_, grad) = mlr_loglik(&w, &xs, &ys, lambda).unwrap();
            let step = 1e-5;
            for z in 0..3 {
                for a in 0..4 {
                    let mut wp = w.clone();
                    wp[z][a] += step;
                    let mut wm = w.clone();
                    wm[z][a] -= step;
                    let (jp, _) = mlr_loglik(&wp, &xs, &ys, lambda).unwrap();
                    let (jm, _) = mlr_loglik(&wm, &xs, &ys, lambda).unwrap();
                    let fd = (jp - jm) / (2.0 * step);
                    let denom = fd.abs().max(grad[z][a].abs()).max(1e-8);
                    let rel = (fd - grad[z][a]).abs() / denom;
                    assert!(rel <= 1e-5, "trial {trial} rel err {rel}");
                }
            }
        }
    }

    #[test]
    fn training_separable_data_reaches_high_auc() {
        let (xs, ys) = toy_two_class();
        let model = train_irls(
            &xs,
            &ys,
            2,
            &TrainOptions {
                ridge_lambda: 1e-4,
                ..TrainOptions::default()
            },
        )
        .unwrap();
        let probs: Vec<Vec<f64>> = xs.iter().map(|x| predict(&model, x)).collect();
        let auc = macro_auc(&probs, &ys, 2).unwrap();
        assert!(auc.value >= 0.99, "AUC {}", auc.value);
    }

    #[test]
    fn duplicating_samples_with_doubled_lambda_refits_same_weights() {
        let (xs, ys) = toy_two_class();
        let base = train_irls(
            &xs,
            &ys,
            2,
            &TrainOptions {
                ridge_lambda: 0.01,
                ..TrainOptions::default()
            },
        )
        .unwrap();
        let mut xs2 = xs.clone();
        xs2.extend(xs.clone());
        let mut ys2 = ys.clone();
        ys2.extend(ys.clone());
        let doubled = train_irls(
            &xs2,
            &ys2,
            2,
            &TrainOptions {
                ridge_lambda: 0.02,
                ..TrainOptions::default()
            },
        )
        .unwrap();
        for (wa, wb) in base.weights.iter().zip(&doubled.weights) {
            for (a, b) in wa.iter().zip(wb) {
                assert!((a - b).abs() < 1e-8, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn training_rejects_missing_class() {
        let (xs, _) = toy_two_class();
        let ys = vec![0; xs.len()];
        assert!(matches!(
            train_irls(&xs, &ys, 2, &TrainOptions::default()),
            Err(Error::ClassMissing { class: 1 })
        ));
    }

    #[test]
    fn predict_zero_weights_is_uniform() {
        let model = SeasonMlr {
            weights: vec![vec![0.0; 3]; 4],
            iterations: 0,
            final_loglik: 0.0,
        };
        let p = predict(&model, &[0.3, 0.5, 1.0]);
        for v in &p {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn predict_saturates_under_dominating_weight() {
        let model = SeasonMlr {
            weights: vec![vec![1000.0, 0.0], vec![0.0, 0.0]],
            iterations: 0,
            final_loglik: 0.0,
        };
        let p = predict(&model, &[1.0, 1.0]);
        assert!((p[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn predict_two_class_log_odds_ln3() {
        // w1.x - w2.x = ln 3 -> p = (0.75, 0.25)
        let model = SeasonMlr {
            weights: vec![vec![3.0f64.ln()], vec![0.0]],
            iterations: 0,
            final_loglik: 0.0,
        };
        let p = predict(&model, &[1.0]);
        assert!((p[0] - 0.75).abs() < 1e-12);
        assert!((p[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn predict_is_shift_invariant() {
        let model = SeasonMlr {
            weights: vec![
                vec![0.4, -0.7, 0.1],
                vec![-0.2, 0.5, 0.9],
                vec![0.0, 0.3, -0.5],
            ],
            iterations: 0,
            final_loglik: 0.0,
        };
        let shifted = SeasonMlr {
            weights: model
                .weights
                .iter()
                .map(|w| {
                    w.iter()
                        .zip([10.0, -3.0, 0.5])
                        .map(|(v, c)| v + c)
                        .collect()
                })
                .collect(),
            iterations: 0,
            final_loglik: 0.0,
        };
        let x = [0.2, 0.3, 0.5];
        let pa = predict(&model, &x);
        let pb = predict(&shifted, &x);
        for (a, b) in pa.iter().zip(&pb) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((pa.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn auc_hand_cases() {
        assert_eq!(
            auc_ovr(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false], 0).unwrap(),
            1.0
        );
        assert_eq!(
            auc_ovr(&[0.5, 0.5, 0.5, 0.5], &[true, false, true, false], 0).unwrap(),
            0.5
        );
        let auc = auc_ovr(&[0.9, 0.8, 0.7, 0.6], &[true, false, true, false], 0).unwrap();
        assert!((auc - 0.75).abs() < 1e-12);
        assert!(matches!(
            auc_ovr(&[0.5, 0.6], &[true, true], 3),
            Err(Error::UndefinedAuc { class: 3, .. })
        ));
    }

    /// Trapezoidal ROC integration, the independent oracle for the rank
    /// statistic implementation.
    fn auc_roc_integration(scores: &[f64], positives: &[bool]) -> f64 {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
        let n_pos = positives.iter().filter(|p| **p).count() as f64;
        let n_neg = positives.len() as f64 - n_pos;
        let mut tp = 0.0;
        let mut fp = 0.0;
        let mut prev_tp = 0.0;
        let mut prev_fp = 0.0;
        let mut auc = 0.0;
        let mut i = 0;
        while i < order.len() {
            let mut j = i;
            while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
                j += 1;
            }
            for &idx in &order[i..=j] {
                if positives[idx] {
                    tp += 1.0;
                } else {
                    fp += 1.0;
                }
            }
            auc += (fp - prev_fp) / n_neg * (tp + prev_tp) / (2.0 * n_pos);
            prev_tp = tp;
            prev_fp = fp;
            i = j + 1;
        }
        auc
    }

    #[test]
    fn rank_auc_equals_roc_integration_on_random_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..100 {
            let n = rng.random_range(4..40);
            let scores: Vec<f64> = (0..n)
                .map(|_| (rng.random_range(0..10) as f64) / 10.0) // coarse grid forces ties
                .collect();
            let mut positives: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.4).collect();
            if positives.iter().all(|p| *p) {
                positives[0] = false;
            }
            if positives.iter().all(|p| !*p) {
                positives[0] = true;
            }
            let a = auc_ovr(&scores, &positives, 0).unwrap();
            let b = auc_roc_integration(&scores, &positives);
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn kfold_leave_one_out_builds_singleton_folds() {
        let xs = vec![
            vec![0.9, 0.1],
            vec![0.8, 0.2],
            vec![0.1, 0.9],
            vec![0.2, 0.8],
        ];
        let ys = vec![0, 0, 1, 1];
        let report = kfold_cv(
            &xs,
            &ys,
            2,
            4,
            1,
            &FeatureSpec {
                h: 2,
                bias: true,
                coarse_bins: false,
            },
            &TrainOptions::default(),
        )
        .unwrap();
        assert_eq!(report.fold_sizes, vec![1, 1, 1, 1]);
        // a singleton test fold has one-sided classes only: AUC undefined,
        // both classes skipped in every fold
        assert!(report.fold_aucs.is_empty());
        assert_eq!(report.skipped.len(), 8);
    }

    #[test]
    fn symmetric_data_gives_near_equal_fold_aucs() {
        // two mirror-image classes with identical within-class structure:
        // every fold sees the same geometry, so fold AUCs agree closely
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..40 {
            let jitter: Vec<f64> = (0..3).map(|_| rng.random_range(-0.15..0.15)).collect();
            if i % 2 == 0 {
                xs.push(vec![0.8 + jitter[0], 0.2 + jitter[1], 1.0 + jitter[2]]);
                ys.push(0);
            } else {
                xs.push(vec![0.2 + jitter[0], 0.8 + jitter[1], 1.0 + jitter[2]]);
                ys.push(1);
            }
        }
        let report = kfold_cv(
            &xs,
            &ys,
            2,
            5,
            3,
            &FeatureSpec {
                h: 3,
                bias: true,
                coarse_bins: false,
            },
            &TrainOptions::default(),
        )
        .unwrap();
        assert_eq!(report.fold_aucs.len(), 5);
        let max = report.fold_aucs.iter().copied().fold(f64::MIN, f64::max);
        let min = report.fold_aucs.iter().copied().fold(f64::MAX, f64::min);
        assert!(max - min <= 0.05, "fold AUCs spread {}", max - min);
    }

    #[test]
    fn coarse_bins_collapse_to_three_intervals() {
        let spec = FeatureSpec {
            h: 24,
            bias: true,
            coarse_bins: true,
        };
        assert_eq!(spec.dim(), 4);
        let mut raw = vec![0.0; 24];
        raw[7] = 0.2; // morning interval 07-09
        raw[13] = 0.3; // afternoon interval 12-14
        raw[19] = 0.4; // evening interval 18-21
        raw[2] = 0.1; // outside every interval
        let out = spec.transform(&raw);
        assert_eq!(out.len(), 4);
        let total: f64 = out[..3].iter().sum();
        assert!((total - 1.0).abs() < 1e-12, "renormalized over intervals");
        assert!((out[0] - 0.2 / 0.9).abs() < 1e-12);
        assert!((out[1] - 0.3 / 0.9).abs() < 1e-12);
        assert!((out[2] - 0.4 / 0.9).abs() < 1e-12);
        assert_eq!(out[3], 1.0);
    }

    #[test]
    fn survey_rows_must_sum_to_one() {
        let mut csv = String::from("customer_id");
        for i in 0..24 {
            csv.push_str(&format!(",x{i}"));
        }
        csv.push('\n');
        csv.push_str("c1");
        for i in 0..24 {
            csv.push_str(if i == 0 { ",1.0" } else { ",0.0" });
        }
        csv.push('\n');
        let rows = read_survey(csv.as_bytes()).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].1[0], 1.0);

        let bad = csv.replace(",1.0", ",0.9");
        assert!(read_survey(bad.as_bytes()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        /// Softmax output always sums to 1 for finite inputs.
        #[test]
        fn softmax_normalizes(scores in proptest::collection::vec(-500.0f64..500.0, 2..8)) {
            let p = softmax_scores(&scores);
            let total: f64 = p.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|v| *v >= 0.0));
        }

        /// Penalized objective is non-decreasing across accepted IRLS steps,
        /// verified by refitting with a larger iteration budget.
        #[test]
        fn irls_objective_monotone(seed in 0u64..20) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 12;
            let xs: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let ys: Vec<usize> = (0..n).map(|i| if i < 2 { i % 2 } else { rng.random_range(0..2) }).collect();
            let options = TrainOptions { ridge_lambda: 0.05, ..TrainOptions::default() };
            let mut previous = f64::NEG_INFINITY;
            for max_iter in 0..6 {
                let model = train_irls(&xs, &ys, 2, &TrainOptions { max_iter, ..options }).unwrap();
                prop_assert!(model.final_loglik >= previous - 1e-12,
                    "objective decreased: {} after {}", model.final_loglik, previous);
                previous = model.final_loglik;
            }
        }
    }
}
