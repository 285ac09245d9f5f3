//! Self-tuning spectral clustering of seasonal daily load profiles.
//!
//! The similarity graph uses a Gaussian kernel with a per-vertex local scale:
//! `alpha_i` is the distance from vertex `i` to its phi-th nearest neighbor,
//! and `W_ij = exp(-||V_i - V_j||^2 / (alpha_i * alpha_j))`. Vertices embed
//! through the k smallest eigenvectors of the symmetric normalized Laplacian
//! `L = I - D^{-1/2} W D^{-1/2}` (row-normalized), k-means labels the rows,
//! and the Davies-Bouldin index selects k.
//!
//! Every routine performs its floating-point accumulation in a canonical
//! vertex order (profiles sorted lexicographically), so permuting the input
//! permutes labels identically and leaves all reported numbers bit-identical.

use std::cmp::Ordering;
use std::io::{Read, Write};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calendar::PerSeason;
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::par::maybe_par_map;

/// Similarity graph over profile vectors.
#[derive(Debug, Clone)]
pub struct SimilarityGraph {
    /// Vertex profiles, n x d.
    pub profiles: Vec<Vec<f64>>,
    /// Symmetric weights with unit diagonal, entries in (0, 1].
    pub weights: Mat,
    /// Local scales `alpha_i`, all strictly positive.
    pub scales: Vec<f64>,
    /// Vertices whose scale was clamped because the phi-th neighbor distance
    /// was zero (duplicate profiles).
    pub clamped: Vec<usize>,
}

/// Row-normalized spectral embedding.
#[derive(Debug, Clone)]
pub struct SpectralEmbedding {
    /// Unit-norm rows, n x k, aligned with the input vertex order.
    pub rows: Vec<Vec<f64>>,
    /// Raw orthonormal eigenvector columns (k columns of length n), before
    /// row normalization, aligned with the input vertex order.
    pub columns: Vec<Vec<f64>>,
    /// Ascending eigenvalues of the normalized Laplacian.
    pub eigenvalues: Vec<f64>,
    /// Rows that were exactly zero before normalization and were left zero.
    pub zero_rows: Vec<usize>,
}

/// K-means labeling of embedding rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    /// Centroids in the clustered (embedding) space.
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    /// Number of empty-cluster reseeds that occurred during training.
    pub reseeds: usize,
}

/// Options for the eigensolver behind [`embed`].
#[derive(Debug, Clone, Copy)]
pub struct EmbedOptions {
    /// Problems up to this size use the dense solver; larger ones use the
    /// iterative solver.
    pub dense_threshold: usize,
    /// Target residual for the iterative solver.
    pub iterative_tol: f64,
    /// Residual bound enforced on every returned eigenpair.
    pub residual_tol: f64,
    /// Seed for the iterative solver's start vectors.
    pub seed: u64,
}

impl Default for EmbedOptions {
    fn default() -> Self {
        EmbedOptions {
            dense_threshold: 2000,
            iterative_tol: 1e-10,
            residual_tol: 1e-8,
            seed: 0,
        }
    }
}

/// Options for [`kmeans`].
#[derive(Debug, Clone, Copy)]
pub struct KmeansOptions {
    pub seed: u64,
    pub restarts: usize,
    pub max_iter: usize,
    pub rel_tol: f64,
}

impl Default for KmeansOptions {
    fn default() -> Self {
        KmeansOptions {
            seed: 0,
            restarts: 10,
            max_iter: 300,
            rel_tol: 1e-6,
        }
    }
}

/// Full configuration for seasonal pattern discovery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    /// Neighbor rank for the local scale.
    pub phi: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub seed: u64,
    /// Divide each profile by its maximum before clustering.
    pub normalize_profiles: bool,
    pub dense_eigen_threshold: usize,
    pub kmeans_restarts: usize,
    pub kmeans_max_iter: usize,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            phi: 7,
            k_min: 2,
            k_max: 15,
            seed: 0,
            normalize_profiles: true,
            dense_eigen_threshold: 2000,
            kmeans_restarts: 10,
            kmeans_max_iter: 300,
        }
    }
}

/// One season's discovered typical load patterns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonPatterns {
    pub chosen_k: usize,
    /// Typical profiles: mean member profile in the original (kWh) space.
    pub centroids: Vec<Vec<f64>>,
    pub member_counts: Vec<usize>,
    /// Candidate k against its Davies-Bouldin index; `None` encodes an
    /// infinite index (coincident centroids).
    pub dbi_curve: Vec<(usize, Option<f64>)>,
    pub customer_ids: Vec<String>,
    pub labels: Vec<usize>,
}

/// Versioned per-season pattern artifact (`patterns.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternBank {
    pub version: u32,
    pub config: SpectralConfig,
    pub seasons: PerSeason<Option<SeasonPatterns>>,
}

pub const PATTERN_BANK_VERSION: u32 = 1;

impl PatternBank {
    pub fn save<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    pub fn load<R: Read>(reader: R) -> Result<Self> {
        Ok(serde_json::from_reader(reader)?)
    }
}

fn check_finite(profiles: &[Vec<f64>]) -> Result<()> {
    for (i, p) in profiles.iter().enumerate() {
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "profile {i} contains a non-finite value"
            )));
        }
    }
    Ok(())
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn canonical_order(rows: &[Vec<f64>]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..rows.len()).collect();
    idx.sort_by(|&a, &b| {
        for (x, y) in rows[a].iter().zip(&rows[b]) {
            match x.total_cmp(y) {
                Ordering::Equal => continue,
                other => return other,
            }
        }
        Ordering::Equal
    });
    idx
}

/// Builds the self-tuning similarity graph.
///
/// `phi` is 1-indexed: `phi = 1` scales by the nearest non-self neighbor.
/// A vertex whose phi-th neighbor distance is zero has its scale clamped to
/// the smallest positive pairwise distance in the dataset and is reported in
/// `clamped`; an all-identical dataset is rejected as degenerate.
pub fn build_graph(profiles: &[Vec<f64>], phi: usize) -> Result<SimilarityGraph> {
    let n = profiles.len();
    if phi == 0 {
        return Err(Error::InvalidConfig("phi must be at least 1".into()));
    }
    if n < phi + 1 {
        return Err(Error::InsufficientData {
            context: "build_graph".into(),
            needed: phi + 1,
            got: n,
        });
    }
    check_finite(profiles)?;

    let d2: Vec<Vec<f64>> = maybe_par_map(&(0..n).collect::<Vec<_>>(), |&i| {
        (0..n)
            .map(|j| sq_dist(&profiles[i], &profiles[j]))
            .collect()
    });

    let mut min_positive = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            let d = d2[i][j];
            if d > 0.0 && d < min_positive {
                min_positive = d;
            }
        }
    }
    if !min_positive.is_finite() {
        return Err(Error::DegenerateInput(
            "all profiles identical; similarity graph has no scale".into(),
        ));
    }
    let min_positive_dist = min_positive.sqrt();

    let mut scales = Vec::with_capacity(n);
    let mut clamped = Vec::new();
    for i in 0..n {
        let mut dists: Vec<f64> = (0..n)
            .filter(|&j| j != i)
            .map(|j| d2[i][j].sqrt())
            .collect();
        dists.sort_by(|a, b| a.total_cmp(b));
        let alpha = dists[phi - 1];
        if alpha > 0.0 {
            scales.push(alpha);
        } else {
            scales.push(min_positive_dist);
            clamped.push(i);
        }
    }

    let mut weights = Mat::zeros(n, n);
    for i in 0..n {
        weights[(i, i)] = 1.0;
        for j in i + 1..n {
            // clamp to the smallest positive double so far-apart vertices
            // stay connected with a positive weight
            let w = (-d2[i][j] / (scales[i] * scales[j]))
                .exp()
                .max(f64::MIN_POSITIVE);
            weights[(i, j)] = w;
            weights[(j, i)] = w;
        }
    }

    Ok(SimilarityGraph {
        profiles: profiles.to_vec(),
        weights,
        scales,
        clamped,
    })
}

/// Spectral embedding: k smallest eigenpairs of `I - D^{-1/2} W D^{-1/2}`
/// with unit-normalized rows.
pub fn embed(
    graph: &SimilarityGraph,
    k: usize,
    options: &EmbedOptions,
) -> Result<SpectralEmbedding> {
    let n = graph.weights.n_rows();
    if k < 2 || k > n {
        return Err(Error::InvalidConfig(format!(
            "embedding dimension k={k} outside [2, {n}]"
        )));
    }
    // canonical vertex order keeps the eigensolver input, and therefore the
    // whole embedding, independent of input permutation
    let order = canonical_order(&graph.profiles);
    let mut rank = vec![0usize; n];
    for (pos, &orig) in order.iter().enumerate() {
        rank[orig] = pos;
    }

    let mut degree = vec![0.0; n];
    for (pos, &orig) in order.iter().enumerate() {
        let mut s = 0.0;
        for &other in &order {
            s += graph.weights[(orig, other)];
        }
        if s <= 0.0 {
            return Err(Error::InvariantViolation(format!(
                "vertex {orig} has non-positive degree {s}"
            )));
        }
        degree[pos] = s;
    }

    let mut lap = Mat::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let w = graph.weights[(order[i], order[j])];
            let v = -w / (degree[i].sqrt() * degree[j].sqrt());
            let v = if i == j { 1.0 + v } else { v };
            lap[(i, j)] = v;
            lap[(j, i)] = v;
        }
    }

    let (values, columns_canon) = if n <= options.dense_threshold {
        let (vals, vecs) = linalg::sym_eigen(lap.clone())?;
        let values: Vec<f64> = vals[..k].to_vec();
        let columns: Vec<Vec<f64>> = (0..k).map(|j| vecs.col(j)).collect();
        (values, columns)
    } else {
        // smallest eigenvalues of L are the largest of 2I - L
        let apply = |x: &[f64]| -> Vec<f64> {
            let lx = lap.mul_vec(x);
            x.iter().zip(lx).map(|(xi, li)| 2.0 * xi - li).collect()
        };
        let (thetas, vecs) =
            linalg::lanczos_largest(apply, n, k, options.iterative_tol, options.seed)?;
        let mut pairs: Vec<(f64, Vec<f64>)> = thetas
            .into_iter()
            .zip(vecs)
            .map(|(theta, v)| (2.0 - theta, v))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let values = pairs.iter().map(|(v, _)| *v).collect();
        let columns = pairs.into_iter().map(|(_, v)| v).collect();
        (values, columns)
    };

    // enforce the eigenpair contract: residual and spectral range
    let mut worst = 0.0f64;
    for (lambda, col) in values.iter().zip(&columns_canon) {
        let lx = lap.mul_vec(col);
        let res: f64 = lx
            .iter()
            .zip(col)
            .map(|(a, b)| (a - lambda * b).powi(2))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(res);
        if !(-options.residual_tol..=2.0 + options.residual_tol).contains(lambda) {
            return Err(Error::InvariantViolation(format!(
                "eigenvalue {lambda} outside [0, 2] tolerance band"
            )));
        }
    }
    if worst > options.residual_tol {
        return Err(Error::EigenNonConvergence {
            residual: worst,
            tolerance: options.residual_tol,
        });
    }

    let mut rows = vec![vec![0.0; k]; n];
    let mut zero_rows = Vec::new();
    for orig in 0..n {
        let pos = rank[orig];
        let mut row: Vec<f64> = columns_canon.iter().map(|c| c[pos]).collect();
        let norm = linalg::norm2(&row);
        if norm == 0.0 {
            zero_rows.push(orig);
        } else {
            for v in row.iter_mut() {
                *v /= norm;
            }
        }
        rows[orig] = row;
    }

    let columns: Vec<Vec<f64>> = columns_canon
        .iter()
        .map(|c| (0..n).map(|orig| c[rank[orig]]).collect())
        .collect();

    Ok(SpectralEmbedding {
        rows,
        columns,
        eigenvalues: values,
        zero_rows,
    })
}

/// K-means with k-means++ initialization, Lloyd iterations, and best-of-n
/// restarts by inertia. Deterministic for a fixed seed and exactly
/// permutation-equivariant.
pub fn kmeans(rows: &[Vec<f64>], k: usize, options: &KmeansOptions) -> Result<ClusterAssignment> {
    let n = rows.len();
    if k == 0 || n == 0 {
        return Err(Error::InvalidConfig("kmeans needs k >= 1 and data".into()));
    }
    let order = canonical_order(rows);
    let sorted: Vec<&Vec<f64>> = order.iter().map(|&i| &rows[i]).collect();
    let mut distinct = 1usize;
    for w in sorted.windows(2) {
        if w[0] != w[1] {
            distinct += 1;
        }
    }
    if k > distinct {
        return Err(Error::InsufficientData {
            context: "kmeans distinct rows".into(),
            needed: k,
            got: distinct,
        });
    }

    type Candidate = (f64, Vec<usize>, Vec<Vec<f64>>, usize);
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut best: Option<Candidate> = None;
    for _ in 0..options.restarts.max(1) {
        let centroids = kmeanspp_init(&sorted, k, &mut rng);
        let (labels, centroids, inertia, reseeds) =
            lloyd(&sorted, centroids, options.max_iter, options.rel_tol);
        let better = match &best {
            None => true,
            Some((bi, ..)) => inertia < *bi,
        };
        if better {
            best = Some((inertia, labels, centroids, reseeds));
        }
    }
    let (inertia, labels_sorted, centroids, reseeds) = best.expect("at least one restart");
    let mut labels = vec![0usize; n];
    for (pos, &orig) in order.iter().enumerate() {
        labels[orig] = labels_sorted[pos];
    }
    Ok(ClusterAssignment {
        labels,
        centroids,
        inertia,
        reseeds,
    })
}

fn kmeanspp_init(points: &[&Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let first = rng.random_range(0..n);
    let mut centers: Vec<Vec<f64>> = vec![points[first].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut cum = 0.0;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                cum += w;
                if cum >= target && w > 0.0 {
                    chosen = i;
                    break;
                }
            }
            if d2[chosen] == 0.0 {
                // walk to a point that is not already a center
                (0..n).find(|&i| d2[i] > 0.0).unwrap_or(chosen)
            } else {
                chosen
            }
        } else {
            // all points coincide with centers; take the first new distinct one
            (0..n)
                .find(|&i| centers.iter().all(|c| points[i] != c))
                .unwrap_or(0)
        };
        centers.push(points[idx].clone());
        for (i, p) in points.iter().enumerate() {
            let nd = sq_dist(p, centers.last().unwrap());
            if nd < d2[i] {
                d2[i] = nd;
            }
        }
    }
    centers
}

fn lloyd(
    points: &[&Vec<f64>],
    mut centroids: Vec<Vec<f64>>,
    max_iter: usize,
    rel_tol: f64,
) -> (Vec<usize>, Vec<Vec<f64>>, f64, usize) {
    let n = points.len();
    let k = centroids.len();
    let dim = points[0].len();
    let mut labels = vec![0usize; n];
    let mut inertia = f64::INFINITY;
    let mut prev_inertia = f64::INFINITY;
    let mut reseeds = 0usize;

    let mut iter = 0;
    while iter < max_iter {
        // assignment
        inertia = 0.0;
        let mut counts = vec![0usize; k];
        for (i, p) in points.iter().enumerate() {
            let mut best_z = 0usize;
            let mut best_d = f64::INFINITY;
            for (z, c) in centroids.iter().enumerate() {
                let d = sq_dist(p, c);
                if d < best_d {
                    best_d = d;
                    best_z = z;
                }
            }
            labels[i] = best_z;
            counts[best_z] += 1;
            inertia += best_d;
        }

        // reseed empty clusters at the farthest point and re-assign
        if counts.contains(&0) {
            let mut taken: Vec<usize> = Vec::new();
            for z in 0..k {
                if counts[z] > 0 {
                    continue;
                }
                let mut far_i = 0usize;
                let mut far_d = -1.0;
                for (i, p) in points.iter().enumerate() {
                    if taken.contains(&i) {
                        continue;
                    }
                    let d = sq_dist(p, &centroids[labels[i]]);
                    if d > far_d {
                        far_d = d;
                        far_i = i;
                    }
                }
                centroids[z] = points[far_i].clone();
                taken.push(far_i);
                reseeds += 1;
            }
            iter += 1;
            continue;
        }

        let rel = if prev_inertia.is_finite() && prev_inertia > 0.0 {
            (prev_inertia - inertia) / prev_inertia
        } else if prev_inertia == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        if rel.abs() < rel_tol {
            break;
        }
        prev_inertia = inertia;

        // update step, accumulating in canonical point order
        let mut sums = vec![vec![0.0; dim]; k];
        for (i, p) in points.iter().enumerate() {
            let z = labels[i];
            for (s, v) in sums[z].iter_mut().zip(p.iter()) {
                *s += v;
            }
        }
        for z in 0..k {
            for s in sums[z].iter_mut() {
                *s /= counts[z] as f64;
            }
        }
        centroids = sums;
        iter += 1;
    }
    (labels, centroids, inertia, reseeds)
}

/// Davies-Bouldin index in the given profile space. Returns `+inf` when two
/// cluster centroids coincide.
pub fn dbi(profiles: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    let n = profiles.len();
    if n != labels.len() {
        return Err(Error::Mismatch(format!(
            "dbi: {n} profiles vs {} labels",
            labels.len()
        )));
    }
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    if k < 2 {
        return Err(Error::InvalidConfig("dbi needs at least 2 clusters".into()));
    }
    let order = canonical_order(profiles);
    let dim = profiles[0].len();
    let mut counts = vec![0usize; k];
    let mut centroids = vec![vec![0.0; dim]; k];
    for &i in &order {
        let z = labels[i];
        counts[z] += 1;
        for (c, v) in centroids[z].iter_mut().zip(&profiles[i]) {
            *c += v;
        }
    }
    for z in 0..k {
        if counts[z] == 0 {
            return Err(Error::InvariantViolation(format!("cluster {z} is empty")));
        }
        for c in centroids[z].iter_mut() {
            *c /= counts[z] as f64;
        }
    }
    let mut scatter = vec![0.0; k];
    for &i in &order {
        let z = labels[i];
        scatter[z] += sq_dist(&profiles[i], &centroids[z]).sqrt();
    }
    for z in 0..k {
        scatter[z] /= counts[z] as f64;
    }
    let mut total = 0.0;
    for i in 0..k {
        let mut worst = 0.0f64;
        for j in 0..k {
            if i == j {
                continue;
            }
            let sep = sq_dist(&centroids[i], &centroids[j]).sqrt();
            let ratio = if sep == 0.0 {
                f64::INFINITY
            } else {
                (scatter[i] + scatter[j]) / sep
            };
            worst = worst.max(ratio);
        }
        total += worst;
    }
    Ok(total / k as f64)
}

/// Normalized-cut objective of an assignment on a similarity graph:
/// `sum_z cut(A_z, V \ A_z) / vol(A_z)`.
pub fn ncut_value(graph: &SimilarityGraph, labels: &[usize]) -> Result<f64> {
    let n = graph.weights.n_rows();
    if labels.len() != n {
        return Err(Error::Mismatch(format!(
            "ncut: {n} vertices vs {} labels",
            labels.len()
        )));
    }
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    if k < 2 {
        return Err(Error::InvalidConfig(
            "ncut undefined for fewer than 2 clusters".into(),
        ));
    }
    let mut volume = vec![0.0; k];
    let mut cut = vec![0.0; k];
    for i in 0..n {
        let zi = labels[i];
        for j in 0..n {
            let w = graph.weights[(i, j)];
            volume[zi] += w;
            if labels[j] != zi {
                cut[zi] += w;
            }
        }
    }
    let mut total = 0.0;
    for z in 0..k {
        if volume[z] == 0.0 {
            return Err(Error::InvariantViolation(format!("cluster {z} is empty")));
        }
        total += cut[z] / volume[z];
    }
    Ok(total)
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    if n < 2 {
        return 1.0;
    }
    let ka = a.iter().copied().max().map_or(0, |m| m + 1);
    let kb = b.iter().copied().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0usize; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let choose2 = |x: usize| (x * x.saturating_sub(1)) as f64 / 2.0;
    let sum_ij: f64 = table.iter().flatten().map(|&c| choose2(c)).sum();
    let sum_a: f64 = table.iter().map(|row| choose2(row.iter().sum())).sum();
    let sum_b: f64 = (0..kb)
        .map(|j| choose2(table.iter().map(|row| row[j]).sum()))
        .sum();
    let total = choose2(n);
    let expected = sum_a * sum_b / total;
    let max_index = 0.5 * (sum_a + sum_b);
    if (max_index - expected).abs() < 1e-300 {
        return 1.0;
    }
    (sum_ij - expected) / (max_index - expected)
}

/// Result of clustering one season's profiles with DBI-selected k.
#[derive(Debug, Clone, PartialEq)]
pub struct SeasonClustering {
    pub chosen_k: usize,
    pub labels: Vec<usize>,
    /// Mean member profile per cluster, in the original profile space.
    pub centroids: Vec<Vec<f64>>,
    pub member_counts: Vec<usize>,
    pub dbi_curve: Vec<(usize, f64)>,
}

/// Runs embed + k-means over every candidate k, picks the k with minimal DBI
/// (ties to the smaller k), and reports the full DBI curve.
pub fn select_k_and_cluster(
    profiles: &[Vec<f64>],
    config: &SpectralConfig,
) -> Result<SeasonClustering> {
    let n = profiles.len();
    if n < 3 {
        return Err(Error::InsufficientData {
            context: "select_k_and_cluster".into(),
            needed: 3,
            got: n,
        });
    }
    check_finite(profiles)?;
    let k_min = config.k_min.max(2);
    let k_max = config.k_max.min(n - 1);
    if k_min > k_max {
        return Err(Error::InvalidConfig(format!(
            "k range [{}, {}] empty after clamping to n-1={}",
            config.k_min,
            config.k_max,
            n - 1
        )));
    }

    let clustered_space: Vec<Vec<f64>> = if config.normalize_profiles {
        profiles
            .iter()
            .map(|p| {
                let max = p.iter().copied().fold(0.0f64, f64::max);
                if max > 0.0 {
                    p.iter().map(|v| v / max).collect()
                } else {
                    p.clone()
                }
            })
            .collect()
    } else {
        profiles.to_vec()
    };

    let graph = build_graph(&clustered_space, config.phi)?;
    let embed_options = EmbedOptions {
        dense_threshold: config.dense_eigen_threshold,
        seed: config.seed,
        ..EmbedOptions::default()
    };
    // one decomposition at k_max; candidate k uses its first k columns
    let full = embed(&graph, k_max, &embed_options)?;

    let candidates: Vec<usize> = (k_min..=k_max).collect();
    let evaluated: Vec<Result<Option<(usize, f64, ClusterAssignment)>>> =
        maybe_par_map(&candidates, |&k| {
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    let mut row: Vec<f64> = full.columns[..k].iter().map(|c| c[i]).collect();
                    let norm = linalg::norm2(&row);
                    if norm > 0.0 {
                        for v in row.iter_mut() {
                            *v /= norm;
                        }
                    }
                    row
                })
                .collect();
            let assignment = match kmeans(
                &rows,
                k,
                &KmeansOptions {
                    seed: config.seed.wrapping_add(k as u64),
                    restarts: config.kmeans_restarts,
                    max_iter: config.kmeans_max_iter,
                    rel_tol: 1e-6,
                },
            ) {
                Ok(a) => a,
                // fewer distinct embedding rows than k: candidate infeasible
                Err(Error::InsufficientData { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            let index = dbi(&clustered_space, &assignment.labels)?;
            Ok(Some((k, index, assignment)))
        });

    let mut curve = Vec::new();
    let mut best: Option<(usize, f64, ClusterAssignment)> = None;
    for (item, &k) in evaluated.into_iter().zip(&candidates) {
        let Some((k, index, assignment)) = item? else {
            curve.push((k, f64::INFINITY));
            continue;
        };
        curve.push((k, index));
        let better = match &best {
            None => true,
            Some((_, bi, _)) => index < *bi,
        };
        if better {
            best = Some((k, index, assignment));
        }
    }
    let Some((chosen_k, _, assignment)) = best else {
        return Err(Error::DegenerateInput(
            "no feasible cluster count in the configured k range".into(),
        ));
    };

    // typical profiles are means in the raw kWh space, accumulated canonically
    let order = canonical_order(profiles);
    let dim = profiles[0].len();
    let mut counts = vec![0usize; chosen_k];
    let mut centroids = vec![vec![0.0; dim]; chosen_k];
    for &i in &order {
        let z = assignment.labels[i];
        counts[z] += 1;
        for (c, v) in centroids[z].iter_mut().zip(&profiles[i]) {
            *c += v;
        }
    }
    for z in 0..chosen_k {
        for c in centroids[z].iter_mut() {
            *c /= counts[z] as f64;
        }
    }

    Ok(SeasonClustering {
        chosen_k,
        labels: assignment.labels,
        centroids,
        member_counts: counts,
        dbi_curve: curve,
    })
}
