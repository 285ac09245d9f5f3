//! Minimal dense linear algebra: row-major matrices, Cholesky solves, and
//! symmetric eigensolvers.
//!
//! Two eigensolver routes are provided. [`sym_eigen`] reduces the matrix to
//! tridiagonal form with Householder reflections and diagonalizes it with the
//! implicit-shift QL iteration; it is the default for desk-scale problems.
//! [`lanczos_largest`] is an iterative solver with full reorthogonalization
//! and deflation restarts, used when only a few extreme eigenpairs of a large
//! operator are needed. Both are deterministic for identical inputs.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            debug_assert_eq!(row.len(), c);
            data.extend_from_slice(row);
        }
        Mat {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                let row = self.row(i);
                row.iter().zip(x).map(|(a, b)| a * b).sum()
            })
            .collect()
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `A x = b` for symmetric positive definite `A` via Cholesky.
pub fn cholesky_solve(a: &Mat, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.n_rows();
    debug_assert_eq!(a.n_cols(), n);
    debug_assert_eq!(b.len(), n);
    let mut l = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[(i, j)];
            for k in 0..j {
                sum -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::SingularSystem(format!(
                        "non-positive pivot {sum:.3e} at row {i}"
                    )));
                }
                l[(i, j)] = sum.sqrt();
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    // forward substitution L y = b
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[(i, k)] * y[k];
        }
        y[i] = sum / l[(i, i)];
    }
    // back substitution L^T x = y
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in i + 1..n {
            sum -= l[(k, i)] * x[k];
        }
        x[i] = sum / l[(i, i)];
    }
    Ok(x)
}

/// Full eigendecomposition of a symmetric matrix.
///
/// Returns eigenvalues in ascending order and the corresponding orthonormal
/// eigenvectors as matrix columns. The input is consumed as workspace.
pub fn sym_eigen(mut a: Mat) -> Result<(Vec<f64>, Mat)> {
    let n = a.n_rows();
    debug_assert_eq!(a.n_cols(), n);
    if n == 0 {
        return Ok((Vec::new(), Mat::zeros(0, 0)));
    }
    let (mut d, mut e) = tridiagonalize(&mut a);
    ql_implicit(&mut d, &mut e, &mut a)?;
    // sort ascending, reordering eigenvector columns
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let mut values = Vec::with_capacity(n);
    let mut vectors = Mat::zeros(n, n);
    for (new_j, &old_j) in order.iter().enumerate() {
        values.push(d[old_j]);
        for i in 0..n {
            vectors[(i, new_j)] = a[(i, old_j)];
        }
    }
    Ok((values, vectors))
}

/// Householder reduction to tridiagonal form with accumulation of the
/// orthogonal transformation in place of `a`.
fn tridiagonalize(a: &mut Mat) -> (Vec<f64>, Vec<f64>) {
    let n = a.n_rows();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];

    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let mut scale = 0.0;
            for k in 0..=l {
                scale += a[(i, k)].abs();
            }
            if scale == 0.0 {
                e[i] = a[(i, l)];
            } else {
                for k in 0..=l {
                    a[(i, k)] /= scale;
                    h += a[(i, k)] * a[(i, k)];
                }
                let f = a[(i, l)];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                a[(i, l)] = f - g;
                let mut f_acc = 0.0;
                for j in 0..=l {
                    a[(j, i)] = a[(i, j)] / h;
                    let mut g_acc = 0.0;
                    for k in 0..=j {
                        g_acc += a[(j, k)] * a[(i, k)];
                    }
                    for k in j + 1..=l {
                        g_acc += a[(k, j)] * a[(i, k)];
                    }
                    e[j] = g_acc / h;
                    f_acc += e[j] * a[(i, j)];
                }
                let hh = f_acc / (h + h);
                for j in 0..=l {
                    let f = a[(i, j)];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        let delta = f * e[k] + g * a[(i, k)];
                        a[(j, k)] -= delta;
                    }
                }
            }
        } else {
            e[i] = a[(i, l)];
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for i in 0..n {
        if d[i] != 0.0 {
            for j in 0..i {
                let mut g = 0.0;
                for k in 0..i {
                    g += a[(i, k)] * a[(k, j)];
                }
                for k in 0..i {
                    let delta = g * a[(k, i)];
                    a[(k, j)] -= delta;
                }
            }
        }
        d[i] = a[(i, i)];
        a[(i, i)] = 1.0;
        for j in 0..i {
            a[(j, i)] = 0.0;
            a[(i, j)] = 0.0;
        }
    }
    (d, e)
}

/// Implicit-shift QL iteration on a symmetric tridiagonal matrix, rotating
/// the accumulated transformation `z` along.
fn ql_implicit(d: &mut [f64], e: &mut [f64], z: &mut Mat) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                let tst = (f64::EPSILON * dd).max(f64::MIN_POSITIVE);
                if e[m].abs() <= tst {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::EigenNonConvergence {
                    residual: e[l].abs(),
                    tolerance: f64::EPSILON,
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            let sign_r = if g >= 0.0 { r.abs() } else { -r.abs() };
            g = d[m] - d[l] + e[l] / (g + sign_r);
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    f = z[(k, i + 1)];
                    z[(k, i + 1)] = s * z[(k, i)] + c * f;
                    z[(k, i)] = c * z[(k, i)] - s * f;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Largest `k` eigenpairs of a symmetric operator given only as a mat-vec
/// closure, via Lanczos with full reorthogonalization.
///
/// Restarts with deflation recover eigenvalue multiplicities that a single
/// Krylov space cannot see. Returns values in descending order with unit
/// eigenvectors; errors with the worst residual if `tol` cannot be met.
pub fn lanczos_largest<F>(
    matvec: F,
    n: usize,
    k: usize,
    tol: f64,
    seed: u64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    assert!(k <= n, "requested more eigenpairs than dimensions");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut found_vals: Vec<f64> = Vec::new();
    let mut found_vecs: Vec<Vec<f64>> = Vec::new();
    let mut worst_residual = f64::INFINITY;
    let mut attempts = 0usize;

    while found_vecs.len() < k {
        attempts += 1;
        if attempts > k + 8 {
            return Err(Error::EigenNonConvergence {
                residual: worst_residual,
                tolerance: tol,
            });
        }
        // deterministic start vector orthogonal to everything already found
        let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        orthogonalize(&mut v, &found_vecs);
        let nv = norm2(&v);
        if nv < 1e-12 {
            continue;
        }
        for x in v.iter_mut() {
            *x /= nv;
        }

        let m_max = (n - found_vecs.len()).min((4 * k + 80).max(60));
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m_max);
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();

        for j in 0..m_max {
            basis.push(v.clone());
            let mut w = matvec(&v);
            let alpha = dot(&basis[j], &w);
            alphas.push(alpha);
            for (wi, qi) in w.iter_mut().zip(&basis[j]) {
                *wi -= alpha * qi;
            }
            if j > 0 {
                let beta_prev = betas[j - 1];
                for (wi, qi) in w.iter_mut().zip(&basis[j - 1]) {
                    *wi -= beta_prev * qi;
                }
            }
            // full reorthogonalization, two passes
            for _ in 0..2 {
                orthogonalize(&mut w, &basis);
                orthogonalize(&mut w, &found_vecs);
            }
            let beta = norm2(&w);
            if beta < 1e-13 {
                break; // exhausted an invariant subspace
            }
            betas.push(beta);
            v = w.into_iter().map(|x| x / beta).collect();
        }

        // diagonalize the tridiagonal Rayleigh quotient
        let m = alphas.len();
        let mut t = Mat::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alphas[i];
            if i + 1 < m {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let (tvals, tvecs) = sym_eigen(t)?;

        // accept only the top Ritz pair of this deflated run: it approximates
        // the largest remaining eigenvalue, so repeated eigenvalues surface
        // once per restart instead of being shadowed by interior values
        let mut accepted = false;
        for idx in (0..m).rev() {
            let theta = tvals[idx];
            let mut x = vec![0.0; n];
            for (j, q) in basis.iter().enumerate() {
                let yj = tvecs[(j, idx)];
                for (xi, qi) in x.iter_mut().zip(q) {
                    *xi += yj * qi;
                }
            }
            orthogonalize(&mut x, &found_vecs);
            let nx = norm2(&x);
            if nx < 1e-12 {
                continue; // collapsed onto already-found directions; next Ritz pair
            }
            for xi in x.iter_mut() {
                *xi /= nx;
            }
            let bx = matvec(&x);
            let residual = bx
                .iter()
                .zip(&x)
                .map(|(b, xi)| (b - theta * xi).powi(2))
                .sum::<f64>()
                .sqrt();
            worst_residual = worst_residual.min(residual);
            if residual <= tol {
                found_vals.push(theta);
                found_vecs.push(x);
                accepted = true;
            }
            break;
        }
        if !accepted && basis.len() >= n - found_vecs.len() {
            return Err(Error::EigenNonConvergence {
                residual: worst_residual,
                tolerance: tol,
            });
        }
    }

    // order descending by value
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| found_vals[j].total_cmp(&found_vals[i]));
    let vals = order.iter().map(|&i| found_vals[i]).collect();
    let vecs = order.iter().map(|&i| found_vecs[i].clone()).collect();
    Ok((vals, vecs))
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for q in basis {
        let proj = dot(v, q);
        for (vi, qi) in v.iter_mut().zip(q) {
            *vi -= proj * qi;
        }
    }
}

/// Reference eigensolver and subspace comparison used as an independent
/// check of [`sym_eigen`]. Cyclic Jacobi rotations share no code with the
/// Householder/QL route above.
pub mod oracle {
    use super::Mat;

    /// Full symmetric eigendecomposition by cyclic Jacobi rotations.
    /// Returns (ascending eigenvalues, eigenvectors as columns).
    pub fn jacobi_eigen(mut a: Mat, sweeps: usize) -> (Vec<f64>, Mat) {
        let n = a.n_rows();
        let mut v = Mat::identity(n);
        for _ in 0..sweeps {
            let mut off = 0.0;
            for p in 0..n {
                for q in p + 1..n {
                    off += a[(p, q)] * a[(p, q)];
                }
            }
            if off < 1e-24 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[(p, q)].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for i in 0..n {
                        let aip = a[(i, p)];
                        let aiq = a[(i, q)];
                        a[(i, p)] = c * aip - s * aiq;
                        a[(i, q)] = s * aip + c * aiq;
                    }
                    for j in 0..n {
                        let apj = a[(p, j)];
                        let aqj = a[(q, j)];
                        a[(p, j)] = c * apj - s * aqj;
                        a[(q, j)] = s * apj + c * aqj;
                    }
                    for i in 0..n {
                        let vip = v[(i, p)];
                        let viq = v[(i, q)];
                        v[(i, p)] = c * vip - s * viq;
                        v[(i, q)] = s * vip + c * viq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
        let mut vals = Vec::with_capacity(n);
        let mut vecs = Mat::zeros(n, n);
        for (new_j, &old_j) in order.iter().enumerate() {
            vals.push(a[(old_j, old_j)]);
            for i in 0..n {
                vecs[(i, new_j)] = v[(i, old_j)];
            }
        }
        (vals, vecs)
    }

    /// Largest principal angle (radians) between the column spans of two
    /// orthonormal n-by-k matrices, via the spectrum of (U'V)(V'U).
    pub fn max_principal_angle(u: &[Vec<f64>], w: &[Vec<f64>]) -> f64 {
        let k = u.len();
        assert_eq!(k, w.len());
        // m = U^T W  (k x k)
        let mut m = Mat::zeros(k, k);
        for (i, ui) in u.iter().enumerate() {
            for (j, wj) in w.iter().enumerate() {
                m[(i, j)] = super::dot(ui, wj);
            }
        }
        // g = M^T M; eigenvalues are squared cosines of principal angles
        let mut g = Mat::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                let mut s = 0.0;
                for l in 0..k {
                    s += m[(l, i)] * m[(l, j)];
                }
                g[(i, j)] = s;
            }
        }
        let (vals, _) = jacobi_eigen(g, 100);
        let min_cos2 = vals.first().copied().unwrap_or(1.0).clamp(0.0, 1.0);
        min_cos2.sqrt().clamp(0.0, 1.0).acos()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_symmetric(n: usize, seed: u64) -> Mat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v: f64 = rng.random_range(-1.0..1.0);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        a
    }

    fn check_eigen(a: &Mat, vals: &[f64], vecs: &Mat, tol: f64) {
        let n = a.n_rows();
        for j in 0..n {
            let v = vecs.col(j);
            let av = a.mul_vec(&v);
            let res: f64 = av
                .iter()
                .zip(&v)
                .map(|(x, y)| (x - vals[j] * y).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(res < tol, "residual {res:.3e} for eigenvalue {}", vals[j]);
            let nv = norm2(&v);
            assert!((nv - 1.0).abs() < 1e-10, "eigenvector norm {nv}");
        }
    }

    #[test]
    fn eigen_residuals_small_random() {
        for n in [1, 2, 3, 5, 10, 30] {
            let a = random_symmetric(n, 7 + n as u64);
            let (vals, vecs) = sym_eigen(a.clone()).unwrap();
            check_eigen(&a, &vals, &vecs, 1e-10);
            for w in vals.windows(2) {
                assert!(w[0] <= w[1]);
            }
        }
    }

    #[test]
    fn eigen_matches_jacobi_oracle() {
        let a = random_symmetric(25, 42);
        let (vals, _) = sym_eigen(a.clone()).unwrap();
        let (ovals, _) = oracle::jacobi_eigen(a, 100);
        for (x, y) in vals.iter().zip(&ovals) {
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
    }

    #[test]
    fn eigen_known_2x2() {
        let mut a = Mat::zeros(2, 2);
        a[(0, 0)] = 2.0;
        a[(1, 1)] = 2.0;
        a[(0, 1)] = 1.0;
        a[(1, 0)] = 1.0;
        let (vals, _) = sym_eigen(a).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn eigen_handles_repeated_eigenvalues() {
        // block diagonal with two identical 2x2 blocks
        let mut a = Mat::zeros(4, 4);
        for b in 0..2 {
            let o = 2 * b;
            a[(o, o)] = 2.0;
            a[(o + 1, o + 1)] = 2.0;
            a[(o, o + 1)] = -1.0;
            a[(o + 1, o)] = -1.0;
        }
        let (vals, vecs) = sym_eigen(a.clone()).unwrap();
        check_eigen(&a, &vals, &vecs, 1e-10);
        assert!((vals[0] - 1.0).abs() < 1e-10 && (vals[1] - 1.0).abs() < 1e-10);
        assert!((vals[2] - 3.0).abs() < 1e-10 && (vals[3] - 3.0).abs() < 1e-10);
    }

    #[test]
    fn cholesky_solves_spd_system() {
        let mut a = Mat::zeros(3, 3);
        let entries = [[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]];
        for i in 0..3 {
            for j in 0..3 {
                a[(i, j)] = entries[i][j];
            }
        }
        let x_true = vec![1.0, -2.0, 0.5];
        let b = a.mul_vec(&x_true);
        let x = cholesky_solve(&a, &b).unwrap();
        for (xi, ti) in x.iter().zip(&x_true) {
            assert!((xi - ti).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut a = Mat::identity(2);
        a[(1, 1)] = -1.0;
        assert!(cholesky_solve(&a, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn lanczos_agrees_with_dense_on_extremes() {
        let n = 40;
        let a = {
            // positive semidefinite with spread spectrum: B = C^T C scaled
            let c = random_symmetric(n, 11);
            let mut b = Mat::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        s += c[(l, i)] * c[(l, j)];
                    }
                    b[(i, j)] = s / n as f64;
                }
            }
            b
        };
        let (dense_vals, _) = sym_eigen(a.clone()).unwrap();
        let k = 4;
        let (vals, vecs) = lanczos_largest(|x| a.mul_vec(x), n, k, 1e-10, 99).unwrap();
        for i in 0..k {
            let expected = dense_vals[n - 1 - i];
            assert!(
                (vals[i] - expected).abs() < 1e-8,
                "lanczos {} vs dense {}",
                vals[i],
                expected
            );
            let av = a.mul_vec(&vecs[i]);
            let res: f64 = av
                .iter()
                .zip(&vecs[i])
                .map(|(x, y)| (x - vals[i] * y).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(res < 1e-8);
        }
    }

    #[test]
    fn lanczos_recovers_multiplicity() {
        // diagonal matrix with a triple top eigenvalue
        let n = 20;
        let mut a = Mat::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = if i < 3 { 5.0 } else { i as f64 * 0.1 };
        }
        let (vals, vecs) = lanczos_largest(|x| a.mul_vec(x), n, 3, 1e-10, 3).unwrap();
        for v in &vals {
            assert!((v - 5.0).abs() < 1e-8);
        }
        // vectors mutually orthogonal
        for i in 0..3 {
            for j in i + 1..3 {
                assert!(dot(&vecs[i], &vecs[j]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn principal_angle_of_identical_spans_is_zero() {
        let u = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
        // same span, rotated basis
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let w = vec![vec![s, s, 0.0], vec![s, -s, 0.0]];
        let angle = oracle::max_principal_angle(&u, &w);
        assert!(angle < 1e-10, "angle {angle}");
        let w2 = vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]];
        let angle2 = oracle::max_principal_angle(&u, &w2);
        assert!((angle2 - std::f64::consts::FRAC_PI_2).abs() < 1e-10);
    }
}
