//! Reference routines and fixtures shared by the integration tests.
//!
//! Nothing here calls into the crate's linear algebra: the eigensolver is a
//! plain cyclic Jacobi iteration over `Vec<Vec<f64>>`, and the Fréchet
//! reference goes through a Cholesky factor instead of a matrix square root.

#![allow(clippy::needless_range_loop, dead_code)]

use csikit_core::nalgebra::{DMatrix, DVector};
use csikit_core::DatasetSummary;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Dense = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn to_dense(m: &DMatrix<f64>) -> Dense {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn from_dense(m: &Dense) -> DMatrix<f64> {
    DMatrix::from_fn(m.len(), m.len(), |i, j| m[i][j])
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(m: &Dense) -> Vec<f64> {
    let n = m.len();
    let mut a = m.clone();
    let norm: f64 = a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * norm.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

/// Lower-triangular `L` with `L L^T = m` for positive-definite `m`.
pub fn cholesky(m: &Dense) -> Dense {
    let n = m.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = m[i][i] - s;
                assert!(d > 0.0, "matrix is not positive definite");
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (m[i][j] - s) / l[j][j];
            }
        }
    }
    l
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let n = a.len();
    let m = b[0].len();
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| (0..b.len()).map(|k| a[i][k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

pub fn transpose(a: &Dense) -> Dense {
    (0..a[0].len())
        .map(|j| (0..a.len()).map(|i| a[i][j]).collect())
        .collect()
}

/// Fréchet distance through `L^T sigma_y L`, `L = chol(sigma_x)`, which
/// has the same spectrum as `sigma_x sigma_y`.
pub fn reference_frechet(mean_x: &[f64], cov_x: &Dense, mean_y: &[f64], cov_y: &Dense) -> f64 {
    let l = cholesky(cov_x);
    let k = matmul(&matmul(&transpose(&l), cov_y), &l);
    let sym: Dense = (0..k.len())
        .map(|i| (0..k.len()).map(|j| 0.5 * (k[i][j] + k[j][i])).collect())
        .collect();
    let cross: f64 = jacobi_eigenvalues(&sym)
        .into_iter()
        .map(|l| l.max(0.0).sqrt())
        .sum();
    let mean_term: f64 = mean_x
        .iter()
        .zip(mean_y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let tr = |m: &Dense| (0..m.len()).map(|i| m[i][i]).sum::<f64>();
    mean_term + tr(cov_x) + tr(cov_y) - 2.0 * cross
}

/// Closed form for diagonal covariances.
pub fn diagonal_frechet(mean_x: &[f64], var_x: &[f64], mean_y: &[f64], var_y: &[f64]) -> f64 {
    let mean_term: f64 = mean_x
        .iter()
        .zip(mean_y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let var_term: f64 = var_x
        .iter()
        .zip(var_y)
        .map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2))
        .sum();
    mean_term + var_term
}

/// Two-pass sample covariance of row-major `rows`.
pub fn two_pass_covariance(rows: &[f64], dim: usize) -> (Vec<f64>, Dense) {
    let n = rows.len() / dim;
    let mut mean = vec![0.0; dim];
    for r in rows.chunks_exact(dim) {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov = vec![vec![0.0; dim]; dim];
    for r in rows.chunks_exact(dim) {
        for i in 0..dim {
            for j in 0..dim {
                cov[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]);
            }
        }
    }
    for row in &mut cov {
        for v in row {
            *v /= (n - 1) as f64;
        }
    }
    (mean, cov)
}

pub fn relative_frobenius(a: &Dense, b: &Dense) -> f64 {
    let diff: f64 = a
        .iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm: f64 = b.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    diff / norm.max(f64::MIN_POSITIVE)
}

/// Random positive-definite `B^T B / m` with `B` of shape `(d + extra) x d`.
pub fn random_spd(rng: &mut impl Rng, d: usize, extra: usize) -> DMatrix<f64> {
    let b = DMatrix::<f64>::from_fn(d + extra, d, |_, _| rng.random_range(-1.0..1.0));
    let m = b.transpose() * b / (d + extra) as f64;
    (&m + m.transpose()) * 0.5
}

pub fn random_summary(rng: &mut impl Rng, name: &str, d: usize) -> DatasetSummary {
    let mean = DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0));
    let cov = random_spd(rng, d, 2);
    DatasetSummary::from_moments(name, 1000, mean, cov).unwrap()
}

pub fn diagonal_summary(name: &str, mean: &[f64], var: &[f64]) -> DatasetSummary {
    DatasetSummary::from_moments(
        name,
        1000,
        DVector::from_column_slice(mean),
        DMatrix::from_diagonal(&DVector::from_column_slice(var)),
    )
    .unwrap()
}

/// Random orthogonal matrix from Gram-Schmidt on a random square matrix.
pub fn random_orthogonal(rng: &mut impl Rng, d: usize) -> DMatrix<f64> {
    let a = DMatrix::<f64>::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    a.qr().q()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
