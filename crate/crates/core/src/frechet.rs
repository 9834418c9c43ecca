//! Fréchet distance between Gaussian summaries of two feature sets.
//!
//! For summaries `X`, `Y` with means `mu` and covariances `sigma`:
//!
//! ```text
//! d(X, Y) = |mu_x - mu_y|^2 + tr(sigma_x) + tr(sigma_y) - 2 tr((sigma_x sigma_y)^(1/2))
//! ```
//!
//! The product `sigma_x sigma_y` is not symmetric, but it is similar to
//! `S sigma_y S` with `S = sigma_x^(1/2)`, which is. The trace of the square
//! root is therefore the sum of square roots of the eigenvalues of
//! `S sigma_y S`, computed with a symmetric eigensolver.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CsiError, Result};
use crate::stats::{symmetrize, DatasetSummary};

/// Relative tolerance for symmetry checks and negative-eigenvalue clamping.
pub const EPS_SYM: f64 = 1e-10;

/// Relative tolerance on the distance itself.
pub const EPS_CSI: f64 = 1e-8;

pub(crate) fn psd_tolerance(trace: f64) -> f64 {
    EPS_SYM * trace.max(1.0)
}

/// Checks `m` is square and symmetric within [`EPS_SYM`] (relative
/// Frobenius) and returns its exact symmetrization.
pub fn checked_symmetric(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(CsiError::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    let asym = (m - m.transpose()).norm();
    let rel = asym / m.norm().max(1.0);
    if rel > EPS_SYM || !rel.is_finite() {
        return Err(CsiError::NotSymmetric(rel));
    }
    Ok(symmetrize(m))
}

/// Clamps eigenvalues in `[-tol, 0)` to zero. Returns how many were clamped,
/// or an error for any eigenvalue below `-tol`.
fn clamp_spectrum(values: &mut DVector<f64>, trace: f64) -> Result<usize> {
    let tol = psd_tolerance(trace);
    let mut clamped = 0;
    for v in values.iter_mut() {
        if *v < 0.0 {
            if *v < -tol {
                return Err(CsiError::NotPsd {
                    eigenvalue: *v,
                    tolerance: tol,
                });
            }
            *v = 0.0;
            clamped += 1;
        }
    }
    Ok(clamped)
}

/// Principal square root of a symmetric positive-semidefinite matrix,
/// `V diag(sqrt(max(lambda, 0))) V^T`.
pub fn sqrt_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(sqrt_psd_counted(m)?.0)
}

fn sqrt_psd_counted(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, usize)> {
    let m = checked_symmetric(m)?;
    let trace = m.trace();
    let eig = SymmetricEigen::new(m);
    let mut values = eig.eigenvalues;
    let clamped = clamp_spectrum(&mut values, trace)?;
    let vecs = eig.eigenvectors;
    let mut scaled = vecs.clone();
    for (mut col, &l) in scaled.column_iter_mut().zip(values.iter()) {
        col *= l.sqrt();
    }
    let root = symmetrize(&(scaled * vecs.transpose()));
    Ok((root, clamped))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsiValue {
    /// Distance, clamped to be non-negative.
    pub value: f64,
    /// `|mu_x - mu_y|^2`
    pub mean_term: f64,
    /// `tr(sigma_x + sigma_y - 2 (sigma_x sigma_y)^(1/2))`
    pub trace_term: f64,
    /// Negative eigenvalues (within tolerance) set to zero along the way.
    pub clamped_eigenvalues: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CsiOptions {
    /// Added to both covariance diagonals before the distance is taken.
    pub ridge: f64,
}

/// A summary with its covariance validated and square-rooted once, so it
/// can be paired against many others.
#[derive(Debug, Clone)]
pub struct PreparedSummary {
    pub name: String,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    root: DMatrix<f64>,
    trace: f64,
    clamped: usize,
}

impl PreparedSummary {
    pub fn new(summary: &DatasetSummary, options: &CsiOptions) -> Result<Self> {
        if !(options.ridge >= 0.0 && options.ridge.is_finite()) {
            return Err(CsiError::InvalidArgument(format!(
                "ridge must be a finite non-negative number, got {}",
                options.ridge
            )));
        }
        let mut cov = checked_symmetric(&summary.cov)?;
        if summary.mean.len() != cov.nrows() {
            return Err(CsiError::DimensionMismatch {
                expected: summary.mean.len(),
                found: cov.nrows(),
            });
        }
        if options.ridge > 0.0 {
            for i in 0..cov.nrows() {
                cov[(i, i)] += options.ridge;
            }
        }
        let (root, clamped) = sqrt_psd_counted(&cov)?;
        Ok(Self {
            name: summary.name.clone(),
            mean: summary.mean.clone(),
            trace: cov.trace(),
            cov,
            root,
            clamped,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Distance from `self` (as X) to `other` (as Y).
    pub fn distance(&self, other: &PreparedSummary) -> Result<CsiValue> {
        if self.dim() != other.dim() {
            return Err(CsiError::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        let mean_term = (&self.mean - &other.mean).norm_squared();
        let product = symmetrize(&(&self.root * &other.cov * &self.root));
        let mut eigs = product.symmetric_eigenvalues();
        let clamped = clamp_spectrum(&mut eigs, product.trace())?;
        let cross: f64 = eigs.iter().map(|l| l.sqrt()).sum();
        let trace_term = self.trace + other.trace - 2.0 * cross;
        Ok(CsiValue {
            value: (mean_term + trace_term).max(0.0),
            mean_term,
            trace_term,
            clamped_eigenvalues: self.clamped + other.clamped + clamped,
        })
    }
}

pub fn csi(x: &DatasetSummary, y: &DatasetSummary) -> Result<CsiValue> {
    csi_with(x, y, &CsiOptions::default())
}

pub fn csi_with(x: &DatasetSummary, y: &DatasetSummary, options: &CsiOptions) -> Result<CsiValue> {
    if x.dim != y.dim {
        return Err(CsiError::DimensionMismatch {
            expected: x.dim,
            found: y.dim,
        });
    }
    PreparedSummary::new(x, options)?.distance(&PreparedSummary::new(y, options)?)
}

/// Distances for every (upstream, downstream) pair; rows follow the
/// upstream order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsiMatrix {
    pub upstream: Vec<String>,
    pub downstream: Vec<String>,
    pub values: Vec<Vec<CsiValue>>,
}

pub fn csi_matrix(
    upstream: &[DatasetSummary],
    downstream: &[DatasetSummary],
    options: &CsiOptions,
) -> Result<CsiMatrix> {
    let dim = upstream.first().or(downstream.first()).map(|s| s.dim);
    if let Some(dim) = dim {
        if let Some(bad) = upstream.iter().chain(downstream).find(|s| s.dim != dim) {
            return Err(CsiError::DimensionMismatch {
                expected: dim,
                found: bad.dim,
            });
        }
    }
    let prepare = |list: &[DatasetSummary]| -> Result<Vec<PreparedSummary>> {
        list.par_iter()
            .map(|s| PreparedSummary::new(s, options))
            .collect()
    };
    let up = prepare(upstream)?;
    let down = prepare(downstream)?;
    let values = up
        .par_iter()
        .map(|u| {
            down.iter()
                .map(|d| u.distance(d))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CsiMatrix {
        upstream: up.into_iter().map(|p| p.name).collect(),
        downstream: down.into_iter().map(|p| p.name).collect(),
        values,
    })
}

impl CsiMatrix {
    pub fn get(&self, upstream: usize, downstream: usize) -> &CsiValue {
        &self.values[upstream][downstream]
    }

    /// Heatmap-ready CSV: a header of downstream names, then one row per
    /// upstream dataset with values to 6 significant digits.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["upstream".to_string()];
        header.extend(self.downstream.iter().cloned());
        w.write_record(&header)?;
        for (name, row) in self.upstream.iter().zip(&self.values) {
            let mut rec = vec![name.clone()];
            rec.extend(row.iter().map(|v| format_significant(v.value, 6)));
            w.write_record(&rec)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| CsiError::io(path, e))?;
        self.write_csv(file)
    }
}

/// Formats `v` with `digits` significant digits in the style of C's `%g`:
/// fixed notation for moderate exponents, scientific otherwise, trailing
/// zeros removed.
pub fn format_significant(v: f64, digits: usize) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return "0".to_string();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if exp < -4 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        format!(
            "{mantissa}e{}{:02}",
            if exp < 0 { '-' } else { '+' },
            exp.abs()
        )
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
