//! First and second moments of feature rows.
//!
//! [`MomentAccumulator`] is a one-pass, mergeable estimator of the mean
//! vector and scatter matrix (sum of outer products of deviations from the
//! mean). Rows are pushed one at a time with the Welford update and partial
//! accumulators combine with the pairwise (Chan) merge, so any partition of
//! the input yields the same moments up to round-off.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CsiError, Result};
use crate::rng::stream_rng;
use crate::shard::EmbeddingShard;

pub const SUMMARY_MAGIC: [u8; 4] = *b"CSM1";

/// Columns whose standard deviation falls below this are zeroed by
/// [`standardize`].
pub const EPS_STD: f64 = 1e-12;

/// Denominator used when turning a scatter matrix into a covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Denominator {
    /// `n - 1`
    #[default]
    Unbiased,
    /// `n`
    Population,
}

impl Denominator {
    fn divisor(self, count: u64) -> f64 {
        match self {
            Denominator::Unbiased => (count - 1) as f64,
            Denominator::Population => count as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentAccumulator {
    dim: usize,
    count: u64,
    mean: DVector<f64>,
    scatter: DMatrix<f64>,
}

impl MomentAccumulator {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            count: 0,
            mean: DVector::zeros(dim),
            scatter: DMatrix::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// Sum of outer products of deviations from the running mean.
    pub fn scatter(&self) -> DMatrix<f64> {
        let mut s = self.scatter.clone();
        mirror_upper(&mut s);
        s
    }

    /// Adds one row. The scatter update `(n-1)/n * delta * delta^T` only
    /// touches the upper triangle; readers mirror it, so the result is
    /// exactly symmetric.
    pub fn push_row<T: Copy + Into<f64>>(&mut self, row: &[T]) -> Result<()> {
        if row.len() != self.dim {
            return Err(CsiError::DimensionMismatch {
                expected: self.dim,
                found: row.len(),
            });
        }
        if let Some(offset) = row.iter().position(|&v| !v.into().is_finite()) {
            return Err(CsiError::NonFinite { graph: 0, offset });
        }
        self.count += 1;
        let n = self.count as f64;
        let delta: Vec<f64> = row
            .iter()
            .zip(self.mean.iter())
            .map(|(&x, &m)| x.into() - m)
            .collect();
        for (m, d) in self.mean.iter_mut().zip(&delta) {
            *m += d / n;
        }
        let w = (n - 1.0) / n;
        for j in 0..self.dim {
            let dj = delta[j] * w;
            if dj == 0.0 {
                continue;
            }
            // column-major storage: column j holds rows 0..=j of the upper triangle
            let col = &mut self.scatter.as_mut_slice()[j * self.dim..j * self.dim + j + 1];
            for (i, s) in col.iter_mut().enumerate() {
                *s += delta[i] * dj;
            }
        }
        Ok(())
    }

    /// Adds every row of a row-major `n x dim` block. On error the
    /// accumulator is left unchanged.
    pub fn accumulate<T: Copy + Into<f64>>(&mut self, rows: &[T]) -> Result<()> {
        if !rows.len().is_multiple_of(self.dim.max(1)) || (self.dim == 0 && !rows.is_empty()) {
            return Err(CsiError::DimensionMismatch {
                expected: self.dim,
                found: rows.len() % self.dim.max(1),
            });
        }
        if let Some(offset) = rows.iter().position(|&v| !v.into().is_finite()) {
            return Err(CsiError::NonFinite { graph: 0, offset });
        }
        for row in rows.chunks_exact(self.dim) {
            self.push_row(row)?;
        }
        Ok(())
    }

    /// Adds rows given as separate slices; each must have width `dim`.
    pub fn accumulate_rows<'a, T, I>(&mut self, rows: I) -> Result<()>
    where
        T: Copy + Into<f64> + 'a,
        I: IntoIterator<Item = &'a [T]>,
    {
        for row in rows {
            self.push_row(row)?;
        }
        Ok(())
    }

    /// Combines two accumulators as if all rows had been pushed into one.
    pub fn merge(&self, other: &MomentAccumulator) -> Result<MomentAccumulator> {
        if self.dim != other.dim {
            return Err(CsiError::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        if other.count == 0 {
            return Ok(self.clone());
        }
        if self.count == 0 {
            return Ok(other.clone());
        }
        let na = self.count as f64;
        let nb = other.count as f64;
        let n = na + nb;
        let delta = &other.mean - &self.mean;
        let mean = &self.mean + &delta * (nb / n);
        let mut scatter = &self.scatter + &other.scatter;
        scatter.ger(na * nb / n, &delta, &delta, 1.0);
        Ok(MomentAccumulator {
            dim: self.dim,
            count: self.count + other.count,
            mean,
            scatter,
        })
    }

    pub fn finalize(&self, name: impl Into<String>) -> Result<DatasetSummary> {
        self.finalize_with(name, Denominator::Unbiased)
    }

    pub fn finalize_with(
        &self,
        name: impl Into<String>,
        denominator: Denominator,
    ) -> Result<DatasetSummary> {
        if self.count < 2 {
            return Err(CsiError::InsufficientData(format!(
                "covariance needs at least 2 rows, have {}",
                self.count
            )));
        }
        let cov = self.scatter() / denominator.divisor(self.count);
        Ok(DatasetSummary {
            name: name.into(),
            dim: self.dim,
            count: self.count,
            mean: self.mean.clone(),
            cov,
        })
    }
}

fn mirror_upper(m: &mut DMatrix<f64>) {
    for j in 0..m.ncols() {
        for i in 0..j {
            m[(j, i)] = m[(i, j)];
        }
    }
}

/// `(m + m^T) / 2`, exactly symmetric.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    // float addition commutes, so entries (i, j) and (j, i) agree bit for bit
    DMatrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
}

/// Mean vector and covariance of a dataset's feature rows.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSummary {
    pub name: String,
    pub dim: usize,
    pub count: u64,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl DatasetSummary {
    /// Builds a summary from explicit moments, symmetrizing `cov`.
    pub fn from_moments(
        name: impl Into<String>,
        count: u64,
        mean: DVector<f64>,
        cov: DMatrix<f64>,
    ) -> Result<Self> {
        let dim = mean.len();
        if cov.nrows() != dim || cov.ncols() != dim {
            return Err(CsiError::DimensionMismatch {
                expected: dim,
                found: cov.nrows(),
            });
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(CsiError::MalformedSummary("non-finite moment".into()));
        }
        Ok(Self {
            name: name.into(),
            dim,
            count,
            mean,
            cov: symmetrize(&cov),
        })
    }

    pub fn trace(&self) -> f64 {
        self.cov.trace()
    }
}

/// Which node rows of a shard feed a summary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "policy")]
pub enum NodePolicy {
    AllNodes,
    OneNodePerGraph { seed: u64 },
}

/// Summarizes the node rows of `shard` selected by `policy`.
///
/// `OneNodePerGraph` draws the node of graph `i` uniformly from the stream
/// `stream_rng(seed, 0)`, one draw per graph in shard order.
pub fn summarize_shard(
    shard: &EmbeddingShard,
    policy: NodePolicy,
    denominator: Denominator,
) -> Result<DatasetSummary> {
    if shard.is_empty() {
        return Err(CsiError::InsufficientData(format!(
            "shard {:?} has no graphs",
            shard.name
        )));
    }
    let mut acc = MomentAccumulator::new(shard.dim);
    match policy {
        NodePolicy::AllNodes => {
            for g in &shard.graphs {
                acc.accumulate_rows(g.rows(shard.dim))?;
            }
        }
        NodePolicy::OneNodePerGraph { seed } => {
            let mut rng = stream_rng(seed, 0);
            for g in &shard.graphs {
                let node = crate::rng::uniform_index(&mut rng, g.node_count);
                acc.push_row(g.row(shard.dim, node))?;
            }
        }
    }
    acc.finalize_with(shard.name.clone(), denominator)
}

/// Z-scores each column of a row-major `k x dim` matrix.
///
/// Columns with standard deviation below [`EPS_STD`] become all zeros.
pub fn standardize(rows: &[f64], dim: usize, denominator: Denominator) -> Result<Vec<f64>> {
    if dim == 0 || !rows.len().is_multiple_of(dim) {
        return Err(CsiError::DimensionMismatch {
            expected: dim,
            found: rows.len(),
        });
    }
    let k = rows.len() / dim;
    if k < 2 {
        return Err(CsiError::InsufficientData(format!(
            "standardization needs at least 2 rows, have {k}"
        )));
    }
    let mut out = rows.to_vec();
    for c in 0..dim {
        let mean = (0..k).map(|r| rows[r * dim + c]).sum::<f64>() / k as f64;
        let ss: f64 = (0..k).map(|r| (rows[r * dim + c] - mean).powi(2)).sum();
        let std = (ss / denominator.divisor(k as u64)).sqrt();
        for r in 0..k {
            let v = &mut out[r * dim + c];
            *v = if std >= EPS_STD {
                (*v - mean) / std
            } else {
                0.0
            };
        }
    }
    Ok(out)
}

/// Covariance of a row-major `k x dim` matrix through the streaming
/// accumulator.
pub fn covariance(rows: &[f64], dim: usize, denominator: Denominator) -> Result<DMatrix<f64>> {
    let mut acc = MomentAccumulator::new(dim);
    acc.accumulate(rows)?;
    Ok(acc.finalize_with("", denominator)?.cov)
}

/// Writes the binary CSM1 encoding of `summary`.
pub fn encode_summary(summary: &DatasetSummary, out: &mut impl Write) -> std::io::Result<()> {
    out.write_all(&SUMMARY_MAGIC)?;
    out.write_all(&(summary.dim as u32).to_le_bytes())?;
    out.write_all(&summary.count.to_le_bytes())?;
    let name = summary.name.as_bytes();
    out.write_all(&(name.len() as u32).to_le_bytes())?;
    out.write_all(name)?;
    for v in summary.mean.iter() {
        out.write_all(&v.to_le_bytes())?;
    }
    // row-major
    for i in 0..summary.dim {
        for j in 0..summary.dim {
            out.write_all(&summary.cov[(i, j)].to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn decode_summary(mut input: impl Read) -> Result<DatasetSummary> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| CsiError::MalformedSummary(e.to_string()))?;
    let mut pos = 0usize;
    let mut take = |n: usize, what: &str| -> Result<&[u8]> {
        let end = pos
            .checked_add(n)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| CsiError::Truncated(format!("summary {what}")))?;
        let s = &bytes[pos..end];
        pos = end;
        Ok(s)
    };
    let magic = take(4, "magic")?;
    if magic != SUMMARY_MAGIC {
        return Err(CsiError::BadMagic {
            expected: SUMMARY_MAGIC,
            found: magic.try_into().unwrap(),
        });
    }
    let dim = u32::from_le_bytes(take(4, "dim")?.try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(take(8, "count")?.try_into().unwrap());
    let name_len = u32::from_le_bytes(take(4, "name length")?.try_into().unwrap()) as usize;
    let name = std::str::from_utf8(take(name_len, "name")?)
        .map_err(|e| CsiError::MalformedSummary(format!("name is not UTF-8: {e}")))?
        .to_string();
    if dim == 0 {
        return Err(CsiError::MalformedSummary("dim must be at least 1".into()));
    }
    let mut f64s = |n: usize, what: &str| -> Result<Vec<f64>> {
        let raw = take(n.saturating_mul(8), what)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    };
    let mean = f64s(dim, "mean")?;
    let cov = f64s(dim * dim, "covariance")?;
    if pos != bytes.len() {
        return Err(CsiError::TrailingData {
            declared: pos as u64,
            actual: bytes.len() as u64,
        });
    }
    if mean.iter().chain(&cov).any(|v| !v.is_finite()) {
        return Err(CsiError::MalformedSummary("non-finite moment".into()));
    }
    Ok(DatasetSummary {
        name,
        dim,
        count,
        mean: DVector::from_vec(mean),
        cov: DMatrix::from_row_slice(dim, dim, &cov),
    })
}

pub fn write_summary(summary: &DatasetSummary, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| CsiError::io(path, e))?;
    let mut w = BufWriter::new(file);
    encode_summary(summary, &mut w).map_err(|e| CsiError::io(path, e))?;
    w.flush().map_err(|e| CsiError::io(path, e))
}

pub fn read_summary(path: impl AsRef<Path>) -> Result<DatasetSummary> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| CsiError::io(path, e))?;
    decode_summary(BufReader::new(file))
}

/// Human-readable mirror of a CSM1 summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryJson {
    pub name: String,
    pub dim: usize,
    pub count: u64,
    pub trace: f64,
    pub mean: Vec<f64>,
    /// Row-major rows.
    pub cov: Vec<Vec<f64>>,
}

impl From<&DatasetSummary> for SummaryJson {
    fn from(s: &DatasetSummary) -> Self {
        Self {
            name: s.name.clone(),
            dim: s.dim,
            count: s.count,
            trace: s.trace(),
            mean: s.mean.iter().copied().collect(),
            cov: (0..s.dim)
                .map(|i| (0..s.dim).map(|j| s.cov[(i, j)]).collect())
                .collect(),
        }
    }
}
