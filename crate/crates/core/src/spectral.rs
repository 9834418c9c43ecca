//! Effective rank of covariance spectra and the node- vs graph-level
//! bootstrap comparison.
//!
//! The effective rank of a PSD matrix with eigenvalues `lambda_j` is
//! `exp(H)`, where `H = -sum p_j ln p_j` and `p_j = lambda_j / sum lambda`.
//! Terms with `p_j = 0` contribute nothing.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CsiError, Result};
use crate::frechet::checked_symmetric;
use crate::rng::{sample_indices, stream_rng, uniform_index};
use crate::shard::EmbeddingShard;
use crate::stats::{covariance, standardize, Denominator};

pub const DEFAULT_KS: [usize; 3] = [5_000, 10_000, 15_000];
pub const DEFAULT_REPEATS: usize = 10;

/// Effective rank of a symmetric PSD matrix.
pub fn effective_rank(cov: &DMatrix<f64>) -> Result<f64> {
    let cov = checked_symmetric(cov)?;
    effective_rank_of_spectrum(cov.symmetric_eigenvalues().as_slice())
}

/// Effective rank from eigenvalues directly. Negative values are clamped
/// to zero.
pub fn effective_rank_of_spectrum(eigenvalues: &[f64]) -> Result<f64> {
    let clamped: Vec<f64> = eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    if total.is_nan() || total <= 0.0 || !total.is_finite() {
        return Err(CsiError::DegenerateSpectrum(total));
    }
    // exp(H) = T * exp(-sum p_j ln lambda_j), since H = ln T - sum p_j ln lambda_j
    let log_mean: f64 = clamped
        .iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| (l / total) * l.ln())
        .sum();
    let rank = total * (-log_mean).exp();
    Ok(rank.clamp(1.0, clamped.len() as f64))
}

/// Column-wise mean of a row-major `n x dim` block.
pub fn pool_graph(features: &[f32], dim: usize) -> Result<Vec<f64>> {
    if dim == 0 || features.is_empty() || !features.len().is_multiple_of(dim) {
        return Err(CsiError::InsufficientData(format!(
            "cannot pool {} values into rows of width {dim}",
            features.len()
        )));
    }
    let n = features.len() / dim;
    let mut out = vec![0.0f64; dim];
    for row in features.chunks_exact(dim) {
        for (o, &v) in out.iter_mut().zip(row) {
            *o += v as f64;
        }
    }
    for o in &mut out {
        *o /= n as f64;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Node,
    Graph,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Node => "node",
            Level::Graph => "graph",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErankReport {
    pub level: Level,
    pub k: usize,
    pub repeats: usize,
    pub per_repeat: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation across repeats; 0 for a single repeat.
    pub std: f64,
    pub seed: u64,
}

impl ErankReport {
    fn from_values(level: Level, k: usize, seed: u64, per_repeat: Vec<f64>) -> Self {
        let (mean, std) = mean_std(&per_repeat);
        Self {
            level,
            k,
            repeats: per_repeat.len(),
            per_repeat,
            mean,
            std,
            seed,
        }
    }
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// The graphs and nodes drawn for one bootstrap repeat.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepeatDraw {
    /// Sampled graph indices, in draw order.
    pub graphs: Vec<usize>,
    /// For each sampled graph, the node used by the node-level matrix.
    pub nodes: Vec<usize>,
}

/// Draws repeat `repeat` from the stream `stream_rng(seed, repeat)`: `k`
/// graphs without replacement, then one node per sampled graph. Both levels
/// share this draw, which is what makes the comparison paired.
pub fn draw_repeat(shard: &EmbeddingShard, k: usize, seed: u64, repeat: usize) -> RepeatDraw {
    let mut rng = stream_rng(seed, repeat as u64);
    draw_with(shard, k, &mut rng)
}

fn draw_with(shard: &EmbeddingShard, k: usize, rng: &mut impl RngCore) -> RepeatDraw {
    let graphs = sample_indices(rng, shard.graph_count(), k);
    let nodes = graphs
        .iter()
        .map(|&g| uniform_index(rng, shard.graphs[g].node_count))
        .collect();
    RepeatDraw { graphs, nodes }
}

fn level_matrix(shard: &EmbeddingShard, draw: &RepeatDraw, level: Level) -> Result<Vec<f64>> {
    let dim = shard.dim;
    let mut rows = Vec::with_capacity(draw.graphs.len() * dim);
    for (&g, &node) in draw.graphs.iter().zip(&draw.nodes) {
        let graph = &shard.graphs[g];
        match level {
            Level::Graph => rows.extend(pool_graph(&graph.features, dim)?),
            Level::Node => rows.extend(graph.row(dim, node).iter().map(|&v| v as f64)),
        }
    }
    Ok(rows)
}

/// Effective rank of the standardized `k x dim` matrix built from `draw`.
pub fn repeat_erank(shard: &EmbeddingShard, draw: &RepeatDraw, level: Level) -> Result<f64> {
    let rows = level_matrix(shard, draw, level)?;
    let z = standardize(&rows, shard.dim, Denominator::Unbiased)?;
    effective_rank(&covariance(&z, shard.dim, Denominator::Unbiased)?)
}

fn check_bootstrap_args(shard: &EmbeddingShard, k: usize, repeats: usize) -> Result<()> {
    if k < 2 {
        return Err(CsiError::InvalidArgument(format!(
            "k must be at least 2, got {k}"
        )));
    }
    if k > shard.graph_count() {
        return Err(CsiError::InvalidArgument(format!(
            "k = {k} exceeds the {} graphs in {:?}",
            shard.graph_count(),
            shard.name
        )));
    }
    if repeats == 0 {
        return Err(CsiError::InvalidArgument(
            "repeats must be at least 1".into(),
        ));
    }
    Ok(())
}

/// Bootstrap effective rank at one level: per repeat, sample `k` graphs,
/// build the pooled (graph) or one-random-node (node) matrix, standardize
/// each column, and take the effective rank of its covariance.
pub fn bootstrap_erank(
    shard: &EmbeddingShard,
    level: Level,
    k: usize,
    repeats: usize,
    seed: u64,
) -> Result<ErankReport> {
    check_bootstrap_args(shard, k, repeats)?;
    let values = (0..repeats)
        .into_par_iter()
        .map(|r| repeat_erank(shard, &draw_repeat(shard, k, seed, r), level))
        .collect::<Result<Vec<_>>>()?;
    Ok(ErankReport::from_values(level, k, seed, values))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedErank {
    pub k: usize,
    pub node: ErankReport,
    pub graph: ErankReport,
}

/// Node- and graph-level bootstrap for each `k`, with both levels computed
/// from the same draw in every repeat.
pub fn paired_erank_study(
    shard: &EmbeddingShard,
    ks: &[usize],
    repeats: usize,
    seed: u64,
) -> Result<Vec<PairedErank>> {
    for &k in ks {
        check_bootstrap_args(shard, k, repeats)?;
    }
    ks.iter()
        .map(|&k| {
            let pairs = (0..repeats)
                .into_par_iter()
                .map(|r| {
                    let draw = draw_repeat(shard, k, seed, r);
                    Ok((
                        repeat_erank(shard, &draw, Level::Node)?,
                        repeat_erank(shard, &draw, Level::Graph)?,
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            let (node, graph): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            Ok(PairedErank {
                k,
                node: ErankReport::from_values(Level::Node, k, seed, node),
                graph: ErankReport::from_values(Level::Graph, k, seed, graph),
            })
        })
        .collect()
}

/// Per-repeat CSV: `k,level,repeat,erank,seed`.
pub fn write_study_csv(study: &[PairedErank], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "level", "repeat", "erank", "seed"])?;
    for pair in study {
        for report in [&pair.node, &pair.graph] {
            for (r, v) in report.per_repeat.iter().enumerate() {
                w.write_record([
                    report.k.to_string(),
                    report.level.as_str().to_string(),
                    r.to_string(),
                    format!("{v:.10}"),
                    report.seed.to_string(),
                ])?;
            }
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Summary CSV: `k,level,mean,std,seed`.
pub fn write_study_summary_csv(study: &[PairedErank], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "level", "mean", "std", "seed"])?;
    for pair in study {
        for report in [&pair.node, &pair.graph] {
            w.write_record([
                report.k.to_string(),
                report.level.as_str().to_string(),
                format!("{:.10}", report.mean),
                format!("{:.10}", report.std),
                report.seed.to_string(),
            ])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn save_study_csvs(
    study: &[PairedErank],
    per_repeat: impl AsRef<Path>,
    summary: impl AsRef<Path>,
) -> Result<()> {
    let p = per_repeat.as_ref();
    write_study_csv(study, File::create(p).map_err(|e| CsiError::io(p, e))?)?;
    let s = summary.as_ref();
    write_study_summary_csv(study, File::create(s).map_err(|e| CsiError::io(s, e))?)
}
