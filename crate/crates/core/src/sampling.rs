//! Class-balanced and uniform graph subsampling.
//!
//! Balanced sampling treats each class id as a bin. Every bin gets the base
//! quota `floor(total / class_count)`, capped at its size. The shortfall
//! from small bins plus the division remainder is then handed out one
//! graph at a time, cycling through bins with spare capacity in ascending
//! class-id order. Within a bin, graphs are drawn without replacement from
//! the stream `stream_rng(seed, class_id)`. Output graphs keep their
//! original relative order.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CsiError, Result};
use crate::rng::{sample_indices, stream_rng};
use crate::shard::EmbeddingShard;

pub const DEFAULT_TOTAL: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    #[default]
    Balanced,
    Uniform,
}

/// Graph indices grouped by class id, each bin in shard order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassIndex {
    pub bins: BTreeMap<u64, Vec<usize>>,
}

impl ClassIndex {
    pub fn class_count(&self) -> usize {
        self.bins.len()
    }

    pub fn graph_count(&self) -> usize {
        self.bins.values().map(Vec::len).sum()
    }
}

pub fn build_class_index(shard: &EmbeddingShard) -> Result<ClassIndex> {
    if shard.is_empty() {
        return Err(CsiError::InsufficientData(format!(
            "shard {:?} has no graphs",
            shard.name
        )));
    }
    let mut bins: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, g) in shard.graphs.iter().enumerate() {
        bins.entry(g.class_id).or_default().push(i);
    }
    Ok(ClassIndex { bins })
}

/// Per-bin sample sizes for `total` graphs, keyed by class id.
pub fn balanced_quotas(index: &ClassIndex, total: usize) -> Result<BTreeMap<u64, usize>> {
    let available = index.graph_count();
    if total > available {
        return Err(CsiError::InvalidArgument(format!(
            "cannot sample {total} graphs from {available}"
        )));
    }
    let classes = index.class_count();
    if classes == 0 {
        return Ok(BTreeMap::new());
    }
    let base = total / classes;
    let mut quotas: BTreeMap<u64, usize> = index
        .bins
        .iter()
        .map(|(&c, members)| (c, base.min(members.len())))
        .collect();
    let mut remaining = total - quotas.values().sum::<usize>();
    while remaining > 0 {
        let mut progressed = false;
        for (c, members) in &index.bins {
            if remaining == 0 {
                break;
            }
            let q = quotas.get_mut(c).unwrap();
            if *q < members.len() {
                *q += 1;
                remaining -= 1;
                progressed = true;
            }
        }
        // total <= available guarantees spare capacity while remaining > 0
        debug_assert!(progressed);
    }
    Ok(quotas)
}

/// Sorted graph indices chosen by class-balanced sampling.
pub fn balanced_indices(index: &ClassIndex, total: usize, seed: u64) -> Result<Vec<usize>> {
    if total == 0 {
        return Err(CsiError::InvalidArgument("total must be at least 1".into()));
    }
    let quotas = balanced_quotas(index, total)?;
    let mut picked = Vec::with_capacity(total);
    for (class, members) in &index.bins {
        let mut rng = stream_rng(seed, *class);
        let q = quotas[class];
        picked.extend(
            sample_indices(&mut rng, members.len(), q)
                .into_iter()
                .map(|i| members[i]),
        );
    }
    picked.sort_unstable();
    Ok(picked)
}

pub fn sample_balanced(
    shard: &EmbeddingShard,
    index: &ClassIndex,
    total: usize,
    seed: u64,
) -> Result<EmbeddingShard> {
    if shard.is_empty() {
        return Err(CsiError::InsufficientData(format!(
            "shard {:?} has no graphs",
            shard.name
        )));
    }
    if index.graph_count() != shard.graph_count() {
        return Err(CsiError::InvalidArgument(format!(
            "class index covers {} graphs but the shard has {}",
            index.graph_count(),
            shard.graph_count()
        )));
    }
    Ok(shard.subset(&balanced_indices(index, total, seed)?))
}

/// Sorted graph indices of a uniform sample without replacement, drawn
/// from `stream_rng(seed, 0)`.
pub fn uniform_indices(graph_count: usize, total: usize, seed: u64) -> Result<Vec<usize>> {
    if total == 0 || total > graph_count {
        return Err(CsiError::InvalidArgument(format!(
            "cannot sample {total} graphs from {graph_count}"
        )));
    }
    let mut picked = sample_indices(&mut stream_rng(seed, 0), graph_count, total);
    picked.sort_unstable();
    Ok(picked)
}

pub fn sample_uniform(shard: &EmbeddingShard, total: usize, seed: u64) -> Result<EmbeddingShard> {
    Ok(shard.subset(&uniform_indices(shard.graph_count(), total, seed)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coverage {
    pub sampled: usize,
    pub original: usize,
}

/// Per-class `(sampled, original)` counts. Classes missing from the sample
/// report zero.
pub fn coverage_report(original: &ClassIndex, sample: &EmbeddingShard) -> BTreeMap<u64, Coverage> {
    let mut report: BTreeMap<u64, Coverage> = original
        .bins
        .iter()
        .map(|(&c, members)| {
            (
                c,
                Coverage {
                    sampled: 0,
                    original: members.len(),
                },
            )
        })
        .collect();
    for g in &sample.graphs {
        report
            .entry(g.class_id)
            .or_insert(Coverage {
                sampled: 0,
                original: 0,
            })
            .sampled += 1;
    }
    report
}

pub fn covered_classes(report: &BTreeMap<u64, Coverage>) -> usize {
    report.values().filter(|c| c.sampled > 0).count()
}

/// CSV with columns `class_id,label,sampled,original,seed`; labels come
/// from `labels` when present.
pub fn write_coverage_csv(
    report: &BTreeMap<u64, Coverage>,
    labels: &BTreeMap<u64, String>,
    seed: u64,
    out: impl Write,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["class_id", "label", "sampled", "original", "seed"])?;
    for (class, cov) in report {
        w.write_record([
            class.to_string(),
            labels.get(class).cloned().unwrap_or_default(),
            cov.sampled.to_string(),
            cov.original.to_string(),
            seed.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn save_coverage_csv(
    report: &BTreeMap<u64, Coverage>,
    labels: &BTreeMap<u64, String>,
    seed: u64,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| CsiError::io(path, e))?;
    write_coverage_csv(report, labels, seed, file)
}
