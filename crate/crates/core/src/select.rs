//! Upstream ranking and the pretraining budget model.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CsiError, Result};
use crate::frechet::{format_significant, CsiOptions, CsiValue, PreparedSummary};
use crate::stats::DatasetSummary;

/// Total samples processed in pretraining: `epochs * samples`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetSpec {
    pub epochs: u64,
    pub samples: u64,
    pub budget: u64,
}

pub fn make_budget(epochs: u64, samples: u64) -> Result<BudgetSpec> {
    if epochs == 0 || samples == 0 {
        return Err(CsiError::InvalidArgument(format!(
            "epochs and samples must be positive (got {epochs}, {samples})"
        )));
    }
    let budget = epochs.checked_mul(samples).ok_or_else(|| {
        CsiError::InvalidArgument(format!("budget {epochs} x {samples} overflows u64"))
    })?;
    Ok(BudgetSpec {
        epochs,
        samples,
        budget,
    })
}

/// Unique samples affordable at `epochs` passes within `budget`.
pub fn plan_samples(budget: u64, epochs: u64) -> Result<u64> {
    if epochs == 0 || budget == 0 {
        return Err(CsiError::InvalidArgument(format!(
            "budget and epochs must be positive (got {budget}, {epochs})"
        )));
    }
    if !budget.is_multiple_of(epochs) {
        return Err(CsiError::InvalidArgument(format!(
            "budget {budget} is not divisible by {epochs} epochs"
        )));
    }
    Ok(budget / epochs)
}

pub fn budget_ratio(a: &BudgetSpec, b: &BudgetSpec) -> Result<f64> {
    if b.budget == 0 {
        return Err(CsiError::InvalidArgument("reference budget is zero".into()));
    }
    Ok(a.budget as f64 / b.budget as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedUpstream {
    pub name: String,
    pub value: f64,
    pub mean_term: f64,
    pub trace_term: f64,
}

impl RankedUpstream {
    fn new(name: String, v: &CsiValue) -> Self {
        Self {
            name,
            value: v.value,
            mean_term: v.mean_term,
            trace_term: v.trace_term,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub downstream: String,
    /// Ascending by distance; ties keep input order.
    pub ranked: Vec<RankedUpstream>,
    pub selected: String,
    pub budget: Option<BudgetSpec>,
}

pub fn rank_upstreams(
    upstream: &[DatasetSummary],
    downstream: &DatasetSummary,
    options: &CsiOptions,
) -> Result<AlignmentReport> {
    if upstream.is_empty() {
        return Err(CsiError::InvalidArgument(
            "no upstream datasets to rank".into(),
        ));
    }
    if let Some(bad) = upstream.iter().find(|u| u.dim != downstream.dim) {
        return Err(CsiError::DimensionMismatch {
            expected: downstream.dim,
            found: bad.dim,
        });
    }
    let down = PreparedSummary::new(downstream, options)?;
    let values = upstream
        .par_iter()
        .map(|u| PreparedSummary::new(u, options)?.distance(&down))
        .collect::<Result<Vec<_>>>()?;
    Ok(rank_values(
        &downstream.name,
        upstream.iter().map(|u| u.name.clone()).zip(values),
    ))
}

/// Sorts precomputed `(name, value)` pairs into a report.
pub fn rank_values(
    downstream: &str,
    values: impl IntoIterator<Item = (String, CsiValue)>,
) -> AlignmentReport {
    let mut ranked: Vec<RankedUpstream> = values
        .into_iter()
        .map(|(name, v)| RankedUpstream::new(name, &v))
        .collect();
    // stable: equal values keep input order
    ranked.sort_by(|a, b| a.value.total_cmp(&b.value));
    AlignmentReport {
        downstream: downstream.to_string(),
        selected: ranked.first().map(|r| r.name.clone()).unwrap_or_default(),
        ranked,
        budget: None,
    }
}

impl AlignmentReport {
    pub fn with_budget(mut self, budget: BudgetSpec) -> Self {
        self.budget = Some(budget);
        self
    }

    pub fn to_table(&self) -> String {
        let width = self
            .ranked
            .iter()
            .map(|r| r.name.len())
            .max()
            .unwrap_or(0)
            .max("upstream".len());
        let mut out = String::new();
        let _ = writeln!(out, "downstream: {}", self.downstream);
        let _ = writeln!(
            out,
            "{:>4}  {:<width$}  {:>14}  {:>14}  {:>14}",
            "rank", "upstream", "csi", "mean_term", "trace_term"
        );
        for (i, r) in self.ranked.iter().enumerate() {
            let _ = writeln!(
                out,
                "{:>4}  {:<width$}  {:>14}  {:>14}  {:>14}",
                i + 1,
                r.name,
                format_significant(r.value, 6),
                format_significant(r.mean_term, 6),
                format_significant(r.trace_term, 6)
            );
        }
        let _ = writeln!(out, "selected: {}", self.selected);
        if let Some(b) = &self.budget {
            let _ = writeln!(
                out,
                "budget: C = {} ({} epochs x {} samples)",
                b.budget, b.epochs, b.samples
            );
        }
        out
    }
}
