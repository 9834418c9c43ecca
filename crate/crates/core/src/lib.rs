//! Alignment metrics between molecular embedding datasets.
//!
//! Datasets arrive as binary shards of node-level feature rows
//! ([`shard`]). From these the crate builds Gaussian summaries
//! ([`stats`]), compares them with the Fréchet distance ([`frechet`]),
//! measures feature expressivity via effective rank ([`spectral`]),
//! subsamples shards by class ([`sampling`]), and ranks candidate
//! pretraining datasets against a target ([`select`]).

pub mod error;
pub mod frechet;
pub mod rng;
pub mod sampling;
pub mod select;
pub mod shard;
pub mod spectral;
pub mod stats;
pub mod synthetic;

pub use nalgebra;

pub use error::{CsiError, Result};
pub use frechet::{csi, csi_matrix, csi_with, sqrt_psd, CsiMatrix, CsiOptions, CsiValue};
pub use sampling::{
    build_class_index, coverage_report, sample_balanced, sample_uniform, ClassIndex, Coverage,
    Strategy,
};
pub use select::{
    budget_ratio, make_budget, plan_samples, rank_upstreams, AlignmentReport, BudgetSpec,
};
pub use shard::{
    concat_shards, read_shard, write_shard, EmbeddingShard, GraphRecord, ShardManifest,
};
pub use spectral::{
    bootstrap_erank, effective_rank, paired_erank_study, pool_graph, ErankReport, Level,
    PairedErank,
};
pub use stats::{
    read_summary, standardize, summarize_shard, write_summary, DatasetSummary, Denominator,
    MomentAccumulator, NodePolicy,
};
