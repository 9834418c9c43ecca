//! Synthetic Gaussian-mixture shards for tests, benchmarks, and demos.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{CsiError, Result};
use crate::rng::{sample_indices, stream_rng};
use crate::shard::{EmbeddingShard, GraphRecord, ShardManifest};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "exponent")]
pub enum ClassSizes {
    /// Sizes differ by at most one.
    Even,
    /// Size of class `c` proportional to `1 / (c + 1)^exponent`, at least 1.
    Zipf(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub name: String,
    pub dim: usize,
    pub graphs: usize,
    pub nodes_per_graph: usize,
    pub classes: usize,
    pub class_sizes: ClassSizes,
    /// Spread of class centers.
    pub cluster_scale: f64,
    /// Spread of graph means around their class center.
    pub graph_scale: f64,
    /// Spread of node rows around their graph mean.
    pub node_scale: f64,
    /// Confine class centers and graph means to a random subspace of this
    /// dimension. Nodes then come in `mean +- v` pairs so pooling recovers
    /// the graph mean.
    pub pooled_subspace: Option<usize>,
    /// Added to every feature value.
    pub shift: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            name: "synthetic".into(),
            dim: 8,
            graphs: 100,
            nodes_per_graph: 5,
            classes: 4,
            class_sizes: ClassSizes::Even,
            cluster_scale: 1.0,
            graph_scale: 0.5,
            node_scale: 1.0,
            pooled_subspace: None,
            shift: 0.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CsiError::InvalidArgument(msg));
        if self.dim == 0 || self.nodes_per_graph == 0 || self.classes == 0 {
            return bad("dim, nodes per graph, and classes must be positive".into());
        }
        if self.graphs < self.classes {
            return bad(format!(
                "{} graphs cannot populate {} classes",
                self.graphs, self.classes
            ));
        }
        if let Some(r) = self.pooled_subspace {
            if r == 0 || r > self.dim {
                return bad(format!("pooled subspace {r} must be in 1..={}", self.dim));
            }
        }
        for (what, v) in [
            ("cluster scale", self.cluster_scale),
            ("graph scale", self.graph_scale),
            ("node scale", self.node_scale),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{what} must be finite and non-negative, got {v}"));
            }
        }
        if !self.shift.is_finite() {
            return bad("shift must be finite".into());
        }
        if let ClassSizes::Zipf(s) = self.class_sizes {
            if !(s >= 0.0 && s.is_finite()) {
                return bad(format!(
                    "zipf exponent must be finite and non-negative, got {s}"
                ));
            }
        }
        Ok(())
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        match self.class_sizes {
            ClassSizes::Even => (0..self.classes)
                .map(|c| self.graphs / self.classes + usize::from(c < self.graphs % self.classes))
                .collect(),
            ClassSizes::Zipf(s) => {
                let weights: Vec<f64> = (0..self.classes)
                    .map(|c| ((c + 1) as f64).powf(-s))
                    .collect();
                largest_remainder(&weights, self.graphs - self.classes)
                    .into_iter()
                    .map(|n| n + 1)
                    .collect()
            }
        }
    }
}

/// Splits `total` proportionally to `weights` with the largest-remainder
/// rule; ties go to the lower index.
fn largest_remainder(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut left = total - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

fn normal_vec(rng: &mut impl RngCore, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| scale * gauss(rng))
}

fn gauss(rng: &mut impl RngCore) -> f64 {
    StandardNormal.sample(rng)
}

pub fn generate(spec: &SyntheticSpec) -> Result<EmbeddingShard> {
    spec.validate()?;
    let mut rng = stream_rng(spec.seed, 0);
    let d = spec.dim;

    let mut class_of = Vec::with_capacity(spec.graphs);
    for (c, n) in spec.class_sizes().into_iter().enumerate() {
        class_of.extend(std::iter::repeat_n(c as u64, n));
    }
    let order = sample_indices(&mut rng, spec.graphs, spec.graphs);
    let class_of: Vec<u64> = order.into_iter().map(|i| class_of[i]).collect();

    let basis = spec
        .pooled_subspace
        .map(|r| DMatrix::<f64>::from_fn(d, r, |_, _| gauss(&mut rng)));
    let latent = |rng: &mut rand_chacha::ChaCha8Rng, scale: f64| match &basis {
        Some(b) => b * normal_vec(rng, b.ncols(), scale),
        None => normal_vec(rng, d, scale),
    };

    let centers: Vec<DVector<f64>> = (0..spec.classes)
        .map(|_| latent(&mut rng, spec.cluster_scale))
        .collect();

    let mut graphs = Vec::with_capacity(spec.graphs);
    for &class in &class_of {
        let mean = &centers[class as usize]
            + latent(&mut rng, spec.graph_scale)
            + DVector::from_element(d, spec.shift);
        let n = spec.nodes_per_graph;
        let mut features = Vec::with_capacity(n * d);
        if basis.is_some() {
            for _ in 0..n / 2 {
                let v = normal_vec(&mut rng, d, spec.node_scale);
                features.extend((&mean + &v).iter().map(|&x| x as f32));
                features.extend((&mean - &v).iter().map(|&x| x as f32));
            }
            if n % 2 == 1 {
                features.extend(mean.iter().map(|&x| x as f32));
            }
        } else {
            for _ in 0..n {
                let row = &mean + normal_vec(&mut rng, d, spec.node_scale);
                features.extend(row.iter().map(|&x| x as f32));
            }
        }
        graphs.push(GraphRecord::new(class, d, features)?);
    }
    EmbeddingShard::new(spec.name.clone(), d, graphs)
}

/// Manifest recording class labels and the generator settings.
pub fn manifest_for(spec: &SyntheticSpec, shard: &EmbeddingShard) -> ShardManifest {
    let mut manifest = ShardManifest::for_shard(shard);
    manifest.class_labels = (0..spec.classes as u64)
        .map(|c| (c, format!("class-{c}")))
        .collect::<BTreeMap<_, _>>();
    manifest.extractor = Some("synthetic".into());
    if let Ok(serde_json::Value::Object(map)) = serde_json::to_value(spec) {
        manifest.provenance = map.into_iter().collect();
    }
    manifest
}
