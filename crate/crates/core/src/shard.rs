//! Binary embedding shards.
//!
//! A shard stores the node-level feature rows of a collection of graphs.
//! All integers and floats are little-endian:
//!
//! ```text
//! magic "CSI1" (4 bytes)
//! u32 dim
//! u64 graph_count
//! per graph: u32 node_count, u64 class_id, node_count * dim f32 (row-major)
//! ```
//!
//! The file size is therefore exactly `16 + sum_i (12 + 4 * n_i * dim)`.
//! A UTF-8 JSON manifest is written next to the shard as
//! `<path>.manifest.json`.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CsiError, Result};

pub const SHARD_MAGIC: [u8; 4] = *b"CSI1";
pub const SHARD_HEADER_BYTES: u64 = 16;
pub const GRAPH_HEADER_BYTES: u64 = 12;

/// One graph: `node_count` rows of `dim` features, plus an opaque class key.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphRecord {
    pub class_id: u64,
    pub node_count: usize,
    /// Row-major, `node_count * dim` values.
    pub features: Vec<f32>,
}

impl GraphRecord {
    pub fn new(class_id: u64, dim: usize, features: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(CsiError::InvalidShard("dim must be at least 1".into()));
        }
        if features.is_empty() || !features.len().is_multiple_of(dim) {
            return Err(CsiError::InvalidShard(format!(
                "feature block of {} values is not a positive multiple of dim {dim}",
                features.len()
            )));
        }
        Ok(Self {
            class_id,
            node_count: features.len() / dim,
            features,
        })
    }

    pub fn row(&self, dim: usize, node: usize) -> &[f32] {
        &self.features[node * dim..(node + 1) * dim]
    }

    pub fn rows(&self, dim: usize) -> impl Iterator<Item = &[f32]> {
        self.features.chunks_exact(dim)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingShard {
    pub name: String,
    pub dim: usize,
    pub graphs: Vec<GraphRecord>,
}

impl EmbeddingShard {
    pub fn new(name: impl Into<String>, dim: usize, graphs: Vec<GraphRecord>) -> Result<Self> {
        let shard = Self {
            name: name.into(),
            dim,
            graphs,
        };
        shard.validate()?;
        Ok(shard)
    }

    pub fn graph_count(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn total_nodes(&self) -> usize {
        self.graphs.iter().map(|g| g.node_count).sum()
    }

    /// Exact on-disk size of this shard.
    pub fn encoded_len(&self) -> u64 {
        SHARD_HEADER_BYTES
            + self
                .graphs
                .iter()
                .map(|g| GRAPH_HEADER_BYTES + 4 * (g.node_count * self.dim) as u64)
                .sum::<u64>()
    }

    /// Checks every structural invariant: positive dim, non-empty graphs with
    /// consistent block sizes, finite payload.
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(CsiError::InvalidShard("dim must be at least 1".into()));
        }
        if self.dim > u32::MAX as usize {
            return Err(CsiError::InvalidShard(format!(
                "dim {} exceeds u32",
                self.dim
            )));
        }
        for (i, g) in self.graphs.iter().enumerate() {
            if g.node_count == 0 {
                return Err(CsiError::InvalidShard(format!("graph {i} has no nodes")));
            }
            if g.node_count > u32::MAX as usize {
                return Err(CsiError::InvalidShard(format!(
                    "graph {i} node count {} exceeds u32",
                    g.node_count
                )));
            }
            if g.features.len() != g.node_count * self.dim {
                return Err(CsiError::InvalidShard(format!(
                    "graph {i} declares {} nodes of dim {} but holds {} values",
                    g.node_count,
                    self.dim,
                    g.features.len()
                )));
            }
            if let Some(offset) = g.features.iter().position(|v| !v.is_finite()) {
                return Err(CsiError::NonFinite { graph: i, offset });
            }
        }
        Ok(())
    }

    /// Returns a new shard holding the graphs at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> EmbeddingShard {
        EmbeddingShard {
            name: self.name.clone(),
            dim: self.dim,
            graphs: indices.iter().map(|&i| self.graphs[i].clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ShardManifest {
    pub dataset: String,
    pub dim: usize,
    pub graph_count: usize,
    pub total_nodes: usize,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub class_labels: BTreeMap<u64, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extractor: Option<String>,
    /// Free-form provenance (seeds, generator flags, source shard).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub provenance: BTreeMap<String, serde_json::Value>,
}

impl ShardManifest {
    pub fn for_shard(shard: &EmbeddingShard) -> Self {
        Self {
            dataset: shard.name.clone(),
            dim: shard.dim,
            graph_count: shard.graph_count(),
            total_nodes: shard.total_nodes(),
            ..Default::default()
        }
    }

    /// Checks that the manifest's counts agree with `shard`.
    pub fn check_against(&self, shard: &EmbeddingShard) -> Result<()> {
        if self.dim != shard.dim
            || self.graph_count != shard.graph_count()
            || self.total_nodes != shard.total_nodes()
        {
            return Err(CsiError::InvalidShard(format!(
                "manifest (dim={}, graphs={}, nodes={}) disagrees with shard (dim={}, graphs={}, nodes={})",
                self.dim,
                self.graph_count,
                self.total_nodes,
                shard.dim,
                shard.graph_count(),
                shard.total_nodes()
            )));
        }
        Ok(())
    }
}

pub fn manifest_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Encodes `shard` into its binary representation.
pub fn encode_shard(shard: &EmbeddingShard, out: &mut impl Write) -> std::io::Result<()> {
    out.write_all(&SHARD_MAGIC)?;
    out.write_all(&(shard.dim as u32).to_le_bytes())?;
    out.write_all(&(shard.graphs.len() as u64).to_le_bytes())?;
    for g in &shard.graphs {
        out.write_all(&(g.node_count as u32).to_le_bytes())?;
        out.write_all(&g.class_id.to_le_bytes())?;
        for v in &g.features {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn write_shard(shard: &EmbeddingShard, path: impl AsRef<Path>) -> Result<()> {
    write_shard_with_manifest(shard, path, &ShardManifest::for_shard(shard))
}

/// Writes the binary shard and `manifest` (whose counts are refreshed from
/// the shard) to `<path>.manifest.json`.
pub fn write_shard_with_manifest(
    shard: &EmbeddingShard,
    path: impl AsRef<Path>,
    manifest: &ShardManifest,
) -> Result<()> {
    let path = path.as_ref();
    shard.validate()?;

    let file = File::create(path).map_err(|e| CsiError::io(path, e))?;
    let mut w = BufWriter::new(file);
    encode_shard(shard, &mut w).map_err(|e| CsiError::io(path, e))?;
    w.flush().map_err(|e| CsiError::io(path, e))?;

    let manifest = ShardManifest {
        dataset: shard.name.clone(),
        dim: shard.dim,
        graph_count: shard.graph_count(),
        total_nodes: shard.total_nodes(),
        ..manifest.clone()
    };
    let mpath = manifest_path(path);
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(&mpath, json + "\n").map_err(|e| CsiError::io(&mpath, e))?;
    Ok(())
}

struct CountingReader<R> {
    inner: R,
    consumed: u64,
}

impl<R: Read> CountingReader<R> {
    fn take<const N: usize>(&mut self, what: impl FnOnce() -> String) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.fill(&mut buf, what)?;
        Ok(buf)
    }

    fn fill(&mut self, buf: &mut [u8], what: impl FnOnce() -> String) -> Result<()> {
        let mut filled = 0;
        while filled < buf.len() {
            match self.inner.read(&mut buf[filled..]) {
                Ok(0) => {
                    return Err(CsiError::Truncated(format!(
                        "{} (file ends after {} bytes)",
                        what(),
                        self.consumed + filled as u64
                    )))
                }
                Ok(n) => filled += n,
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                Err(e) => return Err(CsiError::Truncated(format!("{}: {e}", what()))),
            }
        }
        self.consumed += buf.len() as u64;
        Ok(())
    }
}

/// Decodes a shard from `input`. `name` is used as the dataset name.
/// `total_len`, when known, lets the decoder reject declared counts that
/// cannot fit before reading payloads.
pub fn decode_shard(
    input: impl Read,
    name: &str,
    total_len: Option<u64>,
) -> Result<EmbeddingShard> {
    let mut r = CountingReader {
        inner: input,
        consumed: 0,
    };
    let magic = r.take::<4>(|| "header magic".into())?;
    if magic != SHARD_MAGIC {
        return Err(CsiError::BadMagic {
            expected: SHARD_MAGIC,
            found: magic,
        });
    }
    let dim = u32::from_le_bytes(r.take(|| "header dim".into())?) as usize;
    if dim == 0 {
        return Err(CsiError::InvalidShard("dim must be at least 1".into()));
    }
    let graph_count = u64::from_le_bytes(r.take(|| "header graph count".into())?);
    if let Some(len) = total_len {
        let min = SHARD_HEADER_BYTES.saturating_add(graph_count.saturating_mul(GRAPH_HEADER_BYTES));
        if min > len {
            return Err(CsiError::Truncated(format!(
                "header declares {graph_count} graphs, needing at least {min} bytes, file has {len}"
            )));
        }
    }

    let mut graphs = Vec::with_capacity(graph_count.min(1 << 20) as usize);
    let mut bytes = Vec::new();
    for gi in 0..graph_count as usize {
        let node_count = u32::from_le_bytes(r.take(|| format!("graph {gi} node count"))?) as usize;
        let class_id = u64::from_le_bytes(r.take(|| format!("graph {gi} class id"))?);
        if node_count == 0 {
            return Err(CsiError::InvalidShard(format!("graph {gi} has no nodes")));
        }
        let values = node_count * dim;
        if let Some(len) = total_len {
            if r.consumed + 4 * values as u64 > len {
                return Err(CsiError::Truncated(format!(
                    "graph {gi} declares {node_count} nodes but the file ends first"
                )));
            }
        }
        bytes.resize(4 * values, 0);
        r.fill(&mut bytes, || format!("graph {gi} features"))?;
        let mut features = Vec::with_capacity(values);
        for (offset, chunk) in bytes.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(chunk.try_into().unwrap());
            if !v.is_finite() {
                return Err(CsiError::NonFinite { graph: gi, offset });
            }
            features.push(v);
        }
        graphs.push(GraphRecord {
            class_id,
            node_count,
            features,
        });
    }

    let mut probe = [0u8; 1];
    loop {
        match r.inner.read(&mut probe) {
            Ok(0) => break,
            Ok(_) => {
                return Err(CsiError::TrailingData {
                    declared: r.consumed,
                    actual: total_len.unwrap_or(r.consumed + 1),
                })
            }
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(CsiError::Truncated(e.to_string())),
        }
    }

    Ok(EmbeddingShard {
        name: name.to_string(),
        dim,
        graphs,
    })
}

/// Reads a shard. The dataset name comes from the companion manifest when
/// present, otherwise from the file stem.
pub fn read_shard(path: impl AsRef<Path>) -> Result<EmbeddingShard> {
    let path = path.as_ref();
    let manifest = read_manifest(path)?;
    let file = File::open(path).map_err(|e| CsiError::io(path, e))?;
    let len = file.metadata().map_err(|e| CsiError::io(path, e))?.len();
    let name = match &manifest {
        Some(m) => m.dataset.clone(),
        None => path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
    };
    let shard = decode_shard(BufReader::new(file), &name, Some(len))?;
    if let Some(m) = &manifest {
        m.check_against(&shard)?;
    }
    Ok(shard)
}

/// Reads `<path>.manifest.json` if it exists.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Option<ShardManifest>> {
    let mpath = manifest_path(path.as_ref());
    match fs::read_to_string(&mpath) {
        Ok(text) => Ok(Some(serde_json::from_str(&text)?)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(CsiError::io(&mpath, e)),
    }
}

/// Concatenates shards in order. The result is named by joining the input
/// names with `+`.
pub fn concat_shards(shards: &[EmbeddingShard]) -> Result<EmbeddingShard> {
    let first = shards
        .first()
        .ok_or_else(|| CsiError::InvalidArgument("no shards to concatenate".into()))?;
    if let Some(bad) = shards.iter().find(|s| s.dim != first.dim) {
        return Err(CsiError::DimensionMismatch {
            expected: first.dim,
            found: bad.dim,
        });
    }
    Ok(EmbeddingShard {
        name: shards
            .iter()
            .map(|s| s.name.as_str())
            .collect::<Vec<_>>()
            .join("+"),
        dim: first.dim,
        graphs: shards
            .iter()
            .flat_map(|s| s.graphs.iter().cloned())
            .collect(),
    })
}
