//! Weight container: a JSON manifest describing block topology and tensor
//! placement, plus a raw blob of little-endian `f32` values.
//!
//! ```json
//! {
//!   "format": "wirewatch-blocks", "version": 1, "dtype": "f32", "blob": "blocks.bin",
//!   "blocks": [{
//!     "name": "aspp", "kind": "ascspp",
//!     "in_channels": 8, "branch_channels": 4, "strip_length": 3, "rates": [1, 6, 12, 18],
//!     "tensors": [{ "name": "pointwise.weight", "shape": [4, 8, 1, 1], "offset": 0, "length": 32 }]
//!   }]
//! }
//! ```

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    asconv_forward, AscsppParams, AsconvParams, ChannelAttention, Conv2d, FeatureMap, StripKernel,
};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const FORMAT: &str = "wirewatch-blocks";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset into the blob.
    pub offset: u64,
    /// Element count.
    pub length: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Topology {
    ChannelAttention {
        channels: usize,
    },
    Asconv {
        in_channels: usize,
        out_channels: usize,
        strip_length: usize,
        dilations: Vec<usize>,
    },
    Ascspp {
        in_channels: usize,
        branch_channels: usize,
        strip_length: usize,
        rates: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockEntry {
    pub name: String,
    #[serde(flatten)]
    pub topology: Topology,
    pub tensors: Vec<TensorEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightManifest {
    pub format: String,
    pub version: u32,
    pub dtype: String,
    pub blob: String,
    pub blocks: Vec<BlockEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Block<T> {
    ChannelAttention(ChannelAttention<T>),
    Asconv(AsconvParams<T>),
    Ascspp(AscsppParams<T>),
}

type Visitor<'a, T> = dyn FnMut(String, Vec<usize>, &mut Vec<T>) -> Result<()> + 'a;

fn visit_conv<T>(prefix: &str, c: &mut Conv2d<T>, f: &mut Visitor<'_, T>) -> Result<()> {
    let shape = vec![c.out_channels, c.in_channels, c.kernel.0, c.kernel.1];
    f(format!("{prefix}.weight"), shape, &mut c.weights)?;
    f(format!("{prefix}.bias"), vec![c.out_channels], &mut c.bias)
}

fn visit_strip<T>(prefix: &str, s: &mut StripKernel<T>, f: &mut Visitor<'_, T>) -> Result<()> {
    let shape = vec![s.out_channels, s.in_channels, s.length];
    f(format!("{prefix}.weight"), shape, &mut s.weights)?;
    f(format!("{prefix}.bias"), vec![s.out_channels], &mut s.bias)
}

fn visit_asconv<T>(prefix: &str, p: &mut AsconvParams<T>, f: &mut Visitor<'_, T>) -> Result<()> {
    for (i, b) in p.branches.iter_mut().enumerate() {
        visit_strip(&format!("{prefix}branch{i}.vertical"), &mut b.vertical, f)?;
        visit_strip(&format!("{prefix}branch{i}.horizontal"), &mut b.horizontal, f)?;
    }
    visit_conv(&format!("{prefix}projection"), &mut p.projection, f)
}

impl<T: Real> Block<T> {
    /// Zero-initialised block with the given topology.
    pub fn zeros(topology: &Topology) -> Self {
        match topology {
            Topology::ChannelAttention { channels } => Block::ChannelAttention(ChannelAttention::zeros(*channels)),
            Topology::Asconv {
                in_channels,
                out_channels,
                strip_length,
                dilations,
            } => Block::Asconv(AsconvParams::zeros(*in_channels, *out_channels, *strip_length, dilations)),
            Topology::Ascspp {
                in_channels,
                branch_channels,
                strip_length,
                rates,
            } => Block::Ascspp(AscsppParams::zeros(*in_channels, *branch_channels, *strip_length, rates)),
        }
    }

    pub fn topology(&self) -> Topology {
        match self {
            Block::ChannelAttention(a) => Topology::ChannelAttention { channels: a.channels() },
            Block::Asconv(p) => Topology::Asconv {
                in_channels: p.in_channels(),
                out_channels: p.out_channels(),
                strip_length: p.branches.first().map_or(1, |b| b.vertical.length),
                dilations: p.branches.iter().map(|b| b.dilation()).collect(),
            },
            Block::Ascspp(p) => Topology::Ascspp {
                in_channels: p.in_channels(),
                branch_channels: p.pointwise.out_channels,
                strip_length: p
                    .branches
                    .first()
                    .and_then(|b| b.branches.first())
                    .map_or(1, |b| b.vertical.length),
                rates: p
                    .branches
                    .iter()
                    .map(|b| b.branches.first().map_or(1, |x| x.dilation()))
                    .collect(),
            },
        }
    }

    pub fn forward(&self, x: &FeatureMap<T>) -> Result<FeatureMap<T>> {
        match self {
            Block::ChannelAttention(a) => a.forward(x),
            Block::Asconv(p) => asconv_forward(x, p),
            Block::Ascspp(p) => p.forward(x),
        }
    }

    /// Visits every tensor in a fixed order with its name and shape.
    fn visit(&mut self, f: &mut Visitor<'_, T>) -> Result<()> {
        match self {
            Block::ChannelAttention(a) => visit_conv("conv", &mut a.conv, f),
            Block::Asconv(p) => visit_asconv("", p, f),
            Block::Ascspp(p) => {
                visit_conv("pointwise", &mut p.pointwise, f)?;
                for (i, b) in p.branches.iter_mut().enumerate() {
                    visit_asconv(&format!("asconv{i}."), b, f)?;
                }
                visit_conv("pool", &mut p.pool, f)?;
                visit_conv("projection", &mut p.projection, f)
            }
        }
    }
}

/// Serializes named blocks into a manifest and blob.
pub fn encode<T: Real>(blocks: &[(String, Block<T>)], blob_name: &str) -> Result<(WeightManifest, Vec<u8>)> {
    let mut blob = Vec::new();
    let mut entries = Vec::with_capacity(blocks.len());
    for (name, block) in blocks {
        let topology = block.topology();
        // the topology must describe this block exactly, or loading would differ
        let mut expected = Vec::new();
        Block::<T>::zeros(&topology).visit(&mut |n, shape, _| {
            expected.push((n, shape));
            Ok(())
        })?;
        let mut tensors = Vec::new();
        let mut block = block.clone();
        let mut i = 0;
        block.visit(&mut |n, shape, values| {
            if expected.get(i) != Some(&(n.clone(), shape.clone())) {
                return Err(Error::ShapeMismatch(format!(
                    "block {name}: tensor {n} {shape:?} not expressible by its topology"
                )));
            }
            i += 1;
            tensors.push(TensorEntry {
                name: n,
                shape,
                offset: blob.len() as u64,
                length: values.len() as u64,
            });
            for v in values.iter() {
                blob.extend_from_slice(&(v.to_f64_lossy() as f32).to_le_bytes());
            }
            Ok(())
        })?;
        entries.push(BlockEntry {
            name: name.clone(),
            topology,
            tensors,
        });
    }
    Ok((
        WeightManifest {
            format: FORMAT.into(),
            version: VERSION,
            dtype: "f32".into(),
            blob: blob_name.into(),
            blocks: entries,
        },
        blob,
    ))
}

pub fn decode<T: Real>(manifest: &WeightManifest, blob: &[u8]) -> Result<Vec<(String, Block<T>)>> {
    let bad = |reason: String| Error::format("weight container", reason);
    if manifest.format != FORMAT || manifest.version != VERSION {
        return Err(bad(format!("unsupported format {} v{}", manifest.format, manifest.version)));
    }
    if manifest.dtype != "f32" {
        return Err(bad(format!("unsupported dtype {}", manifest.dtype)));
    }
    let mut out = Vec::with_capacity(manifest.blocks.len());
    for entry in &manifest.blocks {
        let by_name: HashMap<&str, &TensorEntry> = entry.tensors.iter().map(|t| (t.name.as_str(), t)).collect();
        let mut block = Block::<T>::zeros(&entry.topology);
        block.visit(&mut |name, shape, values| {
            let t = by_name
                .get(name.as_str())
                .ok_or_else(|| bad(format!("block {}: missing tensor {name}", entry.name)))?;
            if t.shape != shape || t.length as usize != values.len() {
                return Err(bad(format!(
                    "block {}: tensor {name} has shape {:?}, topology needs {shape:?}",
                    entry.name, t.shape
                )));
            }
            let start = t.offset as usize;
            let bytes = blob
                .get(start..start + 4 * values.len())
                .ok_or_else(|| bad(format!("tensor {name} runs past the blob")))?;
            for (v, chunk) in values.iter_mut().zip(bytes.chunks_exact(4)) {
                let f = f32::from_le_bytes(chunk.try_into().expect("4-byte chunk"));
                if !f.is_finite() {
                    return Err(bad(format!("tensor {name} holds a non-finite value")));
                }
                *v = T::lit(f as f64);
            }
            Ok(())
        })?;
        out.push((entry.name.clone(), block));
    }
    Ok(out)
}

/// Writes `<dir>/<stem>.json` and `<dir>/<stem>.bin`.
pub fn write<T: Real>(dir: &Path, stem: &str, blocks: &[(String, Block<T>)]) -> Result<()> {
    let blob_name = format!("{stem}.bin");
    let (manifest, blob) = encode(blocks, &blob_name)?;
    fs::write(dir.join(&blob_name), blob)?;
    fs::write(dir.join(format!("{stem}.json")), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(())
}

/// Reads a manifest and the blob it names (relative to the manifest).
pub fn read<T: Real>(manifest_path: &Path) -> Result<Vec<(String, Block<T>)>> {
    let manifest: WeightManifest = serde_json::from_slice(&fs::read(manifest_path)?)?;
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let blob = fs::read(dir.join(&manifest.blob))?;
    decode(&manifest, &blob)
}
