//! `DMXM1` model checkpoints.
//!
//! Layout: the 8-byte magic `DMXMODL1`, a little-endian `u32` manifest length,
//! the JSON manifest, then every parameter block listed in the manifest as
//! column-major little-endian `f32`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{f32_le, Reader};
use crate::error::{Error, Result};
use crate::model::{BlockShape, DynaMixModel, ModelConfig};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DMXMODL1";
pub const CHECKPOINT_FORMAT: &str = "DMXM1";
const KIND: &str = "DMXM1 checkpoint";
/// Upper bound on the manifest size accepted by the decoder.
const MAX_MANIFEST: usize = 16 << 20;

/// Everything in the checkpoint apart from the parameter values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub config: ModelConfig,
    /// Free-form creation metadata (tool version, seed, timestamps).
    pub metadata: BTreeMap<String, String>,
    pub train_config_hash: Option<String>,
    pub blocks: Vec<BlockShape>,
}

impl Manifest {
    pub fn new(config: ModelConfig, metadata: BTreeMap<String, String>, train_config_hash: Option<String>) -> Self {
        Manifest {
            format: CHECKPOINT_FORMAT.to_string(),
            config,
            metadata,
            train_config_hash,
            blocks: config.block_shapes(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub manifest: Manifest,
    pub model: DynaMixModel,
}

impl Checkpoint {
    pub fn new(model: DynaMixModel, metadata: BTreeMap<String, String>, train_config_hash: Option<String>) -> Self {
        Checkpoint { manifest: Manifest::new(model.config, metadata, train_config_hash), model }
    }
}

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    ckpt.model.validate()?;
    if let Some(block) = ckpt
        .model
        .block_shapes()
        .iter()
        .zip(ckpt.model.blocks())
        .find(|(_, values)| values.iter().any(|v| !(*v as f32).is_finite()))
    {
        return Err(Error::arg(format!("block {} has values outside the f32 range", block.0.name)));
    }
    if ckpt.manifest.config != ckpt.model.config || ckpt.manifest.blocks != ckpt.model.block_shapes() {
        return Err(Error::arg("manifest does not describe the model"));
    }
    let manifest = serde_json::to_vec(&ckpt.manifest).expect("manifest serializes");
    let len = u32::try_from(manifest.len()).map_err(|_| Error::format(KIND, "manifest too large"))?;
    let mut out = Vec::with_capacity(12 + manifest.len() + 4 * ckpt.model.num_params());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(&manifest);
    for block in ckpt.model.blocks() {
        for v in block {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

/// Parses a checkpoint, validating every block shape against the manifest
/// and the manifest against the model structure.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader::new(bytes, KIND);
    r.magic(CHECKPOINT_MAGIC)?;
    let len = r.u32()? as usize;
    if len > MAX_MANIFEST {
        return Err(Error::format(KIND, "manifest too large"));
    }
    let manifest: Manifest = serde_json::from_slice(r.take(len)?)
        .map_err(|e| Error::format(KIND, format!("bad manifest: {e}")))?;
    if manifest.format != CHECKPOINT_FORMAT {
        return Err(Error::format(KIND, format!("unknown format tag {:?}", manifest.format)));
    }
    manifest.config.validate().map_err(|e| Error::format(KIND, e.to_string()))?;
    let total = manifest
        .config
        .checked_num_params()
        .ok_or_else(|| Error::format(KIND, "parameter count overflows"))?;
    if r.rest().len() != total.saturating_mul(4) {
        return Err(Error::format(
            KIND,
            format!("payload has {} bytes, configuration needs {}", r.rest().len(), total.saturating_mul(4)),
        ));
    }
    let expected = manifest.config.block_shapes();
    if manifest.blocks != expected {
        let bad = manifest
            .blocks
            .iter()
            .zip(&expected)
            .find(|(a, b)| a != b)
            .map(|(a, b)| format!("block {} is {}x{}, expected {} {}x{}", a.name, a.rows, a.cols, b.name, b.rows, b.cols))
            .unwrap_or_else(|| format!("{} blocks listed, expected {}", manifest.blocks.len(), expected.len()));
        return Err(Error::format(KIND, bad));
    }
    let mut blocks = Vec::with_capacity(expected.len());
    for shape in &expected {
        let raw = r.take(4 * shape.len())?;
        blocks.push(raw.chunks_exact(4).map(|b| f32_le(b) as f64).collect::<Vec<f64>>());
    }
    let model = DynaMixModel::from_blocks(manifest.config, &blocks).map_err(|e| Error::format(KIND, e.to_string()))?;
    Ok(Checkpoint { manifest, model })
}

pub fn write_checkpoint(path: &std::path::Path, ckpt: &Checkpoint) -> Result<()> {
    std::fs::write(path, encode_checkpoint(ckpt)?)?;
    Ok(())
}

pub fn read_checkpoint(path: &std::path::Path) -> Result<Checkpoint> {
    decode_checkpoint(&std::fs::read(path)?)
}
