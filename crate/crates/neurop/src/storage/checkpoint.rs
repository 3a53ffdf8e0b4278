//! The `NOCK` checkpoint format.
//!
//! Layout: magic `NOCK` | version u32 | metadata length u32 | metadata JSON |
//! block count u32 | blocks. Each block is: name length u32 | name UTF-8 |
//! rank u32 | dims (u32 each) | values as little-endian `f32`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::bytes::{put_f32s, put_u32, write_file_atomic, Cursor};

pub const NOCK_VERSION: u32 = 1;
const NOCK_MAGIC: &[u8; 4] = b"NOCK";

/// One named parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBlock {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f32>,
}

impl ParamBlock {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, values: Vec<f32>) -> Result<Self> {
        let name = name.into();
        let numel: usize = shape.iter().product();
        if values.len() != numel {
            return Err(Error::Format(format!(
                "checkpoint block '{name}': {} values for declared shape {shape:?}",
                values.len()
            )));
        }
        Ok(ParamBlock {
            name,
            shape,
            values,
        })
    }
}

/// Metadata block of a checkpoint file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    /// Serialized model configuration.
    pub model: serde_json::Value,
    /// Serialized training configuration (may be `null` for untrained
    /// snapshots).
    pub train: serde_json::Value,
    /// Epoch index the parameters belong to.
    pub epoch: usize,
    /// SHA-256 of the `f64` loss-history values.
    pub history_digest: String,
    /// Payload digest of the dataset the model was trained on.
    pub dataset_digest: String,
}

/// An in-memory checkpoint: metadata plus named parameter blocks in a fixed
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub blocks: Vec<ParamBlock>,
}

impl Checkpoint {
    pub fn block(&self, name: &str) -> Option<&ParamBlock> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub fn parameter_count(&self) -> usize {
        self.blocks.iter().map(|b| b.values.len()).sum()
    }
}

/// Serializes a checkpoint into the `NOCK` byte image.
pub fn checkpoint_to_bytes(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    for b in &ckpt.blocks {
        let numel: usize = b.shape.iter().product();
        if b.values.len() != numel {
            return Err(Error::Format(format!(
                "checkpoint block '{}': {} values for declared shape {:?}",
                b.name,
                b.values.len(),
                b.shape
            )));
        }
    }
    let meta = serde_json::to_vec(&ckpt.meta)?;
    let mut out = Vec::new();
    out.extend_from_slice(NOCK_MAGIC);
    put_u32(&mut out, NOCK_VERSION);
    put_u32(&mut out, meta.len() as u32);
    out.extend_from_slice(&meta);
    put_u32(&mut out, ckpt.blocks.len() as u32);
    for b in &ckpt.blocks {
        let name = b.name.as_bytes();
        put_u32(&mut out, name.len() as u32);
        out.extend_from_slice(name);
        put_u32(&mut out, b.shape.len() as u32);
        for &d in &b.shape {
            put_u32(&mut out, d as u32);
        }
        put_f32s(&mut out, &b.values);
    }
    Ok(out)
}

/// Writes a checkpoint to disk atomically.
pub fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    write_file_atomic(path, &checkpoint_to_bytes(ckpt)?)
}

/// Parses a `NOCK` byte image.
pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
    let mut cur = Cursor::new(bytes, "checkpoint");
    cur.expect_magic(NOCK_MAGIC)?;
    let version = cur.take_u32()?;
    if version != NOCK_VERSION {
        return Err(Error::Format(format!(
            "checkpoint: unknown format version {version} (supported: {NOCK_VERSION})"
        )));
    }
    let meta_len = cur.take_u32()? as usize;
    let meta: CheckpointMeta = serde_json::from_slice(cur.take(meta_len)?)?;
    let block_count = cur.take_u32()? as usize;
    let mut blocks = Vec::with_capacity(block_count);
    for _ in 0..block_count {
        let name_len = cur.take_u32()? as usize;
        let name = String::from_utf8(cur.take(name_len)?.to_vec())
            .map_err(|_| Error::Format("checkpoint: block name is not UTF-8".into()))?;
        let rank = cur.take_u32()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(cur.take_u32()? as usize);
        }
        let numel: usize = shape.iter().product();
        let values = cur.take_f32s(numel).map_err(|e| {
            Error::Format(format!("checkpoint block '{name}': {e}"))
        })?;
        blocks.push(ParamBlock {
            name,
            shape,
            values,
        });
    }
    cur.expect_end()?;
    Ok(Checkpoint { meta, blocks })
}

/// Reads a checkpoint from disk.
pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    checkpoint_from_bytes(&std::fs::read(path)?)
}
