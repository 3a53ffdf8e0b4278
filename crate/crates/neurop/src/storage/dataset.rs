//! The `NODF` dataset container format.
//!
//! Layout: magic `NODF` | version u32 | metadata length u32 | metadata JSON
//! (UTF-8) | inputs | targets, with both payloads contiguous little-endian
//! `f32`, row-major within a sample and sample-major overall.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field2D;
use crate::tensor::{Element, Tensor};

use super::bytes::{put_f32s, put_u32, write_file_atomic, Cursor};

pub const NODF_VERSION: u32 = 1;
const NODF_MAGIC: &[u8; 4] = b"NODF";

/// Per-channel normalization statistics, computed on the training split and
/// copied verbatim into the matching test container.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub input_mean: f64,
    pub input_std: f64,
    pub target_mean: f64,
    pub target_std: f64,
}

impl NormStats {
    /// Identity statistics (mean 0, std 1).
    pub fn identity() -> Self {
        NormStats {
            input_mean: 0.0,
            input_std: 1.0,
            target_mean: 0.0,
            target_std: 1.0,
        }
    }
}

/// Self-describing metadata block of a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    /// Family tag, e.g. `wave@5`, `navier-stokes@10`, `darcy`, `allen-cahn`.
    pub family: String,
    /// `train` or `test`.
    pub split: String,
    /// Grid extent per axis.
    pub grid: usize,
    pub sample_count: usize,
    pub input_channels: usize,
    pub target_channels: usize,
    /// Base seed of the generation run.
    pub seed: u64,
    /// Global sample-index range `[start, end)` drawn by this split.
    pub index_start: usize,
    pub index_end: usize,
    /// Family parameters as a JSON object (sorted keys).
    pub params: serde_json::Value,
    pub norm: NormStats,
    /// SHA-256 of the little-endian `f64` payload before the `f32` cast
    /// (inputs then targets).
    pub digest_f64: String,
}

/// An in-memory dataset: metadata plus flat `f32` payloads.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetContainer {
    pub meta: DatasetMeta,
    /// `[sample_count, input_channels, grid, grid]`, row-major.
    pub inputs: Vec<f32>,
    /// `[sample_count, target_channels, grid, grid]`, row-major.
    pub targets: Vec<f32>,
}

impl DatasetContainer {
    pub fn validate(&self) -> Result<()> {
        let m = &self.meta;
        let per_in = m.input_channels * m.grid * m.grid;
        let per_out = m.target_channels * m.grid * m.grid;
        if self.inputs.len() != m.sample_count * per_in {
            return Err(Error::Format(format!(
                "dataset: input payload has {} values, metadata declares {}",
                self.inputs.len(),
                m.sample_count * per_in
            )));
        }
        if self.targets.len() != m.sample_count * per_out {
            return Err(Error::Format(format!(
                "dataset: target payload has {} values, metadata declares {}",
                self.targets.len(),
                m.sample_count * per_out
            )));
        }
        Ok(())
    }

    fn values_per_input(&self) -> usize {
        self.meta.input_channels * self.meta.grid * self.meta.grid
    }

    fn values_per_target(&self) -> usize {
        self.meta.target_channels * self.meta.grid * self.meta.grid
    }

    /// Raw (unnormalized) input batch `[b, c, g, g]` for the given sample
    /// indices.
    pub fn input_batch<T: Element>(&self, indices: &[usize]) -> Result<Tensor<T>> {
        batch_from(
            &self.inputs,
            self.values_per_input(),
            indices,
            &[
                indices.len(),
                self.meta.input_channels,
                self.meta.grid,
                self.meta.grid,
            ],
        )
    }

    /// Raw (unnormalized) target batch `[b, c, g, g]`.
    pub fn target_batch<T: Element>(&self, indices: &[usize]) -> Result<Tensor<T>> {
        batch_from(
            &self.targets,
            self.values_per_target(),
            indices,
            &[
                indices.len(),
                self.meta.target_channels,
                self.meta.grid,
                self.meta.grid,
            ],
        )
    }

    /// Single-channel view of one input sample as a field (channel 0).
    pub fn input_field(&self, index: usize) -> Result<Field2D> {
        let per = self.values_per_input();
        let g = self.meta.grid;
        let start = index * per;
        let plane: Vec<f64> = self.inputs[start..start + g * g]
            .iter()
            .map(|&v| v as f64)
            .collect();
        Field2D::new(g, g, plane)
    }

    /// Single-channel view of one target sample as a field (channel 0).
    pub fn target_field(&self, index: usize) -> Result<Field2D> {
        let per = self.values_per_target();
        let g = self.meta.grid;
        let start = index * per;
        let plane: Vec<f64> = self.targets[start..start + g * g]
            .iter()
            .map(|&v| v as f64)
            .collect();
        Field2D::new(g, g, plane)
    }

    /// SHA-256 of the stored `f32` payload (inputs then targets); used for
    /// duplicate detection and checkpoint provenance.
    pub fn payload_digest(&self) -> String {
        let mut all = Vec::with_capacity(self.inputs.len() + self.targets.len());
        all.extend_from_slice(&self.inputs);
        all.extend_from_slice(&self.targets);
        super::bytes::digest_f32(&all)
    }
}

fn batch_from<T: Element>(
    payload: &[f32],
    per_sample: usize,
    indices: &[usize],
    shape: &[usize],
) -> Result<Tensor<T>> {
    let mut data = Vec::with_capacity(indices.len() * per_sample);
    for &idx in indices {
        let start = idx * per_sample;
        if start + per_sample > payload.len() {
            return Err(Error::arg("dataset", format!("sample index {idx} out of range")));
        }
        data.extend(payload[start..start + per_sample].iter().map(|&v| T::of(v as f64)));
    }
    Tensor::from_vec(data, shape)
}

/// Serializes a container into the `NODF` byte image.
pub fn dataset_to_bytes(container: &DatasetContainer) -> Result<Vec<u8>> {
    container.validate()?;
    let meta = serde_json::to_vec(&container.meta)?;
    let mut out = Vec::with_capacity(
        12 + meta.len() + 4 * (container.inputs.len() + container.targets.len()),
    );
    out.extend_from_slice(NODF_MAGIC);
    put_u32(&mut out, NODF_VERSION);
    put_u32(&mut out, meta.len() as u32);
    out.extend_from_slice(&meta);
    put_f32s(&mut out, &container.inputs);
    put_f32s(&mut out, &container.targets);
    Ok(out)
}

/// Writes a container to disk atomically.
pub fn write_dataset(path: &Path, container: &DatasetContainer) -> Result<()> {
    write_file_atomic(path, &dataset_to_bytes(container)?)
}

/// Parses a `NODF` byte image.
pub fn dataset_from_bytes(bytes: &[u8]) -> Result<DatasetContainer> {
    let mut cur = Cursor::new(bytes, "dataset");
    cur.expect_magic(NODF_MAGIC)?;
    let version = cur.take_u32()?;
    if version != NODF_VERSION {
        return Err(Error::Format(format!(
            "dataset: unknown format version {version} (supported: {NODF_VERSION})"
        )));
    }
    let meta_len = cur.take_u32()? as usize;
    let meta: DatasetMeta = serde_json::from_slice(cur.take(meta_len)?)?;
    let per_in = meta.input_channels * meta.grid * meta.grid;
    let per_out = meta.target_channels * meta.grid * meta.grid;
    let inputs = cur.take_f32s(meta.sample_count * per_in)?;
    let targets = cur.take_f32s(meta.sample_count * per_out)?;
    cur.expect_end()?;
    let container = DatasetContainer {
        meta,
        inputs,
        targets,
    };
    container.validate()?;
    Ok(container)
}

/// Reads a container from disk.
pub fn read_dataset(path: &Path) -> Result<DatasetContainer> {
    dataset_from_bytes(&std::fs::read(path)?)
}
