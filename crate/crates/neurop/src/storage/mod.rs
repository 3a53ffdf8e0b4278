//! Bit-exact on-disk formats: dataset containers, model checkpoints, and the
//! CSV / PGM exporters used for maps and reports.
//!
//! Both binary formats are little-endian regardless of host, self-describing
//! through an embedded JSON metadata block, and written atomically (temp
//! file + rename) so readers never observe partial files. Payloads are
//! `float32` for storage economy; generation-time `float64` digests ride
//! along in the metadata for audit.

mod bytes;
mod checkpoint;
mod dataset;
mod export;

pub use bytes::{digest_bytes, digest_f32, digest_f64, write_file_atomic};
pub use checkpoint::{
    checkpoint_from_bytes, checkpoint_to_bytes, read_checkpoint, write_checkpoint, Checkpoint,
    CheckpointMeta, ParamBlock, NOCK_VERSION,
};
pub use dataset::{
    dataset_from_bytes, dataset_to_bytes, read_dataset, write_dataset, DatasetContainer,
    DatasetMeta, NormStats, NODF_VERSION,
};
pub use export::{format_float, write_csv, write_pgm, write_pgm_auto};
