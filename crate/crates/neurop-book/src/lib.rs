//! Doc-test shim for the guide.
//!
//! Each chapter of `book/src` is attached below as module documentation,
//! so `cargo test --workspace` compiles and runs every fenced Rust block
//! in the book. If a chapter drifts from the library's API, the build
//! breaks here.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/fields-and-autodiff.md")]
pub mod fields_and_autodiff {}

#[doc = include_str!("../../../book/src/datasets.md")]
pub mod datasets {}

#[doc = include_str!("../../../book/src/models.md")]
pub mod models {}

#[doc = include_str!("../../../book/src/training.md")]
pub mod training {}

#[doc = include_str!("../../../book/src/receptive-fields.md")]
pub mod receptive_fields {}

#[doc = include_str!("../../../book/src/analysis.md")]
pub mod analysis {}

#[doc = include_str!("../../../book/src/storage.md")]
pub mod storage {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
