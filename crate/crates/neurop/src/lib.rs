//! A desk-scale laboratory for neural operators on 2-D PDE problems.
//!
//! The crate covers the full loop from data to explanation:
//!
//! * [`tensor`] — dense tensors with reverse-mode differentiation, including
//!   2-D FFTs, spectral resampling, and convolution.
//! * [`datagen`] — generators for the wave, Navier-Stokes, Darcy, and
//!   Allen-Cahn datasets, plus the Gaussian random field sampler they share.
//! * [`models`] — the operator zoo: FNO (and its local-convolution and
//!   full-mode variants), DeepONet, T1, CNO, and a Galerkin-attention model,
//!   all in deliberately small configurations.
//! * [`train`] — relative-ℓ2 loss, Adam, and a bit-reproducible training loop.
//! * [`erf`] — effective-receptive-field maps: reverse-mode, finite-difference,
//!   and the analytical wave kernel.
//! * [`analysis`] — radial error spectra and the C4 rotation-equivariance audit.
//! * [`storage`] — bit-exact file formats for datasets, checkpoints, and maps.
//! * [`recipes`] — end-to-end experiment recipes used by the CLI.
//!
//! Everything runs on a single desktop CPU. Correctness-critical paths have
//! independent oracles (finite differences, explicit DFT matrices, closed-form
//! solutions) in the test suites.

pub mod analysis;
pub mod datagen;
pub mod erf;
pub mod field;
pub mod fft;
pub mod models;
pub mod recipes;
pub mod storage;
pub mod tensor;
pub mod train;

mod error;

pub use error::{Error, Result};
pub use field::{BoundaryKind, Field2D};
pub use tensor::{ComplexTensor, DType, Element, GradMap, PadMode, Tensor};
