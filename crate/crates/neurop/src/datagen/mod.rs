//! Dataset generation: the four PDE families and their shared random-field
//! sampler.
//!
//! Everything here is deterministic in `(family, seed, parameters)`: random
//! draws come from per-sample ChaCha streams, solves are fixed-order `f64`
//! arithmetic, and the resulting containers are byte-reproducible.

pub mod allen_cahn;
pub mod darcy;
pub mod dataset;
pub mod grf;
pub mod navier_stokes;
pub mod wave;

pub use allen_cahn::{
    allen_cahn_solve, allen_cahn_solve_with_boundary, AC_DEFAULT_DT, AC_EPSILON, AC_FINAL_TIME,
};
pub use darcy::{
    darcy_residual, darcy_sample_coefficient, darcy_solve, darcy_solve_with_source, DARCY_CG_TOL,
    DARCY_HIGH, DARCY_LOW,
};
pub use dataset::{
    build_dataset, data_card, generate_sample, resample_field, sample_seed, DatasetPair,
    DatasetRequest, FamilyParams, PdeFamily,
};
pub use grf::{sample_grf, GrfSpec};
pub use navier_stokes::{enstrophy, ns_solve, ns_standard_forcing, NS_VISCOSITY};
pub use wave::{
    sample_wave_initial, wave_exact_solution, SineCoeffs, WAVE_SPEED, WAVE_TRUNCATION,
};
