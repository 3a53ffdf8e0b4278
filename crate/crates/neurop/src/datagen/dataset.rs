//! Reproducible dataset assembly: family dispatch, per-sample seeding,
//! normalization statistics, and container construction.

use std::collections::HashSet;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{BoundaryKind, Field2D};
use crate::storage::{digest_f64, DatasetContainer, DatasetMeta, NormStats};
use crate::tensor::Tensor;

use super::allen_cahn::allen_cahn_solve;
use super::darcy::{darcy_sample_coefficient, darcy_solve};
use super::grf::GrfSpec;
use super::navier_stokes::{ns_solve, ns_standard_forcing};
use super::wave::SineCoeffs;

/// The four dataset families. Time-parametrized families carry the snapshot
/// time in their tag (`wave@5`, `navier-stokes@10`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PdeFamily {
    WaveAt { t: f64 },
    NavierStokesAt { t: f64 },
    Darcy,
    AllenCahn,
}

impl PdeFamily {
    pub fn tag(&self) -> String {
        match self {
            PdeFamily::WaveAt { t } => format!("wave@{t}"),
            PdeFamily::NavierStokesAt { t } => format!("navier-stokes@{t}"),
            PdeFamily::Darcy => "darcy".into(),
            PdeFamily::AllenCahn => "allen-cahn".into(),
        }
    }
}

impl FromStr for PdeFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse_time = |tag: &str, rest: &str| -> Result<f64> {
            let t: f64 = rest.parse().map_err(|_| {
                Error::arg("pde-family", format!("bad time '{rest}' in '{tag}@{rest}'"))
            })?;
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::arg("pde-family", "snapshot time must be finite, >= 0"));
            }
            Ok(t)
        };
        if let Some(rest) = s.strip_prefix("wave@") {
            return Ok(PdeFamily::WaveAt {
                t: parse_time("wave", rest)?,
            });
        }
        if let Some(rest) = s.strip_prefix("navier-stokes@") {
            return Ok(PdeFamily::NavierStokesAt {
                t: parse_time("navier-stokes", rest)?,
            });
        }
        match s {
            "darcy" => Ok(PdeFamily::Darcy),
            "allen-cahn" => Ok(PdeFamily::AllenCahn),
            other => Err(Error::arg(
                "pde-family",
                format!("unknown family '{other}' (expected wave@t, navier-stokes@t, darcy, allen-cahn)"),
            )),
        }
    }
}

/// Family hyperparameters with the documented defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FamilyParams {
    pub wave_truncation: usize,
    pub wave_speed: f64,
    pub ns_viscosity: f64,
    pub ns_dt: f64,
    /// Navier-Stokes fields are generated at `ns_gen_factor * grid` and
    /// spectrally downsampled to `grid`.
    pub ns_gen_factor: usize,
    pub ac_epsilon: f64,
    pub ac_final_time: f64,
    pub ac_dt: f64,
}

impl Default for FamilyParams {
    fn default() -> Self {
        FamilyParams {
            wave_truncation: super::wave::WAVE_TRUNCATION,
            wave_speed: super::wave::WAVE_SPEED,
            ns_viscosity: super::navier_stokes::NS_VISCOSITY,
            ns_dt: 1e-3,
            ns_gen_factor: 2,
            ac_epsilon: super::allen_cahn::AC_EPSILON,
            ac_final_time: super::allen_cahn::AC_FINAL_TIME,
            ac_dt: super::allen_cahn::AC_DEFAULT_DT,
        }
    }
}

/// A full dataset-generation request.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRequest {
    pub family: PdeFamily,
    pub n_train: usize,
    pub n_test: usize,
    pub grid: usize,
    pub seed: u64,
    pub params: FamilyParams,
}

/// Train/test containers produced by one request.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetPair {
    pub train: DatasetContainer,
    pub test: DatasetContainer,
}

/// Per-sample seed: a splitmix64 scramble of the base seed and the global
/// sample index, so train (indices `0..n_train`) and test (offset by
/// `n_train`) draw from disjoint streams.
pub fn sample_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generates the `(input, target)` field pair for one global sample index.
pub fn generate_sample(
    family: PdeFamily,
    params: &FamilyParams,
    grid: usize,
    seed: u64,
) -> Result<(Field2D, Field2D)> {
    match family {
        PdeFamily::WaveAt { t } => {
            let coeffs = SineCoeffs::sample(seed, params.wave_truncation, params.wave_speed)?;
            let input = coeffs.evaluate(0.0, grid, BoundaryKind::DirichletZero)?;
            let target = coeffs.evaluate(t, grid, BoundaryKind::DirichletZero)?;
            Ok((input, target))
        }
        PdeFamily::NavierStokesAt { t } => {
            if params.ns_gen_factor < 1 {
                return Err(Error::arg("build-dataset", "ns_gen_factor must be >= 1"));
            }
            let gen = grid * params.ns_gen_factor;
            let w0 = super::grf::sample_grf(&GrfSpec::navier_stokes(), seed, gen)?;
            let w_t = if t == 0.0 {
                w0.clone()
            } else {
                let forcing = ns_standard_forcing(gen);
                ns_solve(&w0, params.ns_viscosity, &forcing, &[t], params.ns_dt)?
                    .pop()
                    .expect("one snapshot requested")
            };
            Ok((resample_field(&w0, grid)?, resample_field(&w_t, grid)?))
        }
        PdeFamily::Darcy => {
            let a = darcy_sample_coefficient(seed, grid)?;
            let u = darcy_solve(&a)?;
            Ok((a, u))
        }
        PdeFamily::AllenCahn => {
            let coeffs = SineCoeffs::sample(seed, params.wave_truncation, params.wave_speed)?;
            let u0 = coeffs.evaluate(0.0, grid, BoundaryKind::Periodic)?;
            let u = allen_cahn_solve(&u0, params.ac_epsilon, params.ac_final_time, params.ac_dt)?;
            Ok((u0, u))
        }
    }
}

/// Spectral resampling of a field to a new square extent (identity when the
/// extents already match).
pub fn resample_field(field: &Field2D, to: usize) -> Result<Field2D> {
    if field.h() == to && field.w() == to {
        return Ok(field.clone());
    }
    let t: Tensor<f64> = field.to_tensor();
    let out = t.spectral_resample((to, to))?;
    Field2D::new(to, to, out.to_f64_vec())
}

/// Builds the train/test container pair for a request.
pub fn build_dataset(req: &DatasetRequest) -> Result<DatasetPair> {
    if req.n_train < 1 {
        return Err(Error::arg("build-dataset", "need at least one training sample"));
    }
    if req.grid < 8 {
        return Err(Error::arg("build-dataset", "grid extent must be >= 8"));
    }
    let mut seen = HashSet::new();
    let mut make_split = |start: usize, count: usize| -> Result<(Vec<f64>, Vec<f64>)> {
        let per = req.grid * req.grid;
        let mut inputs = Vec::with_capacity(count * per);
        let mut targets = Vec::with_capacity(count * per);
        for offset in 0..count {
            let idx = start + offset;
            let seed = sample_seed(req.seed, idx as u64);
            let (input, target) = generate_sample(req.family, &req.params, req.grid, seed)?;
            let mut combined = input.data().to_vec();
            combined.extend_from_slice(target.data());
            if !seen.insert(digest_f64(&combined)) {
                return Err(Error::arg(
                    "build-dataset",
                    format!("duplicate sample content at global index {idx}"),
                ));
            }
            inputs.extend_from_slice(input.data());
            targets.extend_from_slice(target.data());
        }
        Ok((inputs, targets))
    };
    let (train_in, train_tg) = make_split(0, req.n_train)?;
    let (test_in, test_tg) = make_split(req.n_train, req.n_test)?;

    let norm = NormStats {
        input_mean: mean_of(&train_in),
        input_std: std_of(&train_in),
        target_mean: mean_of(&train_tg),
        target_std: std_of(&train_tg),
    };

    let params = family_params_json(req);
    let container = |split: &str,
                     start: usize,
                     count: usize,
                     inputs: Vec<f64>,
                     targets: Vec<f64>|
     -> Result<DatasetContainer> {
        let mut payload = inputs.clone();
        payload.extend_from_slice(&targets);
        let meta = DatasetMeta {
            family: req.family.tag(),
            split: split.into(),
            grid: req.grid,
            sample_count: count,
            input_channels: 1,
            target_channels: 1,
            seed: req.seed,
            index_start: start,
            index_end: start + count,
            params: params.clone(),
            norm,
            digest_f64: digest_f64(&payload),
        };
        let c = DatasetContainer {
            meta,
            inputs: inputs.iter().map(|&v| v as f32).collect(),
            targets: targets.iter().map(|&v| v as f32).collect(),
        };
        c.validate()?;
        Ok(c)
    };
    Ok(DatasetPair {
        train: container("train", 0, req.n_train, train_in, train_tg)?,
        test: container("test", req.n_train, req.n_test, test_in, test_tg)?,
    })
}

/// Plain-text data card describing a container: every parameter needed to
/// regenerate it.
pub fn data_card(meta: &DatasetMeta) -> String {
    let params =
        serde_json::to_string_pretty(&meta.params).unwrap_or_else(|_| "<unprintable>".into());
    format!(
        "dataset: {family} ({split})\n\
         grid: {grid} x {grid}\n\
         samples: {count} (global indices {s}..{e})\n\
         base seed: {seed}\n\
         input channels: {ic}, target channels: {tc}\n\
         normalization (train split): input mean {im}, input std {is}, target mean {tm}, target std {ts}\n\
         f64 payload digest: {digest}\n\
         family parameters:\n{params}\n",
        family = meta.family,
        split = meta.split,
        grid = meta.grid,
        count = meta.sample_count,
        s = meta.index_start,
        e = meta.index_end,
        seed = meta.seed,
        ic = meta.input_channels,
        tc = meta.target_channels,
        im = meta.norm.input_mean,
        is = meta.norm.input_std,
        tm = meta.norm.target_mean,
        ts = meta.norm.target_std,
        digest = meta.digest_f64,
    )
}

fn mean_of(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len().max(1) as f64
}

fn std_of(values: &[f64]) -> f64 {
    let m = mean_of(values);
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len().max(1) as f64;
    var.sqrt().max(1e-12)
}

fn family_params_json(req: &DatasetRequest) -> serde_json::Value {
    let p = &req.params;
    match req.family {
        PdeFamily::WaveAt { t } => serde_json::json!({
            "t": t,
            "truncation": p.wave_truncation,
            "speed": p.wave_speed,
            "boundary": "dirichlet-zero",
        }),
        PdeFamily::NavierStokesAt { t } => serde_json::json!({
            "t": t,
            "viscosity": p.ns_viscosity,
            "dt": p.ns_dt,
            "generation_grid": req.grid * p.ns_gen_factor,
            "grf": GrfSpec::navier_stokes(),
            "forcing": "0.1(sin(2pi(x1+x2))+cos(2pi(x1+x2)))",
            "boundary": "periodic",
        }),
        PdeFamily::Darcy => serde_json::json!({
            "high": super::darcy::DARCY_HIGH,
            "low": super::darcy::DARCY_LOW,
            "grf": GrfSpec::darcy(),
            "cg_tolerance": super::darcy::DARCY_CG_TOL,
            "boundary": "dirichlet-zero",
        }),
        PdeFamily::AllenCahn => serde_json::json!({
            "epsilon": p.ac_epsilon,
            "t_final": p.ac_final_time,
            "dt": p.ac_dt,
            "truncation": p.wave_truncation,
            "boundary": "periodic",
        }),
    }
}
