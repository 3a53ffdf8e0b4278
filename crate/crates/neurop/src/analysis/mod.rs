//! Model diagnostics beyond a single error number: where in frequency
//! space the error lives ([`radial_error_spectrum`]) and how far a model
//! strays from C₄ rotation equivariance ([`c4_equivariance_error`]).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{fft2, signed_freq};
use crate::field::Field2D;
use crate::models::ModelState;
use crate::storage::{format_float, write_csv};
use crate::tensor::{Element, Tensor};

/// Largest integer radius counted as "low band" in aggregate reports.
pub const LOW_BAND_RADIUS: usize = 6;

/// Radially binned spectral energy of an error field.
///
/// Bin `b` holds every Fourier mode whose signed-frequency radius
/// `√(k₁²+k₂²)` rounds to `b`. Energies are scaled so their sum equals
/// the squared grid-space `ℓ2` norm of the error (Parseval).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumBins {
    /// Integer radius of each bin, `0..=max`.
    pub radii: Vec<usize>,
    /// Summed squared coefficient error per bin.
    pub energy: Vec<f64>,
    /// Number of Fourier modes per bin.
    pub counts: Vec<usize>,
}

impl SpectrumBins {
    /// Total spectral error energy: equals `‖error‖²` on the grid.
    pub fn total_energy(&self) -> f64 {
        self.energy.iter().sum()
    }

    /// Energy in bins with radius at most `max_radius`.
    pub fn band_energy(&self, max_radius: usize) -> f64 {
        self.energy
            .iter()
            .take(max_radius + 1)
            .sum()
    }

    /// Energy in the low band, radius at most [`LOW_BAND_RADIUS`].
    pub fn low_band(&self) -> f64 {
        self.band_energy(LOW_BAND_RADIUS)
    }
}

/// Bins the squared Fourier coefficients of `pred − target` by integer
/// radius. Both fields must share one grid.
pub fn radial_error_spectrum(pred: &Field2D, target: &Field2D) -> Result<SpectrumBins> {
    if pred.h() != target.h() || pred.w() != target.w() {
        return Err(Error::shape(
            "radial-spectrum",
            format!(
                "{}x{} vs {}x{}",
                pred.h(),
                pred.w(),
                target.h(),
                target.w()
            ),
        ));
    }
    let (h, w) = (pred.h(), pred.w());
    let error: Vec<f64> = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| p - t)
        .collect();
    let spec = fft2(&error, h, w);

    let radius = |i: usize, j: usize| -> usize {
        let k1 = signed_freq(i, h) as f64;
        let k2 = signed_freq(j, w) as f64;
        (k1 * k1 + k2 * k2).sqrt().round() as usize
    };
    let max_bin = radius(h / 2, w / 2);
    let mut energy = vec![0.0f64; max_bin + 1];
    let mut counts = vec![0usize; max_bin + 1];
    let cells = (h * w) as f64;
    for i in 0..h {
        for j in 0..w {
            let b = radius(i, j);
            energy[b] += spec[i * w + j].norm_sqr() / cells;
            counts[b] += 1;
        }
    }
    Ok(SpectrumBins {
        radii: (0..=max_bin).collect(),
        energy,
        counts,
    })
}

/// Writes a spectrum as `bin,count,error_energy` rows.
pub fn spectrum_csv(path: &Path, bins: &SpectrumBins) -> Result<()> {
    let header: Vec<String> = ["bin", "count", "error_energy"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<Vec<String>> = bins
        .radii
        .iter()
        .zip(bins.counts.iter().zip(&bins.energy))
        .map(|(r, (c, e))| vec![r.to_string(), c.to_string(), format_float(*e)])
        .collect();
    write_csv(path, &header, &rows)
}

/// Rotates a square field by `turns` quarter-turns counterclockwise.
/// An exact index permutation: `out[i][j] = in[j][n−1−i]` per turn, so
/// the value at `(0, 0)` lands at `(n−1, 0)` after one turn.
pub fn c4_rotate(field: &Field2D, turns: i64) -> Result<Field2D> {
    let n = field.h();
    if field.w() != n {
        return Err(Error::shape(
            "c4-rotate",
            format!("want a square grid, got {}x{}", field.h(), field.w()),
        ));
    }
    let turns = turns.rem_euclid(4);
    let mut out = field.clone();
    for _ in 0..turns {
        let prev = out.clone();
        out = Field2D::from_fn(n, n, |i, j| prev.get(j, n - 1 - i));
    }
    Ok(out)
}

/// C₄ audit of an arbitrary grid-to-grid operator given as a closure over
/// `[1, 1, n, n]` tensors: mean over samples and the three nontrivial
/// rotations of the relative ℓ2 distance between `G(rot(a))` and
/// `rot(G(a))`, the rotated output serving as the reference.
pub fn c4_equivariance_error_of<T, F>(f: F, samples: &[Field2D]) -> Result<f64>
where
    T: Element,
    F: Fn(&Tensor<T>) -> Result<Tensor<T>>,
{
    if samples.is_empty() {
        return Err(Error::arg("c4-audit", "need at least one sample"));
    }
    let mut total = 0.0;
    let mut terms = 0usize;
    for a in samples {
        let n = a.h();
        if a.w() != n {
            return Err(Error::shape(
                "c4-audit",
                format!("want square samples, got {}x{}", a.h(), a.w()),
            ));
        }
        let apply = |x: &Field2D| -> Result<Field2D> {
            let out = f(&x.to_tensor::<T>())?;
            if out.shape() != [1, 1, n, n] {
                return Err(Error::shape(
                    "c4-audit",
                    format!("operator returned {:?} on a {n}x{n} sample", out.shape()),
                ));
            }
            Field2D::from_slice(
                n,
                n,
                &out.data().iter().map(|v| v.as_f64()).collect::<Vec<f64>>(),
            )
        };
        let base = apply(a)?;
        for r in 1..=3 {
            let of_rotated = apply(&c4_rotate(a, r)?)?;
            let rotated_output = c4_rotate(&base, r)?;
            total += of_rotated.rel_l2(&rotated_output)?;
            terms += 1;
        }
    }
    Ok(total / terms as f64)
}

/// C₄ audit of a model. The audit only makes sense for operators defined
/// on the bare field, so models with coordinate input features attached
/// are rejected.
pub fn c4_equivariance_error<T: Element>(
    state: &ModelState<T>,
    samples: &[Field2D],
) -> Result<f64> {
    if state.config().coord_features {
        return Err(Error::arg(
            "c4-audit",
            "disable coordinate features for the equivariance audit",
        ));
    }
    c4_equivariance_error_of(|x| state.forward(x), samples)
}

/// Serializable audit result for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivarianceAudit {
    pub samples: usize,
    pub rotations: usize,
    pub mean_rel_l2: f64,
}

/// Runs [`c4_equivariance_error`] and wraps the result with its
/// provenance counts.
pub fn c4_audit<T: Element>(
    state: &ModelState<T>,
    samples: &[Field2D],
) -> Result<EquivarianceAudit> {
    Ok(EquivarianceAudit {
        samples: samples.len(),
        rotations: 3,
        mean_rel_l2: c4_equivariance_error(state, samples)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Activation, ArchTag, ModelConfig, ModelState};
    use crate::tensor::gradcheck::random_tensor;

    fn field_from(seed: u64, n: usize) -> Field2D {
        let t = random_tensor(&[n, n], seed, -1.0, 1.0);
        Field2D::from_slice(n, n, t.data()).unwrap()
    }

    #[test]
    fn equal_fields_put_zero_in_every_bin() {
        let f = field_from(1, 16);
        let bins = radial_error_spectrum(&f, &f).unwrap();
        assert!(bins.energy.iter().all(|&e| e == 0.0));
        assert_eq!(bins.counts.iter().sum::<usize>(), 16 * 16);
        assert_eq!(bins.counts[0], 1, "only k = 0 has radius 0");
    }

    #[test]
    fn a_single_sine_mode_lands_in_its_radius_bin() {
        let n = 32;
        let target = field_from(2, n);
        let pred = Field2D::from_fn(n, n, |i, j| {
            target.get(i, j) + (2.0 * std::f64::consts::PI * 3.0 * i as f64 / n as f64).sin()
        });
        let bins = radial_error_spectrum(&pred, &target).unwrap();
        let total = bins.total_energy();
        assert!(
            bins.energy[3] / total > 1.0 - 1e-12,
            "bin 3 holds {} of {total}",
            bins.energy[3]
        );
        for (r, &e) in bins.energy.iter().enumerate() {
            if r != 3 {
                assert!(e / total < 1e-12, "leak into bin {r}: {e}");
            }
        }
    }

    #[test]
    fn bin_sum_satisfies_parseval_within_1e10() {
        for (seed, n) in [(3u64, 17usize), (4, 32)] {
            let pred = field_from(seed, n);
            let target = field_from(seed + 100, n);
            let bins = radial_error_spectrum(&pred, &target).unwrap();
            let grid_sq: f64 = pred
                .data()
                .iter()
                .zip(target.data())
                .map(|(p, t)| (p - t) * (p - t))
                .sum();
            let rel = (bins.total_energy() - grid_sq).abs() / grid_sq;
            assert!(rel < 1e-10, "n={n}: relative defect {rel:.3e}");
        }
    }

    #[test]
    fn band_energies_nest_and_exhaust() {
        let bins = radial_error_spectrum(&field_from(5, 16), &field_from(6, 16)).unwrap();
        assert!(bins.low_band() <= bins.total_energy());
        assert!(bins.band_energy(2) <= bins.band_energy(5));
        let max = *bins.radii.last().unwrap();
        assert_eq!(bins.band_energy(max), bins.total_energy());
        assert_eq!(bins.band_energy(max + 7), bins.total_energy());
    }

    #[test]
    fn spectrum_rejects_mismatched_grids() {
        let err = radial_error_spectrum(&field_from(7, 16), &field_from(8, 17));
        assert!(err.is_err());
    }

    #[test]
    fn four_quarter_turns_are_the_identity() {
        let f = field_from(9, 13);
        let back = c4_rotate(&f, 4).unwrap();
        assert_eq!(f.data(), back.data());
        let neg = c4_rotate(&f, -1).unwrap();
        let three = c4_rotate(&f, 3).unwrap();
        assert_eq!(neg.data(), three.data());
    }

    #[test]
    fn two_turns_twice_equals_four_turns() {
        let f = field_from(10, 12);
        let twice = c4_rotate(&c4_rotate(&f, 2).unwrap(), 2).unwrap();
        let four = c4_rotate(&f, 4).unwrap();
        assert_eq!(twice.data(), four.data());
        let chained = c4_rotate(&c4_rotate(&f, 1).unwrap(), 2).unwrap();
        let direct = c4_rotate(&f, 3).unwrap();
        assert_eq!(chained.data(), direct.data());
    }

    #[test]
    fn rotation_permutes_without_changing_the_multiset() {
        let f = field_from(11, 9);
        let r = c4_rotate(&f, 1).unwrap();
        let sum = |x: &Field2D| x.data().iter().sum::<f64>();
        let min = |x: &Field2D| x.data().iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(sum(&f), sum(&r));
        assert_eq!(min(&f), min(&r));
        assert_eq!(f.norm_max(), r.norm_max());
        // Pin the orientation: one counterclockwise turn sends (0, 0) to
        // the bottom-left corner.
        let mut delta = Field2D::zeros(5, 5);
        delta.set(0, 0, 1.0);
        let turned = c4_rotate(&delta, 1).unwrap();
        assert_eq!(turned.get(4, 0), 1.0);
        assert_eq!(turned.get(0, 0), 0.0);
    }

    #[test]
    fn rotation_rejects_non_square_grids() {
        let f = Field2D::zeros(4, 6);
        assert!(c4_rotate(&f, 1).is_err());
    }

    #[test]
    fn identity_and_pointwise_operators_audit_to_exactly_zero() {
        let samples = vec![field_from(20, 8), field_from(21, 8)];
        let id = c4_equivariance_error_of::<f64, _>(|x| Ok(x.clone()), &samples).unwrap();
        assert_eq!(id, 0.0);
        let pointwise =
            c4_equivariance_error_of::<f64, _>(|x| x.mul(x)?.relu(), &samples).unwrap();
        assert_eq!(pointwise, 0.0);
    }

    fn fno_cfg(grid: usize) -> ModelConfig {
        ModelConfig {
            arch: ArchTag::Fno,
            grid,
            width: 4,
            depth: 2,
            modes: 3,
            local_kernel: 0,
            activation: Activation::Gelu,
            coord_features: false,
            branch_layers: vec![],
            trunk_layers: vec![],
            basis_count: 1,
            heads: 1,
        }
    }

    /// Mean C₄ error of the seed-77 width-4 FNO on two fixed 16² samples.
    /// Measured once in float64 and frozen; deterministic reruns must
    /// reproduce it.
    const RANDOM_FNO_C4_ERROR: f64 = 0.0487444769129481;

    #[test]
    fn random_fno_audit_matches_its_frozen_golden_value() {
        let state = ModelState::<f64>::init(&fno_cfg(16), 77).unwrap();
        let samples = vec![field_from(30, 16), field_from(31, 16)];
        let err = c4_equivariance_error(&state, &samples).unwrap();
        eprintln!("random FNO C4 equivariance error: {err:.16}");
        assert!(err > 0.0, "a generic model is not exactly equivariant");
        assert!(
            (err - RANDOM_FNO_C4_ERROR).abs() < 1e-10,
            "got {err:.16}, frozen {RANDOM_FNO_C4_ERROR:.16}"
        );
    }

    #[test]
    fn audit_rejects_coordinate_features_and_empty_sample_lists() {
        let mut cfg = fno_cfg(16);
        cfg.coord_features = true;
        let state = ModelState::<f64>::init(&cfg, 1).unwrap();
        let err = c4_equivariance_error(&state, &[field_from(40, 16)]);
        assert!(err.unwrap_err().to_string().contains("coordinate"));

        let bare = ModelState::<f64>::init(&fno_cfg(16), 1).unwrap();
        assert!(c4_equivariance_error(&bare, &[]).is_err());
    }

    #[test]
    fn audit_mean_ignores_rotation_and_sample_order() {
        let state = ModelState::<f64>::init(&fno_cfg(16), 55).unwrap();
        let a = field_from(60, 16);
        let b = field_from(61, 16);
        let fwd = c4_equivariance_error(&state, &[a.clone(), b.clone()]).unwrap();
        let rev = c4_equivariance_error(&state, &[b, a]).unwrap();
        assert!((fwd - rev).abs() < 1e-12, "{fwd} vs {rev}");

        // Manual recomputation with the rotations enumerated 3, 2, 1.
        let mut total = 0.0;
        for sample in [&field_from(60, 16), &field_from(61, 16)] {
            let base_t = state.forward(&sample.to_tensor::<f64>()).unwrap();
            let base = Field2D::from_slice(16, 16, base_t.data()).unwrap();
            for r in [3i64, 2, 1] {
                let out_t = state
                    .forward(&c4_rotate(sample, r).unwrap().to_tensor::<f64>())
                    .unwrap();
                let out = Field2D::from_slice(16, 16, out_t.data()).unwrap();
                total += out.rel_l2(&c4_rotate(&base, r).unwrap()).unwrap();
            }
        }
        let manual = total / 6.0;
        assert!((fwd - manual).abs() < 1e-12, "{fwd} vs {manual}");
    }

    #[test]
    fn near_identity_model_audits_near_zero() {
        // A width-1 spectral passthrough reproduces its input up to FFT
        // round-off, so its audit error sits at machine scale.
        let n = 16;
        let mut cfg = fno_cfg(n);
        cfg.width = 1;
        cfg.depth = 1;
        cfg.modes = n / 2;
        cfg.activation = Activation::Identity;
        let mut state = ModelState::<f64>::init(&cfg, 3).unwrap();
        state.set_param("lift.weight", Tensor::from_f64_slice(&[1.0], &[1, 1, 1, 1]).unwrap()).unwrap();
        state.set_param("lift.bias", Tensor::zeros(&[1])).unwrap();
        state
            .set_param("project.weight", Tensor::from_f64_slice(&[1.0], &[1, 1, 1, 1]).unwrap())
            .unwrap();
        state.set_param("project.bias", Tensor::zeros(&[1])).unwrap();
        state
            .set_param("layer0.local1.weight", Tensor::zeros(&[1, 1, 1, 1]))
            .unwrap();
        state.set_param("layer0.local1.bias", Tensor::zeros(&[1])).unwrap();
        let spectral_shape = state.param("layer0.spectral").unwrap().shape().to_vec();
        let numel: usize = spectral_shape.iter().product();
        let mut ident = vec![0.0f64; numel];
        // Real plane (index 0 of the leading axis) to one: passthrough mix.
        for v in ident.iter_mut().take(numel / 2) {
            *v = 1.0;
        }
        state
            .set_param(
                "layer0.spectral",
                Tensor::from_f64_slice(&ident, &spectral_shape).unwrap(),
            )
            .unwrap();
        let audit = c4_audit(&state, &[field_from(70, n)]).unwrap();
        assert!(audit.mean_rel_l2 < 1e-12, "{}", audit.mean_rel_l2);
        assert_eq!(audit.samples, 1);
        assert_eq!(audit.rotations, 3);
        let json = serde_json::to_string(&audit).unwrap();
        assert!(json.contains("mean_rel_l2"));
    }

    #[test]
    fn spectrum_csv_has_one_row_per_bin() {
        let bins = radial_error_spectrum(&field_from(80, 16), &field_from(81, 16)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("spectrum.csv");
        spectrum_csv(&path, &bins).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.trim_end().split("\r\n").collect();
        assert_eq!(lines[0], "bin,count,error_energy");
        assert_eq!(lines.len(), bins.radii.len() + 1);
        let total: f64 = lines[1..]
            .iter()
            .map(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap())
            .sum();
        assert!((total - bins.total_energy()).abs() < 1e-12);
    }
}
