//! Transform-once operator.
//!
//! The input is moved to frequency space exactly once, pushed through a
//! stack of per-mode complex channel-mixing layers with the nonlinearity
//! applied directly to the real/imaginary coefficient planes, and moved
//! back with exactly one inverse transform. Tests count the transforms
//! from the computation record to pin the architecture contract.

use crate::error::{Error, Result};
use crate::tensor::{ComplexTensor, Element, Tensor};

use super::{Init, ModelConfig, ModelState, ParamSpec};

/// Channel sizes of the mixing stack: `1 → width → … → width → 1` with
/// `depth + 1` maps (`depth = 0` collapses to a single `1 → 1` map).
fn channel_dims(config: &ModelConfig) -> Vec<usize> {
    let mut dims = vec![1usize];
    for _ in 0..config.depth.saturating_sub(1) {
        dims.push(config.width);
    }
    if config.depth > 0 {
        dims.push(config.width);
    }
    dims.push(1);
    dims
}

pub(crate) fn specs(config: &ModelConfig) -> Vec<ParamSpec> {
    let band = 2 * config.modes;
    channel_dims(config)
        .windows(2)
        .enumerate()
        .map(|(i, pair)| {
            let (c_in, c_out) = (pair[0], pair[1]);
            ParamSpec::new(
                format!("mix{i}"),
                vec![2, c_out, c_in, band, band],
                Init::spectral(c_in, c_out),
            )
        })
        .collect()
}

pub(crate) fn forward<T: Element>(
    state: &ModelState<T>,
    input: &Tensor<T>,
) -> Result<Tensor<T>> {
    let cfg = state.config();
    let n = input.shape()[2];
    if 2 * cfg.modes > n {
        return Err(Error::arg(
            "t1-forward",
            format!(
                "modes {} exceeds the Nyquist half-band of a {n}-point axis",
                cfg.modes
            ),
        ));
    }
    let maps = channel_dims(cfg).len() - 1;
    let mut spec = input.fft2()?;
    for i in 0..maps {
        spec = spec.mode_mix(state.param(&format!("mix{i}"))?, (cfg.modes, cfg.modes))?;
        if i + 1 < maps {
            // The nonlinearity acts on the raw coefficient planes.
            let bent = cfg.activation.apply(spec.as_raw())?;
            spec = ComplexTensor::from_raw(bent)?;
        }
    }
    spec.ifft2()
}

#[cfg(test)]
mod tests {
    use num_complex::Complex;

    use crate::fft;
    use crate::models::{Activation, ArchTag, ModelConfig, ModelState};
    use crate::tensor::gradcheck::{check_gradients, probe_sum, random_tensor};
    use crate::tensor::{retained_indices, PrimitiveKind, Tensor};

    fn cfg(grid: usize, width: usize, depth: usize, modes: usize) -> ModelConfig {
        ModelConfig {
            arch: ArchTag::T1,
            grid,
            width,
            depth,
            modes,
            local_kernel: 0,
            activation: Activation::Gelu,
            coord_features: false,
            branch_layers: vec![],
            trunk_layers: vec![],
            basis_count: 1,
            heads: 1,
        }
    }

    #[test]
    fn exactly_one_forward_and_one_inverse_transform() {
        let state = ModelState::<f64>::init(&cfg(16, 3, 3, 4), 2).unwrap();
        let x = random_tensor(&[2, 1, 16, 16], 5, -1.0, 1.0).tracked();
        let y = state.forward(&x).unwrap();
        let record = y.record();
        assert_eq!(record.count(PrimitiveKind::Fft2), 1, "forward transforms");
        assert_eq!(record.count(PrimitiveKind::Ifft2), 1, "inverse transforms");
        assert_eq!(record.count(PrimitiveKind::ModeMix), 4, "mixing layers");
    }

    #[test]
    fn identity_map_truncates_to_the_retained_band() {
        let n = 16;
        let modes = 3;
        let band = 2 * modes;
        let mut c = cfg(n, 1, 0, modes);
        c.activation = Activation::Identity;
        let mut state = ModelState::<f64>::init(&c, 0).unwrap();
        let mut ident = vec![0.0; 2 * band * band];
        for r in 0..band * band {
            ident[r] = 1.0;
        }
        state
            .set_param("mix0", Tensor::from_vec(ident, &[2, 1, 1, band, band]).unwrap())
            .unwrap();

        let x = random_tensor(&[1, 1, n, n], 40, -1.0, 1.0);
        let y = state.forward(&x).unwrap();

        let mut spec = fft::fft2(x.data(), n, n);
        let keep = retained_indices(modes, n);
        for r in 0..n {
            for cix in 0..n {
                if !(keep.contains(&r) && keep.contains(&cix)) {
                    spec[r * n + cix] = Complex::new(0.0, 0.0);
                }
            }
        }
        let want: Vec<f64> = fft::ifft2(&spec, n, n).iter().map(|z| z.re).collect();
        for (got, want) in y.data().iter().zip(&want) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
    }

    #[test]
    fn gradient_matches_finite_differences_on_a_tiny_instance() {
        let n = 8;
        let state = ModelState::<f64>::init(&cfg(n, 2, 1, 2), 7).unwrap();
        let x = random_tensor(&[1, 1, n, n], 71, -1.0, 1.0);
        let mut inputs = vec![x];
        inputs.extend(state.params().iter().map(|(_, t)| t.detach()));
        let f = |t: &[Tensor<f64>]| {
            let mut s = state.clone();
            s.replace_all(&t[1..])?;
            probe_sum(&s.forward(&t[0])?, 900)
        };
        let err = check_gradients(&f, &inputs, 1e-6, 256).unwrap();
        assert!(err < 1e-5, "finite-difference mismatch {err:.3e}");
    }

    #[test]
    fn forward_is_deterministic_and_band_limited() {
        let n = 16;
        let state = ModelState::<f64>::init(&cfg(n, 2, 2, 2), 9).unwrap();
        let x = random_tensor(&[1, 1, n, n], 90, -1.0, 1.0);
        let a = state.forward(&x).unwrap();
        let b = state.forward(&x).unwrap();
        assert_eq!(a.data(), b.data());

        // Taking the real part of the inverse transform symmetrizes the
        // spectrum, so the output support is |k| <= modes on both axes.
        let spec = fft::fft2(a.data(), n, n);
        for r in 0..n {
            for c in 0..n {
                let inside =
                    fft::signed_freq(r, n).abs() <= 2 && fft::signed_freq(c, n).abs() <= 2;
                if !inside {
                    assert!(spec[r * n + c].norm() < 1e-9, "energy at ({r}, {c})");
                }
            }
        }
    }

    #[test]
    fn depth_zero_uses_a_single_scalar_map() {
        let state = ModelState::<f64>::init(&cfg(8, 5, 0, 2), 0).unwrap();
        assert_eq!(state.params().len(), 1);
        assert_eq!(state.param("mix0").unwrap().shape(), &[2, 1, 1, 4, 4]);
    }
}
