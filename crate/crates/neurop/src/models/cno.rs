//! Anti-aliased convolutional U-net.
//!
//! An encoder/decoder of 3×3 convolution blocks with additive skip
//! connections. Every nonlinearity is wrapped in a spectral resampling
//! sandwich — upsample ×2, apply the pointwise activation, downsample ×2 —
//! so the activation cannot fold energy past the grid's Nyquist band.

use crate::error::{Error, Result};
use crate::tensor::{Element, PadMode, Tensor};

use super::{bias_add, with_coords, Activation, Init, ModelConfig, ModelState, ParamSpec};

/// Applies `activation` between an upsample ×2 and a downsample ×2.
///
/// With the identity activation the sandwich reduces to the resampler's
/// round trip, which is the identity on any field the grid can represent.
pub fn anti_aliased_activation<T: Element>(
    x: &Tensor<T>,
    activation: Activation,
) -> Result<Tensor<T>> {
    let s = x.shape();
    let (h, w) = (s[s.len() - 2], s[s.len() - 1]);
    let up = x.spectral_resample((2 * h, 2 * w))?;
    let bent = activation.apply(&up)?;
    bent.spectral_resample((h, w))
}

pub(crate) fn specs(config: &ModelConfig) -> Vec<ParamSpec> {
    let w = config.width;
    let c_in = config.in_channels();
    let mut out = vec![
        ParamSpec::new("lift.weight", vec![w, c_in, 3, 3], Init::kaiming(9 * c_in)),
        ParamSpec::new("lift.bias", vec![w], Init::Zero),
    ];
    for i in 0..config.depth {
        out.push(ParamSpec::new(
            format!("enc{i}.weight"),
            vec![w, w, 3, 3],
            Init::kaiming(9 * w),
        ));
        out.push(ParamSpec::new(format!("enc{i}.bias"), vec![w], Init::Zero));
    }
    out.push(ParamSpec::new(
        "mid.weight",
        vec![w, w, 3, 3],
        Init::kaiming(9 * w),
    ));
    out.push(ParamSpec::new("mid.bias", vec![w], Init::Zero));
    for i in 0..config.depth {
        out.push(ParamSpec::new(
            format!("dec{i}.weight"),
            vec![w, w, 3, 3],
            Init::kaiming(9 * w),
        ));
        out.push(ParamSpec::new(format!("dec{i}.bias"), vec![w], Init::Zero));
    }
    out.push(ParamSpec::new(
        "project.weight",
        vec![1, w, 1, 1],
        Init::kaiming(w),
    ));
    out.push(ParamSpec::new("project.bias", vec![1], Init::Zero));
    out
}

fn conv_block<T: Element>(
    state: &ModelState<T>,
    name: &str,
    x: &Tensor<T>,
) -> Result<Tensor<T>> {
    let y = x.conv2d(state.param(&format!("{name}.weight"))?, PadMode::Zero)?;
    bias_add(&y, state.param(&format!("{name}.bias"))?)
}

pub(crate) fn forward<T: Element>(
    state: &ModelState<T>,
    input: &Tensor<T>,
) -> Result<Tensor<T>> {
    let cfg = state.config();
    let n = input.shape()[2];
    if n % (1 << cfg.depth) != 0 {
        return Err(Error::arg(
            "cno-forward",
            format!("grid {n} is not divisible by 2^depth = {}", 1usize << cfg.depth),
        ));
    }
    if (n >> cfg.depth) % 2 != 0 {
        return Err(Error::arg(
            "cno-forward",
            format!("coarsest grid {} must be even for spectral resampling", n >> cfg.depth),
        ));
    }
    let act = cfg.activation;

    let mut v = conv_block(state, "lift", &with_coords(cfg, input)?)?;
    let mut skips = Vec::with_capacity(cfg.depth);
    let mut extent = n;
    for i in 0..cfg.depth {
        v = conv_block(state, &format!("enc{i}"), &v)?;
        v = anti_aliased_activation(&v, act)?;
        skips.push(v.clone());
        extent /= 2;
        v = v.spectral_resample((extent, extent))?;
    }
    v = conv_block(state, "mid", &v)?;
    v = anti_aliased_activation(&v, act)?;
    for i in (0..cfg.depth).rev() {
        extent *= 2;
        v = v.spectral_resample((extent, extent))?;
        v = v.add(&skips[i])?;
        v = conv_block(state, &format!("dec{i}"), &v)?;
        v = anti_aliased_activation(&v, act)?;
    }
    v = v.conv2d(state.param("project.weight")?, PadMode::Zero)?;
    bias_add(&v, state.param("project.bias")?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ArchTag, ModelState};
    use crate::tensor::gradcheck::{check_gradients, probe_sum, random_tensor};

    fn cfg(grid: usize, width: usize, depth: usize) -> ModelConfig {
        ModelConfig {
            arch: ArchTag::Cno,
            grid,
            width,
            depth,
            modes: 1,
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
    fn identity_activation_makes_the_wrapper_an_identity() {
        let x = random_tensor(&[1, 2, 8, 8], 3, -1.0, 1.0);
        let y = anti_aliased_activation(&x, Activation::Identity).unwrap();
        for (got, want) in y.data().iter().zip(x.data()) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
    }

    #[test]
    fn wrapped_activation_differs_from_the_raw_one_on_rough_input() {
        // A non-band-limited activation response must change once it is
        // computed on the finer grid and projected back.
        let x = random_tensor(&[1, 1, 8, 8], 4, -1.0, 1.0);
        let wrapped = anti_aliased_activation(&x, Activation::Relu).unwrap();
        let raw = x.relu().unwrap();
        let diff: f64 = wrapped
            .data()
            .iter()
            .zip(raw.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff > 1e-6, "anti-aliasing should alter a kinked response");
    }

    #[test]
    fn zero_kernels_and_biases_give_the_zero_field() {
        let c = cfg(16, 3, 2);
        let mut state = ModelState::<f64>::init(&c, 6).unwrap();
        let zeroed: Vec<Tensor<f64>> = state
            .params()
            .iter()
            .map(|(_, t)| Tensor::zeros(t.shape()))
            .collect();
        state.replace_all(&zeroed).unwrap();
        let y = state
            .forward(&random_tensor(&[2, 1, 16, 16], 8, -1.0, 1.0))
            .unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_preserves_the_grid_and_is_deterministic() {
        let state = ModelState::<f64>::init(&cfg(16, 2, 2), 1).unwrap();
        let x = random_tensor(&[2, 1, 16, 16], 9, -1.0, 1.0);
        let a = state.forward(&x).unwrap();
        assert_eq!(a.shape(), &[2, 1, 16, 16]);
        let b = state.forward(&x).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn rejects_grids_the_pyramid_cannot_halve() {
        let state = ModelState::<f64>::init(&cfg(16, 2, 2), 1).unwrap();
        let err = state
            .forward(&random_tensor(&[1, 1, 10, 10], 2, -1.0, 1.0))
            .unwrap_err()
            .to_string();
        assert!(err.contains("divisible"), "{err}");
        let err = state
            .forward(&random_tensor(&[1, 1, 12, 12], 2, -1.0, 1.0))
            .unwrap_err()
            .to_string();
        assert!(err.contains("even"), "{err}");
    }

    #[test]
    fn gradient_matches_finite_differences_on_a_16_grid() {
        let state = ModelState::<f64>::init(&cfg(16, 2, 1), 13).unwrap();
        let x = random_tensor(&[1, 1, 16, 16], 14, -1.0, 1.0);
        let mut inputs = vec![x];
        inputs.extend(state.params().iter().map(|(_, t)| t.detach()));
        let f = |t: &[Tensor<f64>]| {
            let mut s = state.clone();
            s.replace_all(&t[1..])?;
            probe_sum(&s.forward(&t[0])?, 901)
        };
        let err = check_gradients(&f, &inputs, 1e-6, 64).unwrap();
        assert!(err < 1e-5, "finite-difference mismatch {err:.3e}");
    }

    #[test]
    fn parameter_count_matches_the_block_sum() {
        let (w, depth) = (3usize, 2usize);
        let state = ModelState::<f64>::init(&cfg(16, w, depth), 0).unwrap();
        let convs = 1 + depth + 1 + depth; // lift + encoders + mid + decoders
        let expected = (9 * w * 1 + w) // lift on one input channel
            + (convs - 1) * (9 * w * w + w)
            + (w + 1); // 1×1 projection
        assert_eq!(state.param_count(), expected);
    }
}
