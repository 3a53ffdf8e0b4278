//! Spectral-convolution operator.
//!
//! Lift (1×1 convolution) → `depth` spectral layers → projection head.
//! Each spectral layer adds three paths: a per-mode complex linear map on
//! the retained frequency band, a pointwise 1×1 bypass, and — when
//! `local_kernel` is a positive odd `k` — an extra `k`×`k` convolution.
//! Setting those extra kernels to zero reproduces the plain variant
//! bit-for-bit because shared parameters share their random streams.

use crate::error::{Error, Result};
use crate::tensor::{Element, PadMode, Tensor};

use super::{bias_add, with_coords, Init, ModelConfig, ModelState, ParamSpec};

/// Parameter layout: lift, per-layer spectral + local blocks, projection.
pub(crate) fn specs(config: &ModelConfig) -> Vec<ParamSpec> {
    let (w, m, k) = (config.width, config.modes, config.local_kernel);
    let c_in = config.in_channels();
    let band = 2 * m;
    let mut out = vec![
        ParamSpec::new("lift.weight", vec![w, c_in, 1, 1], Init::kaiming(c_in)),
        ParamSpec::new("lift.bias", vec![w], Init::Zero),
    ];
    for i in 0..config.depth {
        out.push(ParamSpec::new(
            format!("layer{i}.spectral"),
            vec![2, w, w, band, band],
            Init::spectral(w, w),
        ));
        out.push(ParamSpec::new(
            format!("layer{i}.local1.weight"),
            vec![w, w, 1, 1],
            Init::kaiming(w),
        ));
        out.push(ParamSpec::new(
            format!("layer{i}.local1.bias"),
            vec![w],
            Init::Zero,
        ));
        if k > 0 {
            out.push(ParamSpec::new(
                format!("layer{i}.local{k}.weight"),
                vec![w, w, k, k],
                Init::kaiming(w * k * k),
            ));
            out.push(ParamSpec::new(
                format!("layer{i}.local{k}.bias"),
                vec![w],
                Init::Zero,
            ));
        }
    }
    out.push(ParamSpec::new(
        "project.weight",
        vec![1, w, 1, 1],
        Init::kaiming(w),
    ));
    out.push(ParamSpec::new("project.bias", vec![1], Init::Zero));
    out
}

pub(crate) fn forward<T: Element>(
    state: &ModelState<T>,
    input: &Tensor<T>,
) -> Result<Tensor<T>> {
    let cfg = state.config();
    let n = input.shape()[2];
    if 2 * cfg.modes > n {
        return Err(Error::arg(
            "fno-forward",
            format!(
                "modes {} exceeds the Nyquist half-band of a {n}-point axis",
                cfg.modes
            ),
        ));
    }
    let m = cfg.modes;
    let k = cfg.local_kernel;

    let mut v = with_coords(cfg, input)?;
    v = v.conv2d(state.param("lift.weight")?, PadMode::Zero)?;
    v = bias_add(&v, state.param("lift.bias")?)?;

    for i in 0..cfg.depth {
        let spectral = v
            .fft2()?
            .mode_mix(state.param(&format!("layer{i}.spectral"))?, (m, m))?
            .ifft2()?;
        let local1 = v.conv2d(state.param(&format!("layer{i}.local1.weight"))?, PadMode::Zero)?;
        let mut h = spectral.add(&local1)?;
        if k > 0 {
            let local_k =
                v.conv2d(state.param(&format!("layer{i}.local{k}.weight"))?, PadMode::Zero)?;
            h = h.add(&local_k)?;
        }
        h = bias_add(&h, state.param(&format!("layer{i}.local1.bias"))?)?;
        if k > 0 {
            h = bias_add(&h, state.param(&format!("layer{i}.local{k}.bias"))?)?;
        }
        v = cfg.activation.apply(&h)?;
    }

    v = v.conv2d(state.param("project.weight")?, PadMode::Zero)?;
    bias_add(&v, state.param("project.bias")?)
}
