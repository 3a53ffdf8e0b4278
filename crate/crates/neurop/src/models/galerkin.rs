//! Linear-attention encoder.
//!
//! The attention kernel contracts key and value first —
//! `q · (normalize(k)ᵀ · normalize(v)) / N` — so its cost is `O(N·d²)`
//! instead of the `O(N²·d)` of the score-matrix grouping. Both groupings
//! agree by associativity; no softmax is involved. `normalize` is a
//! per-column standardization over the `N` axis.
//!
//! The model flattens the field into `N = n²` tokens, lifts them with a
//! pointwise linear map, and applies residual attention and feed-forward
//! blocks before a pointwise projection back to one channel.

use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

use super::{bias_add_last, with_coords, Init, ModelConfig, ModelState, ParamSpec};

/// Per-column standardization over the token axis:
/// `(x - mean) / sqrt(var + 1e-5)` columnwise.
pub(crate) fn standardize<T: Element>(x: &Tensor<T>, axis: usize) -> Result<Tensor<T>> {
    let mean = x.mean_axes(&[axis])?;
    let centered = x.sub(&mean.broadcast_to(x.shape())?)?;
    let var = centered.mul(&centered)?.mean_axes(&[axis])?;
    let std = var.add_scalar(T::of(1e-5))?.sqrt()?;
    centered.div(&std.broadcast_to(x.shape())?)
}

/// Galerkin-style linear attention on `[N, d]` or batched `[b, N, d]`
/// stacks: `q · (normalize(k)ᵀ · normalize(v)) / N`.
pub fn galerkin_attention<T: Element>(
    q: &Tensor<T>,
    k: &Tensor<T>,
    v: &Tensor<T>,
) -> Result<Tensor<T>> {
    if q.shape() != k.shape() || k.shape() != v.shape() {
        return Err(Error::shape(
            "galerkin-attention",
            format!("q {:?}, k {:?}, v {:?}", q.shape(), k.shape(), v.shape()),
        ));
    }
    match q.rank() {
        2 => {
            let n = q.shape()[0];
            let kn = standardize(k, 0)?;
            let vn = standardize(v, 0)?;
            let kv = kn.permute(&[1, 0])?.matmul(&vn)?; // [d, d]
            q.matmul(&kv)?.scale(T::of(1.0 / n as f64))
        }
        3 => {
            let n = q.shape()[1];
            let kn = standardize(k, 1)?;
            let vn = standardize(v, 1)?;
            let kv = kn.permute(&[0, 2, 1])?.matmul(&vn)?; // [b, d, d]
            q.matmul(&kv)?.scale(T::of(1.0 / n as f64))
        }
        r => Err(Error::shape(
            "galerkin-attention",
            format!("want rank 2 or 3, got rank {r}"),
        )),
    }
}

pub(crate) fn specs(config: &ModelConfig) -> Vec<ParamSpec> {
    let w = config.width;
    let c_in = config.in_channels();
    let mut out = vec![
        ParamSpec::new("lift.weight", vec![c_in, w], Init::kaiming(c_in)),
        ParamSpec::new("lift.bias", vec![w], Init::Zero),
    ];
    for i in 0..config.depth {
        for head in ["wq", "wk", "wv", "wo"] {
            out.push(ParamSpec::new(
                format!("block{i}.{head}"),
                vec![w, w],
                Init::kaiming(w),
            ));
        }
        out.push(ParamSpec::new(
            format!("block{i}.ff1.weight"),
            vec![w, w],
            Init::kaiming(w),
        ));
        out.push(ParamSpec::new(format!("block{i}.ff1.bias"), vec![w], Init::Zero));
        out.push(ParamSpec::new(
            format!("block{i}.ff2.weight"),
            vec![w, w],
            Init::kaiming(w),
        ));
        out.push(ParamSpec::new(format!("block{i}.ff2.bias"), vec![w], Init::Zero));
    }
    out.push(ParamSpec::new(
        "project.weight",
        vec![w, 1],
        Init::kaiming(w),
    ));
    out.push(ParamSpec::new("project.bias", vec![1], Init::Zero));
    out
}

/// Splits the width into `heads` contiguous column groups, attends per
/// group, and reassembles the full-width result.
fn multi_head_attention<T: Element>(
    q: &Tensor<T>,
    k: &Tensor<T>,
    v: &Tensor<T>,
    heads: usize,
) -> Result<Tensor<T>> {
    if heads == 1 {
        return galerkin_attention(q, k, v);
    }
    let s = q.shape().to_vec();
    let (b, n, w) = (s[0], s[1], s[2]);
    let dh = w / heads;
    let mut out: Option<Tensor<T>> = None;
    for h in 0..heads {
        let range = [(0, b), (0, n), (h * dh, dh)];
        let a = galerkin_attention(&q.slice(&range)?, &k.slice(&range)?, &v.slice(&range)?)?;
        let placed = a.pad(
            &[0, 0, h * dh],
            &[0, 0, w - (h + 1) * dh],
            crate::tensor::PadMode::Zero,
        )?;
        out = Some(match out {
            None => placed,
            Some(acc) => acc.add(&placed)?,
        });
    }
    Ok(out.expect("heads >= 1 by validation"))
}

pub(crate) fn forward<T: Element>(
    state: &ModelState<T>,
    input: &Tensor<T>,
) -> Result<Tensor<T>> {
    let cfg = state.config();
    let s = input.shape();
    let (b, n) = (s[0], s[2]);
    let tokens = with_coords(cfg, input)?
        .reshape(&[b, cfg.in_channels(), n * n])?
        .permute(&[0, 2, 1])?; // [b, N, c_in]

    let mut x = tokens.matmul(state.param("lift.weight")?)?;
    x = bias_add_last(&x, state.param("lift.bias")?)?;

    for i in 0..cfg.depth {
        let q = x.matmul(state.param(&format!("block{i}.wq"))?)?;
        let k = x.matmul(state.param(&format!("block{i}.wk"))?)?;
        let v = x.matmul(state.param(&format!("block{i}.wv"))?)?;
        let a = multi_head_attention(&q, &k, &v, cfg.heads)?;
        x = x.add(&a.matmul(state.param(&format!("block{i}.wo"))?)?)?;

        let mut h = x.matmul(state.param(&format!("block{i}.ff1.weight"))?)?;
        h = bias_add_last(&h, state.param(&format!("block{i}.ff1.bias"))?)?;
        h = cfg.activation.apply(&h)?;
        h = h.matmul(state.param(&format!("block{i}.ff2.weight"))?)?;
        h = bias_add_last(&h, state.param(&format!("block{i}.ff2.bias"))?)?;
        x = x.add(&h)?;
    }

    let y = x.matmul(state.param("project.weight")?)?;
    let y = bias_add_last(&y, state.param("project.bias")?)?;
    y.permute(&[0, 2, 1])?.reshape(&[b, 1, n, n])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Activation, ArchTag, ModelState};
    use crate::tensor::gradcheck::random_tensor;

    #[test]
    fn both_association_orders_agree_to_1e12() {
        let q = random_tensor(&[8, 4], 1, -1.0, 1.0);
        let k = random_tensor(&[8, 4], 2, -1.0, 1.0);
        let v = random_tensor(&[8, 4], 3, -1.0, 1.0);
        let fast = galerkin_attention(&q, &k, &v).unwrap();

        // O(N²) grouping: (q · normalize(k)ᵀ) · normalize(v) / N.
        let kn = standardize(&k, 0).unwrap();
        let vn = standardize(&v, 0).unwrap();
        let scores = q.matmul(&kn.permute(&[1, 0]).unwrap()).unwrap(); // [N, N]
        let slow = scores.matmul(&vn).unwrap().scale(1.0 / 8.0).unwrap();

        for (a, b) in fast.data().iter().zip(slow.data()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn zero_values_give_zero_output() {
        let q = random_tensor(&[6, 3], 4, -1.0, 1.0);
        let k = random_tensor(&[6, 3], 5, -1.0, 1.0);
        let v = Tensor::<f64>::zeros(&[6, 3]);
        let out = galerkin_attention(&q, &k, &v).unwrap();
        assert!(out.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_token_contracts_the_standardized_rank_one_kernel() {
        // With N = 1 the output is q·(normalize(k)ᵀ·normalize(v)); the
        // standardization of a single row is identically zero, so the
        // contraction collapses to the zero field.
        let q = random_tensor(&[1, 4], 6, -1.0, 1.0);
        let k = random_tensor(&[1, 4], 7, -1.0, 1.0);
        let v = random_tensor(&[1, 4], 8, -1.0, 1.0);
        let out = galerkin_attention(&q, &k, &v).unwrap();
        let kn = standardize(&k, 0).unwrap();
        let vn = standardize(&v, 0).unwrap();
        let oracle = q.matmul(&kn.permute(&[1, 0]).unwrap().matmul(&vn).unwrap()).unwrap();
        for (a, b) in out.data().iter().zip(oracle.data()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(out.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn batched_and_flat_forms_agree() {
        let q = random_tensor(&[5, 3], 9, -1.0, 1.0);
        let k = random_tensor(&[5, 3], 10, -1.0, 1.0);
        let v = random_tensor(&[5, 3], 11, -1.0, 1.0);
        let flat = galerkin_attention(&q, &k, &v).unwrap();
        let lift = |t: &Tensor<f64>| t.reshape(&[1, 5, 3]).unwrap();
        let batched = galerkin_attention(&lift(&q), &lift(&k), &lift(&v)).unwrap();
        for (a, b) in flat.data().iter().zip(batched.data()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_mismatched_shapes_and_ranks() {
        let q = random_tensor(&[4, 2], 12, -1.0, 1.0);
        let k = random_tensor(&[4, 3], 13, -1.0, 1.0);
        assert!(galerkin_attention(&q, &k, &k).is_err());
        let flat = random_tensor(&[4], 14, -1.0, 1.0);
        assert!(galerkin_attention(&flat, &flat, &flat).is_err());
    }

    fn cfg(grid: usize, width: usize, depth: usize, heads: usize) -> crate::models::ModelConfig {
        crate::models::ModelConfig {
            arch: ArchTag::Gt,
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
            heads,
        }
    }

    #[test]
    fn encoder_preserves_shape_and_determinism() {
        let state = ModelState::<f64>::init(&cfg(8, 6, 2, 1), 3).unwrap();
        let x = random_tensor(&[2, 1, 8, 8], 15, -1.0, 1.0);
        let a = state.forward(&x).unwrap();
        assert_eq!(a.shape(), &[2, 1, 8, 8]);
        assert_eq!(a.data(), state.forward(&x).unwrap().data());
    }

    #[test]
    fn multi_head_splitting_covers_the_width() {
        let one = ModelState::<f64>::init(&cfg(8, 6, 1, 1), 4).unwrap();
        let three = ModelState::<f64>::init(&cfg(8, 6, 1, 3), 4).unwrap();
        let x = random_tensor(&[1, 1, 8, 8], 16, -1.0, 1.0);
        let a = one.forward(&x).unwrap();
        let b = three.forward(&x).unwrap();
        assert_eq!(a.shape(), b.shape());
        // Same parameters, different attention partition: outputs differ.
        let diff: f64 = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(diff > 1e-9, "head partition should matter");
    }

    #[test]
    fn parameter_count_matches_the_block_sum() {
        let (w, depth) = (6usize, 2usize);
        let state = ModelState::<f64>::init(&cfg(8, w, depth, 1), 0).unwrap();
        let expected = (w + w) + depth * (4 * w * w + 2 * (w * w + w)) + (w + 1);
        assert_eq!(state.param_count(), expected);
    }
}
