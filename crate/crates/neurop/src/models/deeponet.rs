//! Branch/trunk dot-product operator.
//!
//! The branch network maps a discretized input field to `p` coefficients;
//! the trunk network maps a query coordinate to `p` basis values; the
//! prediction at a coordinate is the dot product of the two heads. There
//! is no output bias, so every prediction lies in the span of the trunk
//! basis — rank at most `p` over any set of inputs and query points.

use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

use super::{mlp_forward, Init, ModelConfig, ModelState, ParamSpec};

fn mlp_specs(prefix: &str, dims: &[usize], out: &mut Vec<ParamSpec>) {
    for (i, pair) in dims.windows(2).enumerate() {
        let (d_in, d_out) = (pair[0], pair[1]);
        out.push(ParamSpec::new(
            format!("{prefix}{i}.weight"),
            vec![d_in, d_out],
            Init::kaiming(d_in),
        ));
        out.push(ParamSpec::new(
            format!("{prefix}{i}.bias"),
            vec![d_out],
            Init::Zero,
        ));
    }
}

/// Parameter layout: branch stack then trunk stack.
pub(crate) fn specs(config: &ModelConfig) -> Vec<ParamSpec> {
    let p = config.basis_count;
    let mut branch_dims = vec![config.grid * config.grid];
    branch_dims.extend_from_slice(&config.branch_layers);
    branch_dims.push(p);
    let mut trunk_dims = vec![2];
    trunk_dims.extend_from_slice(&config.trunk_layers);
    trunk_dims.push(p);

    let mut out = Vec::new();
    mlp_specs("branch", &branch_dims, &mut out);
    mlp_specs("trunk", &trunk_dims, &mut out);
    out
}

fn stack<'a, T: Element>(
    state: &'a ModelState<T>,
    prefix: &str,
    layers: usize,
) -> Result<Vec<(&'a Tensor<T>, &'a Tensor<T>)>> {
    (0..layers)
        .map(|i| {
            Ok((
                state.param(&format!("{prefix}{i}.weight"))?,
                state.param(&format!("{prefix}{i}.bias"))?,
            ))
        })
        .collect()
}

/// Evaluates the operator at an explicit list of query coordinates.
///
/// `input` is a `[batch, 1, n, n]` field batch with `n` equal to the
/// configured grid; `coords` are points of the closed unit square. The
/// result is `[batch, len(coords)]`.
pub fn deeponet_evaluate<T: Element>(
    state: &ModelState<T>,
    input: &Tensor<T>,
    coords: &[[f64; 2]],
) -> Result<Tensor<T>> {
    let cfg = state.config();
    let s = input.shape();
    if s.len() != 4 || s[1] != 1 || s[2] != cfg.grid || s[3] != cfg.grid {
        return Err(Error::shape(
            "deeponet",
            format!("want [batch, 1, {0}, {0}], got {s:?}", cfg.grid),
        ));
    }
    for &[x, y] in coords {
        if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
            return Err(Error::arg(
                "deeponet",
                format!("query point ({x}, {y}) lies outside the unit square"),
            ));
        }
    }
    let (b, n) = (s[0], s[2]);
    let branch_layers = stack(state, "branch", cfg.branch_layers.len() + 1)?;
    let trunk_layers = stack(state, "trunk", cfg.trunk_layers.len() + 1)?;

    let flat = input.reshape(&[b, n * n])?;
    let coeff = mlp_forward(&flat, &branch_layers, cfg.activation)?; // [b, p]

    let mut pts = Vec::with_capacity(coords.len() * 2);
    for &[x, y] in coords {
        pts.push(T::of(x));
        pts.push(T::of(y));
    }
    let pts = Tensor::from_vec(pts, &[coords.len(), 2])?;
    let basis = mlp_forward(&pts, &trunk_layers, cfg.activation)?; // [q, p]

    coeff.matmul(&basis.permute(&[1, 0])?) // [b, q]
}

/// Grid forward: queries every vertex `(i/(n-1), j/(n-1))` of the input's
/// own grid and reshapes back to a field batch.
pub(crate) fn forward<T: Element>(
    state: &ModelState<T>,
    input: &Tensor<T>,
) -> Result<Tensor<T>> {
    let n = input.shape()[2];
    let b = input.shape()[0];
    let denom = (n - 1).max(1) as f64;
    let mut coords = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            coords.push([i as f64 / denom, j as f64 / denom]);
        }
    }
    deeponet_evaluate(state, input, &coords)?.reshape(&[b, 1, n, n])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Activation, ArchTag, ModelConfig, ModelState};
    use crate::tensor::gradcheck::random_tensor;

    fn cfg(grid: usize, branch: Vec<usize>, trunk: Vec<usize>, p: usize) -> ModelConfig {
        ModelConfig {
            arch: ArchTag::Deeponet,
            grid,
            width: 1,
            depth: 1,
            modes: 1,
            local_kernel: 0,
            activation: Activation::Gelu,
            coord_features: false,
            branch_layers: branch,
            trunk_layers: trunk,
            basis_count: p,
            heads: 1,
        }
    }

    #[test]
    fn rank_one_head_makes_every_two_by_two_minor_vanish() {
        let n = 8;
        let state = ModelState::<f64>::init(&cfg(n, vec![6], vec![6], 1), 3).unwrap();
        let inputs = random_tensor(&[3, 1, n, n], 9, -1.0, 1.0);
        let out = state.forward(&inputs).unwrap().reshape(&[3, n * n]).unwrap();
        let d = out.data();
        let scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
        for r1 in 0..3 {
            for r2 in (r1 + 1)..3 {
                for c1 in 0..n * n {
                    for c2 in (c1 + 1)..n * n {
                        let minor = d[r1 * n * n + c1] * d[r2 * n * n + c2]
                            - d[r1 * n * n + c2] * d[r2 * n * n + c1];
                        assert!(
                            (minor / (scale * scale)).abs() < 1e-6,
                            "2x2 minor {minor} at ({r1},{r2})x({c1},{c2})"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn output_rank_is_bounded_by_p() {
        // With p = 2 every 3×3 minor of the outputs-by-points matrix is
        // singular.
        let n = 8;
        let state = ModelState::<f64>::init(&cfg(n, vec![5], vec![5], 2), 8).unwrap();
        let inputs = random_tensor(&[3, 1, n, n], 10, -1.0, 1.0);
        let out = state.forward(&inputs).unwrap().reshape(&[3, n * n]).unwrap();
        let d = out.data();
        let scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
        for c1 in 0..6 {
            for c2 in (c1 + 1)..7 {
                for c3 in (c2 + 1)..8 {
                    let det = d[c1] * (d[n * n + c2] * d[2 * n * n + c3] - d[n * n + c3] * d[2 * n * n + c2])
                        - d[c2] * (d[n * n + c1] * d[2 * n * n + c3] - d[n * n + c3] * d[2 * n * n + c1])
                        + d[c3] * (d[n * n + c1] * d[2 * n * n + c2] - d[n * n + c2] * d[2 * n * n + c1]);
                    assert!(
                        (det / (scale * scale * scale)).abs() < 1e-6,
                        "3x3 minor {det} at columns ({c1},{c2},{c3})"
                    );
                }
            }
        }
    }

    #[test]
    fn zero_branch_coefficients_give_the_zero_field() {
        let n = 8;
        let mut state = ModelState::<f64>::init(&cfg(n, vec![4], vec![4], 3), 1).unwrap();
        state
            .set_param("branch0.weight", Tensor::zeros(&[n * n, 4]))
            .unwrap();
        state.set_param("branch1.weight", Tensor::zeros(&[4, 3])).unwrap();
        let out = state
            .forward(&random_tensor(&[2, 1, n, n], 12, -1.0, 1.0))
            .unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_branch_is_additive_over_inputs() {
        // No hidden branch layers and a zero bias make the branch head
        // linear, so outputs add when inputs add.
        let n = 8;
        let state = ModelState::<f64>::init(&cfg(n, vec![], vec![7], 4), 21).unwrap();
        assert!(state
            .param("branch0.bias")
            .unwrap()
            .data()
            .iter()
            .all(|&v| v == 0.0));
        let a = random_tensor(&[1, 1, n, n], 13, -1.0, 1.0);
        let b = random_tensor(&[1, 1, n, n], 14, -1.0, 1.0);
        let sum = a.add(&b).unwrap();
        let ga = state.forward(&a).unwrap();
        let gb = state.forward(&b).unwrap();
        let gsum = state.forward(&sum).unwrap();
        let scale = gsum.data().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
        for ((x, y), z) in ga.data().iter().zip(gb.data()).zip(gsum.data()) {
            assert!(((x + y - z) / scale).abs() < 1e-12, "{x} + {y} vs {z}");
        }
    }

    #[test]
    fn rejects_query_points_outside_the_unit_square() {
        let n = 8;
        let state = ModelState::<f64>::init(&cfg(n, vec![4], vec![4], 2), 2).unwrap();
        let x = random_tensor(&[1, 1, n, n], 15, -1.0, 1.0);
        let err = deeponet_evaluate(&state, &x, &[[0.5, 1.2]])
            .unwrap_err()
            .to_string();
        assert!(err.contains("unit square"), "{err}");
        deeponet_evaluate(&state, &x, &[[0.0, 1.0], [0.25, 0.75]]).unwrap();
    }

    #[test]
    fn rejects_inputs_on_the_wrong_grid() {
        let state = ModelState::<f64>::init(&cfg(8, vec![4], vec![4], 2), 2).unwrap();
        let x = random_tensor(&[1, 1, 16, 16], 16, -1.0, 1.0);
        assert!(state.forward(&x).is_err());
    }

    #[test]
    fn parameter_count_matches_the_dense_layer_sum() {
        let n = 8;
        let state = ModelState::<f64>::init(&cfg(n, vec![10, 6], vec![5], 3), 0).unwrap();
        let branch = (n * n * 10 + 10) + (10 * 6 + 6) + (6 * 3 + 3);
        let trunk = (2 * 5 + 5) + (5 * 3 + 3);
        assert_eq!(state.param_count(), branch + trunk);
    }
}
