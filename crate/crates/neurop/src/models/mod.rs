//! The neural-operator zoo.
//!
//! Five architectures share one parameter-store abstraction,
//! [`ModelState`]: a spectral operator with optional local convolutions
//! ([`fno`]), a branch/trunk dot-product network ([`deeponet`]), a
//! transform-once frequency-domain network ([`t1`]), an anti-aliased
//! convolutional U-net ([`cno`]), and a linear-attention encoder
//! ([`galerkin`]).
//!
//! Every parameter tensor is initialized from its own deterministic random
//! stream derived from `(seed, parameter name)`. Two configurations that
//! share a parameter name therefore share its initial value bit-for-bit —
//! which is what makes "zero out the extra kernels and recover the smaller
//! model exactly" checks possible.

pub mod cno;
pub mod deeponet;
pub mod fno;
pub mod galerkin;
pub mod t1;

pub use galerkin::galerkin_attention;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::storage::{Checkpoint, CheckpointMeta, ParamBlock};
use crate::tensor::{Element, PadMode, Tensor};

/// Architecture selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArchTag {
    /// Spectral-convolution operator (with optional local residual kernels).
    Fno,
    /// Branch/trunk dot-product operator.
    Deeponet,
    /// Single forward + single inverse transform, mixing in frequency space.
    T1,
    /// Anti-aliased convolutional U-net.
    Cno,
    /// Galerkin-attention encoder.
    Gt,
}

impl ArchTag {
    pub fn name(&self) -> &'static str {
        match self {
            ArchTag::Fno => "fno",
            ArchTag::Deeponet => "deeponet",
            ArchTag::T1 => "t1",
            ArchTag::Cno => "cno",
            ArchTag::Gt => "gt",
        }
    }
}

/// Pointwise nonlinearity selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Gelu,
    Relu,
    /// No-op; useful for linear-model probes.
    Identity,
}

impl Activation {
    pub fn apply<T: Element>(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        match self {
            Activation::Gelu => x.gelu(),
            Activation::Relu => x.relu(),
            Activation::Identity => Ok(x.clone()),
        }
    }
}

/// Full static description of a model.
///
/// `modes` is the half-band per axis: a spectral layer retains the `modes`
/// lowest positive and `modes` lowest negative frequencies of each axis,
/// i.e. `2*modes` frequency rows per axis. "Full modes" on an `N` grid is
/// `modes = N/2`, which retains every frequency including the Nyquist row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub arch: ArchTag,
    /// Training grid extent `N` (fields are `N`×`N`).
    pub grid: usize,
    /// Hidden channel count.
    pub width: usize,
    /// Layer count (spectral layers, mixing layers, U-net levels, or
    /// attention blocks, depending on `arch`).
    pub depth: usize,
    /// Retained half-band per axis for spectral layers.
    pub modes: usize,
    /// Local residual kernel extent for the spectral operator: 0 keeps only
    /// the 1×1 bypass, an odd `k` adds a `k`×`k` convolution beside it.
    pub local_kernel: usize,
    pub activation: Activation,
    /// Append the two coordinate grids as extra input channels.
    pub coord_features: bool,
    /// Hidden layer sizes of the branch network (`deeponet`).
    pub branch_layers: Vec<usize>,
    /// Hidden layer sizes of the trunk network (`deeponet`).
    pub trunk_layers: Vec<usize>,
    /// Basis count `p` shared by branch and trunk heads (`deeponet`).
    pub basis_count: usize,
    /// Attention head count (`gt`); head dimension is `width / heads`.
    pub heads: usize,
}

impl ModelConfig {
    /// A ready-to-train configuration for one of the model tags:
    /// `fno`, `fno3x3`, `fno-full`, `deeponet`, `t1`, `cno`, `gt`.
    pub fn preset(tag: &str, grid: usize) -> Result<ModelConfig> {
        let base = ModelConfig {
            arch: ArchTag::Fno,
            grid,
            width: 24,
            depth: 3,
            modes: 6,
            local_kernel: 0,
            activation: Activation::Gelu,
            coord_features: true,
            branch_layers: vec![],
            trunk_layers: vec![],
            basis_count: 1,
            heads: 1,
        };
        let cfg = match tag {
            "fno" => base,
            "fno3x3" => ModelConfig {
                local_kernel: 3,
                ..base
            },
            "fno-full" => ModelConfig {
                modes: grid / 2,
                ..base
            },
            "deeponet" => ModelConfig {
                arch: ArchTag::Deeponet,
                branch_layers: vec![128, 128],
                trunk_layers: vec![128, 128],
                basis_count: 64,
                coord_features: false,
                ..base
            },
            "t1" => ModelConfig {
                arch: ArchTag::T1,
                width: 8,
                depth: 2,
                coord_features: false,
                ..base
            },
            "cno" => ModelConfig {
                arch: ArchTag::Cno,
                width: 16,
                depth: 2,
                ..base
            },
            "gt" => ModelConfig {
                arch: ArchTag::Gt,
                width: 32,
                depth: 2,
                ..base
            },
            other => {
                return Err(Error::arg(
                    "model-preset",
                    format!(
                        "unknown model tag `{other}`; available: fno, fno3x3, \
                         fno-full, deeponet, t1, cno, gt"
                    ),
                ))
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks the cross-field invariants.
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 {
            return Err(Error::arg("model-config", "width must be at least 1"));
        }
        if self.grid < 2 {
            return Err(Error::arg("model-config", "grid must be at least 2"));
        }
        match self.arch {
            ArchTag::Fno | ArchTag::T1 => {
                if self.modes == 0 {
                    return Err(Error::arg("model-config", "modes must be at least 1"));
                }
                if 2 * self.modes > self.grid {
                    return Err(Error::arg(
                        "model-config",
                        format!(
                            "modes {} exceeds the Nyquist half-band {} of a {}-point axis",
                            self.modes,
                            self.grid / 2,
                            self.grid
                        ),
                    ));
                }
                if self.arch == ArchTag::Fno && self.local_kernel != 0 && self.local_kernel % 2 == 0
                {
                    return Err(Error::arg(
                        "model-config",
                        format!("local kernel extent must be odd or 0, got {}", self.local_kernel),
                    ));
                }
                if self.depth == 0 && self.arch == ArchTag::Fno {
                    return Err(Error::arg("model-config", "depth must be at least 1"));
                }
            }
            ArchTag::Deeponet => {
                if self.basis_count == 0 {
                    return Err(Error::arg("model-config", "basis count p must be at least 1"));
                }
            }
            ArchTag::Cno => {
                if self.depth == 0 {
                    return Err(Error::arg("model-config", "depth must be at least 1"));
                }
                if self.grid % (1 << self.depth) != 0 {
                    return Err(Error::arg(
                        "model-config",
                        format!(
                            "grid {} is not divisible by 2^depth = {}",
                            self.grid,
                            1usize << self.depth
                        ),
                    ));
                }
                if (self.grid >> self.depth) % 2 != 0 {
                    return Err(Error::arg(
                        "model-config",
                        format!(
                            "coarsest grid {} must be even for spectral resampling",
                            self.grid >> self.depth
                        ),
                    ));
                }
            }
            ArchTag::Gt => {
                if self.depth == 0 {
                    return Err(Error::arg("model-config", "depth must be at least 1"));
                }
                if self.heads == 0 || self.width % self.heads != 0 {
                    return Err(Error::arg(
                        "model-config",
                        format!("width {} must be a positive multiple of heads {}", self.width, self.heads),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Input channel count after optional coordinate features.
    pub(crate) fn in_channels(&self) -> usize {
        if self.coord_features {
            3
        } else {
            1
        }
    }
}

/// How a parameter block is filled at initialization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Zero,
    /// Uniform on `[lo, hi)`, drawn in row-major order.
    Uniform { lo: f64, hi: f64 },
}

impl Init {
    /// Kaiming-style fan-in scaled uniform: `±sqrt(6 / fan_in)`.
    fn kaiming(fan_in: usize) -> Init {
        let bound = (6.0 / fan_in as f64).sqrt();
        Init::Uniform {
            lo: -bound,
            hi: bound,
        }
    }

    /// Spectral-weight scale `Uniform(0, 1/(c_in·c_out))`.
    fn spectral(c_in: usize, c_out: usize) -> Init {
        Init::Uniform {
            lo: 0.0,
            hi: 1.0 / (c_in * c_out) as f64,
        }
    }
}

/// Declared name, shape, and initializer of one parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

impl ParamSpec {
    fn new(name: impl Into<String>, shape: Vec<usize>, init: Init) -> ParamSpec {
        ParamSpec {
            name: name.into(),
            shape,
            init,
        }
    }

    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

/// The ordered parameter layout of a configuration.
pub fn param_specs(config: &ModelConfig) -> Result<Vec<ParamSpec>> {
    config.validate()?;
    Ok(match config.arch {
        ArchTag::Fno => fno::specs(config),
        ArchTag::Deeponet => deeponet::specs(config),
        ArchTag::T1 => t1::specs(config),
        ArchTag::Cno => cno::specs(config),
        ArchTag::Gt => galerkin::specs(config),
    })
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// The random stream seed of a named parameter under a model seed.
pub(crate) fn param_stream(seed: u64, name: &str) -> u64 {
    splitmix64(seed ^ fnv1a(name))
}

/// Named parameter tensors plus the configuration that shaped them.
#[derive(Debug, Clone)]
pub struct ModelState<T: Element> {
    config: ModelConfig,
    params: Vec<(String, Tensor<T>)>,
}

impl<T: Element> ModelState<T> {
    /// Builds a freshly initialized model.
    ///
    /// Each parameter draws from its own stream keyed by `(seed, name)`, so
    /// configurations sharing a parameter name share its initial value
    /// exactly, independent of any other block.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<ModelState<T>> {
        let specs = param_specs(config)?;
        let mut params = Vec::with_capacity(specs.len());
        for spec in &specs {
            let mut rng = ChaCha8Rng::seed_from_u64(param_stream(seed, &spec.name));
            let data: Vec<T> = match spec.init {
                Init::Zero => vec![T::zero(); spec.numel()],
                Init::Uniform { lo, hi } => (0..spec.numel())
                    .map(|_| T::of(rng.gen_range(lo..hi)))
                    .collect(),
            };
            let tensor = Tensor::from_vec(data, &spec.shape)?.tracked();
            params.push((spec.name.clone(), tensor));
        }
        Ok(ModelState {
            config: config.clone(),
            params,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Parameter blocks in declaration order.
    pub fn params(&self) -> &[(String, Tensor<T>)] {
        &self.params
    }

    /// Looks up one parameter tensor by name.
    pub fn param(&self, name: &str) -> Result<&Tensor<T>> {
        self.params
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| Error::arg("model-param", format!("no parameter named `{name}`")))
    }

    /// Total scalar parameter count over all blocks.
    pub fn param_count(&self) -> usize {
        self.params.iter().map(|(_, t)| t.numel()).sum()
    }

    /// Replaces one parameter tensor; the shape must match.
    ///
    /// The tensor is stored as given (tracked or not), so callers can swap
    /// in graph leaves they hold handles to.
    pub fn set_param(&mut self, name: &str, tensor: Tensor<T>) -> Result<()> {
        let slot = self
            .params
            .iter_mut()
            .find(|(n, _)| n == name)
            .ok_or_else(|| Error::arg("model-param", format!("no parameter named `{name}`")))?;
        if slot.1.shape() != tensor.shape() {
            return Err(Error::shape(
                "model-param",
                format!(
                    "parameter `{name}` has shape {:?}, replacement has {:?}",
                    slot.1.shape(),
                    tensor.shape()
                ),
            ));
        }
        slot.1 = tensor;
        Ok(())
    }

    /// Replaces every parameter tensor, in declaration order.
    pub fn replace_all(&mut self, tensors: &[Tensor<T>]) -> Result<()> {
        if tensors.len() != self.params.len() {
            return Err(Error::arg(
                "model-param",
                format!(
                    "{} replacement tensors for {} parameters",
                    tensors.len(),
                    self.params.len()
                ),
            ));
        }
        let names: Vec<String> = self.params.iter().map(|(n, _)| n.clone()).collect();
        for (name, tensor) in names.iter().zip(tensors) {
            self.set_param(name, tensor.clone())?;
        }
        Ok(())
    }

    /// Evaluates the operator on a `[batch, 1, n, n]` input field batch.
    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let s = input.shape();
        if s.len() != 4 || s[1] != 1 || s[2] != s[3] {
            return Err(Error::shape(
                "model-forward",
                format!("want [batch, 1, n, n], got {s:?}"),
            ));
        }
        match self.config.arch {
            ArchTag::Fno => fno::forward(self, input),
            ArchTag::Deeponet => deeponet::forward(self, input),
            ArchTag::T1 => t1::forward(self, input),
            ArchTag::Cno => cno::forward(self, input),
            ArchTag::Gt => galerkin::forward(self, input),
        }
    }

    /// Parameter blocks as checkpoint payloads (cast to `f32`).
    pub fn to_param_blocks(&self) -> Vec<ParamBlock> {
        self.params
            .iter()
            .map(|(name, t)| ParamBlock {
                name: name.clone(),
                shape: t.shape().to_vec(),
                values: t.data().iter().map(|v| v.as_f64() as f32).collect(),
            })
            .collect()
    }

    /// Wraps the current parameters into a checkpoint.
    pub fn to_checkpoint(&self, meta: CheckpointMeta) -> Checkpoint {
        Checkpoint {
            meta,
            blocks: self.to_param_blocks(),
        }
    }

    /// Rebuilds a model from a checkpoint, validating the stored
    /// configuration and every block name and shape against it.
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<ModelState<T>> {
        let config: ModelConfig = serde_json::from_value(ckpt.meta.model.clone())?;
        let specs = param_specs(&config)?;
        if specs.len() != ckpt.blocks.len() {
            return Err(Error::Format(format!(
                "checkpoint has {} parameter blocks, configuration declares {}",
                ckpt.blocks.len(),
                specs.len()
            )));
        }
        let mut params = Vec::with_capacity(specs.len());
        for (spec, block) in specs.iter().zip(&ckpt.blocks) {
            if spec.name != block.name {
                return Err(Error::Format(format!(
                    "checkpoint block `{}` where configuration declares `{}`",
                    block.name, spec.name
                )));
            }
            if spec.shape != block.shape {
                return Err(Error::Format(format!(
                    "checkpoint block `{}` has shape {:?}, configuration declares {:?}",
                    block.name, block.shape, spec.shape
                )));
            }
            let data: Vec<T> = block.values.iter().map(|&v| T::of(f64::from(v))).collect();
            params.push((spec.name.clone(), Tensor::from_vec(data, &spec.shape)?.tracked()));
        }
        Ok(ModelState { config, params })
    }
}

/// Adds a per-channel bias `[c]` onto a `[b, c, h, w]` activation.
pub(crate) fn bias_add<T: Element>(x: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let c = bias.numel();
    let b = bias.reshape(&[1, c, 1, 1])?.broadcast_to(x.shape())?;
    x.add(&b)
}

/// Adds a last-axis bias `[d]` onto a `[..., d]` activation.
pub(crate) fn bias_add_last<T: Element>(x: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let d = bias.numel();
    let mut shape = vec![1; x.rank()];
    shape[x.rank() - 1] = d;
    let b = bias.reshape(&shape)?.broadcast_to(x.shape())?;
    x.add(&b)
}

/// Concatenates two batches along the channel axis (axis 1) by
/// zero-padding each side into the joint layout and adding.
pub(crate) fn concat_channels<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (sa, sb) = (a.shape(), b.shape());
    if sa.len() != 4 || sb.len() != 4 || sa[0] != sb[0] || sa[2] != sb[2] || sa[3] != sb[3] {
        return Err(Error::shape(
            "concat-channels",
            format!("{sa:?} vs {sb:?}"),
        ));
    }
    let (ca, cb) = (sa[1], sb[1]);
    let left = a.pad(&[0, 0, 0, 0], &[0, cb, 0, 0], PadMode::Zero)?;
    let right = b.pad(&[0, ca, 0, 0], &[0, 0, 0, 0], PadMode::Zero)?;
    left.add(&right)
}

/// The two coordinate grids `x_i = i/(n-1)`, `y_j = j/(n-1)` as a constant
/// (untracked) `[batch, 2, n, n]` tensor.
pub(crate) fn coord_channels<T: Element>(batch: usize, n: usize) -> Result<Tensor<T>> {
    let denom = (n - 1).max(1) as f64;
    let mut data = Vec::with_capacity(batch * 2 * n * n);
    for _ in 0..batch {
        for axis in 0..2 {
            for i in 0..n {
                for j in 0..n {
                    let c = if axis == 0 { i } else { j };
                    data.push(T::of(c as f64 / denom));
                }
            }
        }
    }
    Tensor::from_vec(data, &[batch, 2, n, n])
}

/// Prepends coordinate channels when the configuration asks for them.
pub(crate) fn with_coords<T: Element>(
    config: &ModelConfig,
    input: &Tensor<T>,
) -> Result<Tensor<T>> {
    if !config.coord_features {
        return Ok(input.clone());
    }
    let s = input.shape();
    let coords = coord_channels::<T>(s[0], s[2])?;
    concat_channels(input, &coords)
}

/// A fully-connected stack: `x @ W_i + b_i` with the activation between
/// layers (not after the last).
pub(crate) fn mlp_forward<T: Element>(
    x: &Tensor<T>,
    layers: &[(&Tensor<T>, &Tensor<T>)],
    activation: Activation,
) -> Result<Tensor<T>> {
    let mut h = x.clone();
    for (i, (w, b)) in layers.iter().enumerate() {
        h = h.matmul(w)?;
        h = bias_add_last(&h, b)?;
        if i + 1 < layers.len() {
            h = activation.apply(&h)?;
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_fno(grid: usize) -> ModelConfig {
        ModelConfig {
            arch: ArchTag::Fno,
            grid,
            width: 3,
            depth: 2,
            modes: 2,
            local_kernel: 0,
            activation: Activation::Gelu,
            coord_features: true,
            branch_layers: vec![],
            trunk_layers: vec![],
            basis_count: 1,
            heads: 1,
        }
    }

    #[test]
    fn preset_tags_cover_the_zoo_and_reject_unknown() {
        for tag in ["fno", "fno3x3", "fno-full", "deeponet", "t1", "cno", "gt"] {
            let cfg = ModelConfig::preset(tag, 16).unwrap();
            cfg.validate().unwrap();
        }
        let err = ModelConfig::preset("unet", 16).unwrap_err().to_string();
        assert!(err.contains("unknown model tag"), "{err}");
    }

    #[test]
    fn validation_rejects_out_of_range_modes() {
        let mut cfg = tiny_fno(16);
        cfg.modes = 9; // Nyquist half-band of 16 points is 8.
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("Nyquist"), "{err}");
    }

    #[test]
    fn validation_rejects_even_local_kernels_and_bad_cno_grids() {
        let mut cfg = tiny_fno(16);
        cfg.local_kernel = 2;
        assert!(cfg.validate().is_err());

        let mut cno = ModelConfig::preset("cno", 16).unwrap();
        cno.grid = 20; // 20 % 4 == 0 but 20 >> 2 == 5 is odd.
        assert!(cno.validate().is_err());
        cno.grid = 18; // not divisible by 2^2.
        let err = cno.validate().unwrap_err().to_string();
        assert!(err.contains("divisible"), "{err}");
    }

    #[test]
    fn init_is_deterministic_and_stream_isolated() {
        let cfg = tiny_fno(16);
        let a = ModelState::<f64>::init(&cfg, 9).unwrap();
        let b = ModelState::<f64>::init(&cfg, 9).unwrap();
        for ((na, ta), (nb, tb)) in a.params().iter().zip(b.params()) {
            assert_eq!(na, nb);
            assert_eq!(ta.data(), tb.data(), "parameter `{na}` differs across reruns");
        }
        let c = ModelState::<f64>::init(&cfg, 10).unwrap();
        let changed = a
            .params()
            .iter()
            .zip(c.params())
            .any(|((_, ta), (_, tc))| ta.data() != tc.data());
        assert!(changed, "a different seed must change the initialization");
    }

    #[test]
    fn shared_parameter_names_share_initial_values_across_configs() {
        let plain = tiny_fno(16);
        let local = ModelConfig {
            local_kernel: 3,
            ..tiny_fno(16)
        };
        let a = ModelState::<f64>::init(&plain, 5).unwrap();
        let b = ModelState::<f64>::init(&local, 5).unwrap();
        for (name, ta) in a.params() {
            let tb = b.param(name).unwrap();
            assert_eq!(ta.data(), tb.data(), "shared parameter `{name}` must match");
        }
        assert!(b.param_count() > a.param_count());
    }

    #[test]
    fn param_count_is_the_sum_over_blocks_and_empty_is_zero() {
        let cfg = tiny_fno(16);
        let state = ModelState::<f64>::init(&cfg, 1).unwrap();
        let by_hand: usize = param_specs(&cfg)
            .unwrap()
            .iter()
            .map(ParamSpec::numel)
            .sum();
        assert_eq!(state.param_count(), by_hand);

        let empty = ModelState::<f64> {
            config: cfg,
            params: vec![],
        };
        assert_eq!(empty.param_count(), 0);
    }

    #[test]
    fn all_parameters_are_grad_tracked_after_init() {
        let state = ModelState::<f64>::init(&tiny_fno(16), 2).unwrap();
        for (name, t) in state.params() {
            assert!(t.requires_grad(), "parameter `{name}` must be tracked");
            assert!(t.is_leaf(), "parameter `{name}` must be a leaf");
        }
    }

    #[test]
    fn set_param_checks_shapes_and_names() {
        let mut state = ModelState::<f64>::init(&tiny_fno(16), 3).unwrap();
        let bad = Tensor::<f64>::zeros(&[2, 2]);
        assert!(state.set_param("lift.bias", bad).is_err());
        assert!(state
            .set_param("no.such.parameter", Tensor::<f64>::zeros(&[1]))
            .is_err());
        let w = state.param("lift.bias").unwrap().numel();
        state
            .set_param("lift.bias", Tensor::<f64>::zeros(&[w]))
            .unwrap();
        assert!(state.param("lift.bias").unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn checkpoint_roundtrip_is_bit_exact_for_f32_models() {
        let cfg = tiny_fno(16);
        let state = ModelState::<f32>::init(&cfg, 77).unwrap();
        let meta = CheckpointMeta {
            model: serde_json::to_value(&cfg).unwrap(),
            train: serde_json::Value::Null,
            epoch: 0,
            history_digest: String::new(),
            dataset_digest: String::new(),
        };
        let ckpt = state.to_checkpoint(meta);
        let bytes = crate::storage::checkpoint_to_bytes(&ckpt).unwrap();
        let back = crate::storage::checkpoint_from_bytes(&bytes).unwrap();
        let restored = ModelState::<f32>::from_checkpoint(&back).unwrap();
        assert_eq!(restored.config(), state.config());
        for ((name, orig), (_, got)) in state.params().iter().zip(restored.params()) {
            let orig_bits: Vec<u32> = orig.data().iter().map(|v| v.to_bits()).collect();
            let got_bits: Vec<u32> = got.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(orig_bits, got_bits, "parameter `{name}` must round-trip bit-exactly");
        }
    }

    #[test]
    fn from_checkpoint_rejects_mismatched_blocks() {
        let cfg = tiny_fno(16);
        let state = ModelState::<f32>::init(&cfg, 8).unwrap();
        let meta = CheckpointMeta {
            model: serde_json::to_value(&cfg).unwrap(),
            train: serde_json::Value::Null,
            epoch: 0,
            history_digest: String::new(),
            dataset_digest: String::new(),
        };
        let mut renamed = state.to_checkpoint(meta.clone());
        renamed.blocks[0].name = "surprise".into();
        let err = ModelState::<f32>::from_checkpoint(&renamed).unwrap_err().to_string();
        assert!(err.contains("surprise"), "{err}");

        let mut reshaped = state.to_checkpoint(meta.clone());
        let numel: usize = reshaped.blocks[0].shape.iter().product();
        reshaped.blocks[0].shape = vec![numel];
        let err = ModelState::<f32>::from_checkpoint(&reshaped).unwrap_err().to_string();
        assert!(err.contains("shape"), "{err}");

        let mut truncated = state.to_checkpoint(meta);
        truncated.blocks.pop();
        assert!(ModelState::<f32>::from_checkpoint(&truncated).is_err());
    }

    #[test]
    fn concat_channels_places_blocks_side_by_side() {
        let a = Tensor::<f64>::from_vec(vec![1.0, 2.0, 3.0, 4.0], &[1, 1, 2, 2]).unwrap();
        let b = Tensor::<f64>::from_vec(vec![5.0, 6.0, 7.0, 8.0], &[1, 1, 2, 2]).unwrap();
        let cat = concat_channels(&a, &b).unwrap();
        assert_eq!(cat.shape(), &[1, 2, 2, 2]);
        assert_eq!(cat.data(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
    }

    #[test]
    fn coord_channels_span_the_unit_square() {
        let c = coord_channels::<f64>(1, 5).unwrap();
        assert_eq!(c.shape(), &[1, 2, 5, 5]);
        let d = c.data();
        assert_eq!(d[0], 0.0); // x at (0, 0)
        assert_eq!(d[4 * 5], 1.0); // x at (4, 0)
        assert_eq!(d[25], 0.0); // y at (0, 0)
        assert_eq!(d[25 + 4], 1.0); // y at (0, 4)
    }

    #[test]
    fn model_config_serde_roundtrip() {
        let cfg = ModelConfig::preset("fno3x3", 64).unwrap();
        let json = serde_json::to_string(&cfg).unwrap();
        assert!(json.contains("\"arch\":\"fno\""), "{json}");
        let back: ModelConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
    }
}
