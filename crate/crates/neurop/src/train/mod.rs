//! Loss, optimizer, and the training loop.
//!
//! The objective is the batch-mean relative ℓ2 error, optimized with Adam
//! under an optional cosine learning-rate decay and a global-norm gradient
//! clip. The loop is deterministic: mini-batch order comes from a seeded
//! permutation per epoch, gradient accumulation order is fixed, and two
//! runs from the same seed, configuration, and dataset produce
//! bit-identical parameter trajectories within one build.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::{sample_seed, DatasetPair};
use crate::error::{Error, Result};
use crate::models::ModelState;
use crate::storage::{write_csv, DatasetContainer, NormStats};
use crate::tensor::{DType, Element, Tensor};
use std::path::Path;

/// Learning-rate schedule selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LrSchedule {
    Constant,
    /// Half-cosine decay from the base rate to zero over the whole run.
    Cosine,
}

/// Hyperparameters of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Numerical-stability epsilon in the Adam denominator.
    pub epsilon: f64,
    /// Decoupled weight decay coefficient (0 disables it).
    pub weight_decay: f64,
    /// Gradient clip at this global ℓ2 norm.
    pub clip_norm: f64,
    pub seed: u64,
    pub dtype: DType,
    pub schedule: LrSchedule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 16,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.0,
            clip_norm: 10.0,
            seed: 0,
            dtype: DType::F32,
            schedule: LrSchedule::Cosine,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Train(format!(
                "learning rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::Train(format!("{name} must lie in (0, 1), got {b}")));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::Train("batch size must be at least 1".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Train(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::Train(format!(
                "clip norm must be positive, got {}",
                self.clip_norm
            )));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::Train(format!(
                "weight decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }
}

/// Batch-mean relative ℓ2 error:
/// `mean_b ‖pred_b − target_b‖₂ / max(‖target_b‖₂, 1e-12)`.
///
/// Differentiable; the max-floor only engages on (near-)zero targets.
pub fn relative_l2<T: Element>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<Tensor<T>> {
    if pred.shape() != target.shape() {
        return Err(Error::shape(
            "relative-l2",
            format!("pred {:?} vs target {:?}", pred.shape(), target.shape()),
        ));
    }
    if pred.rank() < 2 {
        return Err(Error::shape(
            "relative-l2",
            format!("want a batched tensor, got rank {}", pred.rank()),
        ));
    }
    let axes: Vec<usize> = (1..pred.rank()).collect();
    let floor = T::of(1e-12);
    let diff = pred.sub(target)?;
    let diff_norm = diff.mul(&diff)?.sum_axes(&axes)?.sqrt()?;
    let target_norm = target.mul(target)?.sum_axes(&axes)?.sqrt()?;
    // max(x, floor) written as relu(x - floor) + floor to stay in the
    // differentiable op set.
    let floored = target_norm.add_scalar(T::zero() - floor)?.relu()?.add_scalar(floor)?;
    diff_norm.div(&floored)?.mean()
}

/// First/second moment estimates and the step counter of Adam.
#[derive(Debug, Clone)]
pub struct OptimizerState<T: Element> {
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    step: usize,
}

impl<T: Element> OptimizerState<T> {
    /// Zero moments shaped like the model's parameters.
    pub fn new(state: &ModelState<T>) -> OptimizerState<T> {
        let zeros: Vec<Vec<T>> = state
            .params()
            .iter()
            .map(|(_, t)| vec![T::zero(); t.numel()])
            .collect();
        OptimizerState {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }

    pub fn step_count(&self) -> usize {
        self.step
    }
}

/// One bias-corrected Adam update over every parameter of `state`.
///
/// `grads` holds one flat gradient per parameter, in declaration order.
/// Weight decay is decoupled: `θ ← θ − lr·(m̂/(√v̂+ε) + wd·θ)`.
pub fn adam_step<T: Element>(
    state: &mut ModelState<T>,
    grads: &[Vec<T>],
    opt: &mut OptimizerState<T>,
    learning_rate: f64,
    config: &TrainConfig,
) -> Result<()> {
    if grads.len() != state.params().len() {
        return Err(Error::Train(format!(
            "{} gradients for {} parameters",
            grads.len(),
            state.params().len()
        )));
    }
    for ((name, t), g) in state.params().iter().zip(grads) {
        if g.len() != t.numel() {
            return Err(Error::Train(format!(
                "gradient for `{name}` has {} values, parameter has {}",
                g.len(),
                t.numel()
            )));
        }
        if g.iter().any(|v| !v.as_f64().is_finite()) {
            return Err(Error::Train(format!("non-finite gradient in `{name}`")));
        }
    }
    opt.step += 1;
    let t = opt.step as i32;
    let b1 = T::of(config.beta1);
    let b2 = T::of(config.beta2);
    let one = T::one();
    let bc1 = T::of(1.0 / (1.0 - config.beta1.powi(t)));
    let bc2 = T::of(1.0 / (1.0 - config.beta2.powi(t)));
    let lr = T::of(learning_rate);
    let eps = T::of(config.epsilon);
    let wd = T::of(config.weight_decay);

    let names: Vec<String> = state.params().iter().map(|(n, _)| n.clone()).collect();
    for (i, name) in names.iter().enumerate() {
        let theta = state.param(name)?.data().to_vec();
        let g = &grads[i];
        let mut fresh = Vec::with_capacity(theta.len());
        for (j, (&p, &gj)) in theta.iter().zip(g).enumerate() {
            let m = b1 * opt.m[i][j] + (one - b1) * gj;
            let v = b2 * opt.v[i][j] + (one - b2) * gj * gj;
            opt.m[i][j] = m;
            opt.v[i][j] = v;
            let m_hat = m * bc1;
            let v_hat = v * bc2;
            fresh.push(p - lr * (m_hat / (v_hat.sqrt() + eps) + wd * p));
        }
        let shape = state.param(name)?.shape().to_vec();
        state.set_param(name, Tensor::from_vec(fresh, &shape)?.tracked())?;
    }
    Ok(())
}

/// Scheduled rate at `step` of `total_steps` (both zero-based counts).
pub fn scheduled_lr(config: &TrainConfig, step: usize, total_steps: usize) -> f64 {
    match config.schedule {
        LrSchedule::Constant => config.learning_rate,
        LrSchedule::Cosine => {
            let frac = step as f64 / total_steps.max(1) as f64;
            config.learning_rate * 0.5 * (1.0 + (std::f64::consts::PI * frac).cos())
        }
    }
}

/// Rescales every gradient so the global ℓ2 norm is at most `clip`.
pub fn clip_global_norm<T: Element>(grads: &mut [Vec<T>], clip: f64) -> f64 {
    let mut sq = 0.0f64;
    for g in grads.iter() {
        for v in g {
            sq += v.as_f64() * v.as_f64();
        }
    }
    let norm = sq.sqrt();
    if norm > clip {
        let factor = T::of(clip / norm);
        for g in grads.iter_mut() {
            for v in g {
                *v = *v * factor;
            }
        }
    }
    norm
}

/// Shifts and scales a raw input batch by the training-split statistics.
pub fn normalize_inputs<T: Element>(x: &Tensor<T>, stats: &NormStats) -> Result<Tensor<T>> {
    x.add_scalar(T::of(-stats.input_mean))?
        .scale(T::of(1.0 / stats.input_std))
}

/// One row of the per-epoch loss history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_rel_l2: f64,
    pub test_rel_l2: f64,
    pub learning_rate: f64,
}

/// Final state, best-epoch snapshot, and the loss history of a run.
#[derive(Debug, Clone)]
pub struct TrainOutcome<T: Element> {
    /// State after the last epoch.
    pub state: ModelState<T>,
    /// Snapshot with the lowest test loss (the initial state if no epoch
    /// improved on infinity, e.g. with an empty test split).
    pub best_state: ModelState<T>,
    pub best_epoch: usize,
    pub history: Vec<EpochStats>,
}

/// Mean relative ℓ2 of the model over a whole split, batched evaluation.
///
/// Returns NaN for an empty split.
pub fn evaluate<T: Element>(
    state: &ModelState<T>,
    split: &DatasetContainer,
    stats: &NormStats,
    batch_size: usize,
) -> Result<f64> {
    let n = split.meta.sample_count;
    if n == 0 {
        return Ok(f64::NAN);
    }
    let indices: Vec<usize> = (0..n).collect();
    let mut accum = 0.0;
    for chunk in indices.chunks(batch_size.max(1)) {
        let x = normalize_inputs(&split.input_batch::<T>(chunk)?, stats)?;
        let y = split.target_batch::<T>(chunk)?;
        let loss = relative_l2(&state.forward(&x)?, &y)?;
        accum += loss.item()?.as_f64() * chunk.len() as f64;
    }
    Ok(accum / n as f64)
}

/// Trains `model` on the pair's training split and reports the held-out
/// loss each epoch.
///
/// Inputs are normalized by the training split's statistics for both
/// splits; the test split's own copy is never consulted. Aborts with a
/// diagnostic when the loss turns non-finite or exceeds the divergence
/// bound `max(1e3, 50 × first measured loss)`: targets keep their raw
/// physical scale, so a fresh model can legitimately start far above 1e3
/// on small-amplitude families, and only growth beyond that starting
/// point signals divergence.
pub fn train<T: Element>(
    model: &ModelState<T>,
    data: &DatasetPair,
    config: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    let n_train = data.train.meta.sample_count;
    if n_train == 0 {
        return Err(Error::Train("empty training split".into()));
    }
    let stats = data.train.meta.norm;

    let mut state = model.clone();
    let mut opt = OptimizerState::new(&state);
    let steps_per_epoch = n_train.div_ceil(config.batch_size);
    let total_steps = (config.epochs * steps_per_epoch).max(1);
    let mut history: Vec<EpochStats> = Vec::with_capacity(config.epochs);
    let mut best_epoch = 0usize;
    let mut best_loss = f64::INFINITY;
    let mut best_state = state.clone();
    let mut step = 0usize;
    let mut divergence_bound = f64::INFINITY;

    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..n_train).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(config.seed, epoch as u64));
        order.shuffle(&mut rng);

        let mut accum = 0.0f64;
        let mut last_lr = scheduled_lr(config, step, total_steps);
        for chunk in order.chunks(config.batch_size) {
            last_lr = scheduled_lr(config, step, total_steps);
            let x = normalize_inputs(&data.train.input_batch::<T>(chunk)?, &stats)?;
            let y = data.train.target_batch::<T>(chunk)?;
            let pred = state.forward(&x)?;
            let loss = relative_l2(&pred, &y)?;
            let value = loss.item()?.as_f64();
            if !value.is_finite() || value > divergence_bound {
                return Err(Error::Train(format!(
                    "diverged at epoch {epoch}, step {step}: loss {value}"
                )));
            }
            if step == 0 {
                divergence_bound = (50.0 * value).max(1e3);
            }
            accum += value * chunk.len() as f64;

            let gradmap = loss.backward()?;
            let mut grads: Vec<Vec<T>> = Vec::with_capacity(state.params().len());
            for (_, p) in state.params() {
                grads.push(gradmap.grad(p)?.data().to_vec());
            }
            clip_global_norm(&mut grads, config.clip_norm);
            adam_step(&mut state, &grads, &mut opt, last_lr, config)?;
            step += 1;
        }

        let train_loss = accum / n_train as f64;
        let test_loss = evaluate(&state, &data.test, &stats, config.batch_size)?;
        history.push(EpochStats {
            epoch,
            train_rel_l2: train_loss,
            test_rel_l2: test_loss,
            learning_rate: last_lr,
        });
        if test_loss < best_loss {
            best_loss = test_loss;
            best_epoch = epoch;
            best_state = state.clone();
        }
    }

    Ok(TrainOutcome {
        state,
        best_state,
        best_epoch,
        history,
    })
}

/// Writes the loss history as a four-column CSV.
pub fn write_history_csv(path: &Path, history: &[EpochStats]) -> Result<()> {
    let header: Vec<String> = ["epoch", "train_rel_l2", "test_rel_l2", "learning_rate"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<Vec<String>> = history
        .iter()
        .map(|h| {
            vec![
                h.epoch.to_string(),
                crate::storage::format_float(h.train_rel_l2),
                crate::storage::format_float(h.test_rel_l2),
                crate::storage::format_float(h.learning_rate),
            ]
        })
        .collect();
    write_csv(path, &header, &rows)
}
