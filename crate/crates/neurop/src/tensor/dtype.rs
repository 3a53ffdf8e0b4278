//! Element types the engine runs on, plus per-type FFT planner caches.

use std::sync::{Arc, Mutex, OnceLock};

use rustfft::{Fft, FftDirection, FftNum, FftPlanner};
use serde::{Deserialize, Serialize};

/// Storage type tag used in serialized artifacts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    F32,
    F64,
}

impl std::fmt::Display for DType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DType::F32 => write!(f, "float32"),
            DType::F64 => write!(f, "float64"),
        }
    }
}

/// Scalar element type of a [`super::Tensor`]: `f32` or `f64`.
///
/// `of` / `as_f64` are the only sanctioned conversion paths, so numeric
/// constants flow through one well-defined rounding step.
pub trait Element: FftNum + num_traits::Float + Send + Sync + 'static {
    const DTYPE: DType;

    /// Converts an `f64` constant into this element type.
    fn of(x: f64) -> Self;

    /// Widens to `f64`.
    fn as_f64(self) -> f64;

    /// A cached FFT plan of length `n` in direction `dir` for this type.
    fn fft_plan(n: usize, dir: FftDirection) -> Arc<dyn Fft<Self>>;
}

fn plan_with<T: FftNum>(
    cell: &OnceLock<Mutex<FftPlanner<T>>>,
    n: usize,
    dir: FftDirection,
) -> Arc<dyn Fft<T>> {
    let planner = cell.get_or_init(|| Mutex::new(FftPlanner::new()));
    let mut guard = planner.lock().expect("FFT planner poisoned");
    guard.plan_fft(n, dir)
}

static PLANNER_F32: OnceLock<Mutex<FftPlanner<f32>>> = OnceLock::new();
static PLANNER_F64: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();

impl Element for f32 {
    const DTYPE: DType = DType::F32;

    fn of(x: f64) -> Self {
        x as f32
    }

    fn as_f64(self) -> f64 {
        self as f64
    }

    fn fft_plan(n: usize, dir: FftDirection) -> Arc<dyn Fft<Self>> {
        plan_with(&PLANNER_F32, n, dir)
    }
}

impl Element for f64 {
    const DTYPE: DType = DType::F64;

    fn of(x: f64) -> Self {
        x
    }

    fn as_f64(self) -> f64 {
        self
    }

    fn fft_plan(n: usize, dir: FftDirection) -> Arc<dyn Fft<Self>> {
        plan_with(&PLANNER_F64, n, dir)
    }
}
