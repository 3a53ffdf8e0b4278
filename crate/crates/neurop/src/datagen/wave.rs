//! Closed-form wave-equation family on the unit square.
//!
//! The initial condition is a random sine series with algebraically decaying
//! amplitudes; the solution of `u_tt = c^2 (u_xx + u_yy)` with zero Dirichlet
//! boundary is the same series with each mode multiplied by a cosine in time.
//! Because the solution is available in closed form at any point and any
//! time, this family doubles as the exactness oracle for the explanation
//! module.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::{BoundaryKind, Field2D};
use crate::tensor::mm_acc;

/// Propagation speed used throughout the wave family.
pub const WAVE_SPEED: f64 = 0.1;

/// Default series truncation.
pub const WAVE_TRUNCATION: usize = 24;

/// Coefficients of a truncated double sine series
/// `f(x, y) = (pi / K^2) * sum_{i,j=1..K} a_ij (i^2+j^2)^{-1} sin(pi i x) sin(pi j y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SineCoeffs {
    k: usize,
    c: f64,
    /// Row-major `a[(i-1) * k + (j-1)]` for modes `(i, j)`.
    a: Vec<f64>,
}

impl SineCoeffs {
    /// Wraps an explicit coefficient array (`a.len() == k * k`, row-major in
    /// the first mode index).
    pub fn new(k: usize, c: f64, a: Vec<f64>) -> Result<Self> {
        if k < 1 {
            return Err(Error::arg("sine-coeffs", "truncation K must be >= 1"));
        }
        if a.len() != k * k {
            return Err(Error::shape(
                "sine-coeffs",
                format!("{} coefficients for K={k}", a.len()),
            ));
        }
        if a.iter().any(|v| !v.is_finite()) || !c.is_finite() {
            return Err(Error::NonFinite { op: "sine-coeffs" });
        }
        Ok(SineCoeffs { k, c, a })
    }

    /// Draws `a_ij ~ Uniform[-1, 1]` i.i.d. from a seeded generator, in
    /// row-major mode order.
    pub fn sample(seed: u64, k: usize, c: f64) -> Result<Self> {
        if k < 1 {
            return Err(Error::arg("sine-coeffs", "truncation K must be >= 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<f64> = (0..k * k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        SineCoeffs::new(k, c, a)
    }

    pub fn truncation(&self) -> usize {
        self.k
    }

    pub fn speed(&self) -> f64 {
        self.c
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.a
    }

    /// `alpha * self + beta * other`, exact linearity in coefficient space.
    pub fn linear_combination(&self, alpha: f64, other: &SineCoeffs, beta: f64) -> Result<Self> {
        if self.k != other.k {
            return Err(Error::shape(
                "sine-coeffs",
                format!("truncations {} vs {}", self.k, other.k),
            ));
        }
        let a = self
            .a
            .iter()
            .zip(&other.a)
            .map(|(x, y)| alpha * x + beta * y)
            .collect();
        SineCoeffs::new(self.k, self.c, a)
    }

    /// Time-dependent modal amplitude matrix
    /// `B_ij(t) = (pi/K^2) a_ij (i^2+j^2)^{-1} cos(c pi t sqrt(i^2+j^2))`.
    fn modal_matrix(&self, t: f64) -> Vec<f64> {
        let k = self.k;
        let scale = std::f64::consts::PI / (k * k) as f64;
        let mut b = vec![0.0; k * k];
        for i in 1..=k {
            for j in 1..=k {
                let sq = (i * i + j * j) as f64;
                b[(i - 1) * k + (j - 1)] = scale * self.a[(i - 1) * k + (j - 1)] / sq
                    * (self.c * std::f64::consts::PI * t * sq.sqrt()).cos();
            }
        }
        b
    }

    /// Evaluates the solution at time `t` on an `n x n` grid with the given
    /// coordinate convention (row index is the first coordinate).
    pub fn evaluate(&self, t: f64, n: usize, boundary: BoundaryKind) -> Result<Field2D> {
        if n < 8 {
            return Err(Error::arg("wave", "grid extent must be >= 8"));
        }
        if t < 0.0 || !t.is_finite() {
            return Err(Error::arg("wave", "time must be finite and >= 0"));
        }
        let k = self.k;
        // sines[m * k + (i-1)] = sin(pi * i * x_m)
        let mut sines = vec![0.0; n * k];
        for m in 0..n {
            let x = boundary.coord(m, n);
            for i in 1..=k {
                sines[m * k + (i - 1)] = (std::f64::consts::PI * i as f64 * x).sin();
            }
        }
        let b = self.modal_matrix(t);
        // field = S * B * S^T via two small matmuls.
        let mut sb = vec![0.0; n * k];
        mm_acc(&sines, &b, n, k, k, &mut sb);
        let mut sines_t = vec![0.0; k * n];
        for m in 0..n {
            for i in 0..k {
                sines_t[i * n + m] = sines[m * k + i];
            }
        }
        let mut out = vec![0.0; n * n];
        mm_acc(&sb, &sines_t, n, k, n, &mut out);
        Field2D::new(n, n, out)
    }

    /// Point evaluation of the solution at `(x, y)` and time `t` by direct
    /// summation of the series.
    pub fn evaluate_at(&self, t: f64, x: f64, y: f64) -> f64 {
        let k = self.k;
        let scale = std::f64::consts::PI / (k * k) as f64;
        let mut acc = 0.0;
        for i in 1..=k {
            let sx = (std::f64::consts::PI * i as f64 * x).sin();
            for j in 1..=k {
                let sq = (i * i + j * j) as f64;
                let sy = (std::f64::consts::PI * j as f64 * y).sin();
                acc += self.a[(i - 1) * k + (j - 1)] / sq
                    * sx
                    * sy
                    * (self.c * std::f64::consts::PI * t * sq.sqrt()).cos();
            }
        }
        scale * acc
    }
}

/// Samples the random initial condition on the vertex grid `x_m = m/(N-1)`.
pub fn sample_wave_initial(seed: u64, k: usize, n: usize) -> Result<(SineCoeffs, Field2D)> {
    let coeffs = SineCoeffs::sample(seed, k, WAVE_SPEED)?;
    let field = coeffs.evaluate(0.0, n, BoundaryKind::DirichletZero)?;
    Ok((coeffs, field))
}

/// Exact solution of the wave equation at time `t` on an `n x n` vertex grid.
pub fn wave_exact_solution(coeffs: &SineCoeffs, t: f64, n: usize) -> Result<Field2D> {
    coeffs.evaluate(t, n, BoundaryKind::DirichletZero)
}
