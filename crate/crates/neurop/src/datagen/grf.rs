//! Gaussian random fields with covariance `sigma^2 (-lap + tau^2 I)^{-2d}`.
//!
//! Sampling is spectral: independent standard normal coefficients per
//! eigenmode of the Laplacian (for the declared boundary kind), scaled by the
//! amplitude `sigma (lambda_k + tau^2)^{-d}`, then synthesized on the grid.
//! The eigenbasis depends on the boundary kind: complex exponentials on the
//! torus, sine modes for Dirichlet-zero, cosine modes for Neumann.

use num_complex::Complex;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::FftDirection;

use crate::error::{Error, Result};
use crate::fft::{fft2_inplace, signed_freq};
use crate::field::{BoundaryKind, Field2D};
use crate::tensor::mm_acc;

/// Parameters of the measure `N(0, sigma^2 (-lap + tau^2 I)^{-2d})`,
/// stated as the amplitude rule `sigma (lambda + tau^2)^{-d}` applied to
/// orthonormal eigenmodes.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GrfSpec {
    d: f64,
    tau: f64,
    sigma: f64,
    boundary: BoundaryKind,
}

impl GrfSpec {
    pub fn new(d: f64, tau: f64, sigma: f64, boundary: BoundaryKind) -> Result<Self> {
        if !(d.is_finite() && tau.is_finite() && sigma.is_finite()) {
            return Err(Error::NonFinite { op: "grf-spec" });
        }
        if d <= 0.0 || tau <= 0.0 || sigma < 0.0 {
            return Err(Error::arg(
                "grf-spec",
                "requires d > 0, tau > 0, sigma >= 0",
            ));
        }
        Ok(GrfSpec {
            d,
            tau,
            sigma,
            boundary,
        })
    }

    /// Initial-vorticity measure for the Navier-Stokes family:
    /// `d = 1.25`, `tau = 7`, scale `7^{3/2}`, periodic.
    pub fn navier_stokes() -> Self {
        GrfSpec {
            d: 1.25,
            tau: 7.0,
            sigma: 7.0f64.powf(1.5),
            boundary: BoundaryKind::Periodic,
        }
    }

    /// Log-free coefficient measure for the Darcy family before
    /// thresholding: amplitude `(lambda + 9)^{-1}`, Neumann basis.
    pub fn darcy() -> Self {
        GrfSpec {
            d: 1.0,
            tau: 3.0,
            sigma: 1.0,
            boundary: BoundaryKind::Neumann,
        }
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn boundary(&self) -> BoundaryKind {
        self.boundary
    }

    /// Coefficient standard deviation for an eigenvalue `lambda` of `-lap`.
    pub fn amplitude(&self, lambda: f64) -> f64 {
        self.sigma * (lambda + self.tau * self.tau).powf(-self.d)
    }
}

/// Draws one field from the measure on an `n x n` grid.
pub fn sample_grf(spec: &GrfSpec, seed: u64, n: usize) -> Result<Field2D> {
    if n < 8 {
        return Err(Error::arg("grf", "grid extent must be >= 8"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match spec.boundary {
        BoundaryKind::Periodic => sample_periodic(spec, &mut rng, n),
        BoundaryKind::DirichletZero => Ok(sample_separable(spec, &mut rng, n, Basis::Sine)),
        BoundaryKind::Neumann => Ok(sample_separable(spec, &mut rng, n, Basis::Cosine)),
    }
}

/// Hermitian-symmetric spectral draw followed by an inverse FFT.
///
/// For a conjugate pair `{k, -k}` the coefficient is `s (a + i b)/sqrt(2)`
/// with `a, b ~ N(0,1)`, which gives the real-orthonormal-mode coefficients
/// variance `s^2` and makes the discrete Fourier coefficient satisfy
/// `E|W_k|^2 = s^2`. Self-conjugate modes (DC, Nyquist rows) get a single
/// real `N(0, s^2)` draw; the `(0, 0)` mode is pinned to zero so every
/// sample has exactly zero spatial mean.
fn sample_periodic(spec: &GrfSpec, rng: &mut ChaCha8Rng, n: usize) -> Result<Field2D> {
    let mut w = vec![Complex::new(0.0f64, 0.0); n * n];
    let two_pi_sq = 4.0 * std::f64::consts::PI * std::f64::consts::PI;
    for k1 in 0..n {
        for k2 in 0..n {
            if k1 == 0 && k2 == 0 {
                continue;
            }
            let p1 = (n - k1) % n;
            let p2 = (n - k2) % n;
            // Conjugate partner earlier in row-major order already filled us.
            if (p1, p2) < (k1, k2) {
                continue;
            }
            let f1 = signed_freq(k1, n) as f64;
            let f2 = signed_freq(k2, n) as f64;
            let lambda = two_pi_sq * (f1 * f1 + f2 * f2);
            let s = spec.amplitude(lambda);
            if (p1, p2) == (k1, k2) {
                let a: f64 = rng.sample(StandardNormal);
                w[k1 * n + k2] = Complex::new(s * a, 0.0);
            } else {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                let half = std::f64::consts::FRAC_1_SQRT_2;
                w[k1 * n + k2] = Complex::new(s * a * half, s * b * half);
                w[p1 * n + p2] = Complex::new(s * a * half, -s * b * half);
            }
        }
    }
    fft2_inplace(&mut w, n, n, FftDirection::Inverse);
    Field2D::new(n, n, w.into_iter().map(|v| v.re).collect())
}

enum Basis {
    Sine,
    Cosine,
}

/// Separable synthesis `u = P C P^T` for the sine / cosine eigenbases on the
/// vertex grid, with the L2([0,1]) normalization (`sqrt(2)` per axis, cosine
/// mode 0 unscaled) folded into `P`.
fn sample_separable(spec: &GrfSpec, rng: &mut ChaCha8Rng, n: usize, basis: Basis) -> Field2D {
    let pi = std::f64::consts::PI;
    let sqrt2 = 2.0f64.sqrt();
    // Mode indices per axis: sines 1..=n-2 (zero at both edges), cosines
    // 0..=n-1.
    let (m, first): (usize, usize) = match basis {
        Basis::Sine => (n - 2, 1),
        Basis::Cosine => (n, 0),
    };
    let mut p = vec![0.0f64; n * m];
    for row in 0..n {
        let x = row as f64 / (n - 1) as f64;
        for col in 0..m {
            let mode = (first + col) as f64;
            p[row * m + col] = match basis {
                Basis::Sine => sqrt2 * (pi * mode * x).sin(),
                Basis::Cosine => {
                    let norm = if first + col == 0 { 1.0 } else { sqrt2 };
                    norm * (pi * mode * x).cos()
                }
            };
        }
    }
    let mut c = vec![0.0f64; m * m];
    for i in 0..m {
        for j in 0..m {
            if matches!(basis, Basis::Cosine) && i == 0 && j == 0 {
                continue; // constant mode excluded: zero-mean measure
            }
            let mi = (first + i) as f64;
            let mj = (first + j) as f64;
            let lambda = pi * pi * (mi * mi + mj * mj);
            let xi: f64 = rng.sample(StandardNormal);
            c[i * m + j] = spec.amplitude(lambda) * xi;
        }
    }
    let mut pc = vec![0.0f64; n * m];
    mm_acc(&p, &c, n, m, m, &mut pc);
    let mut pt = vec![0.0f64; m * n];
    for row in 0..n {
        for col in 0..m {
            pt[col * n + row] = p[row * m + col];
        }
    }
    let mut out = vec![0.0f64; n * n];
    mm_acc(&pc, &pt, n, m, n, &mut out);
    Field2D::new(n, n, out).expect("sizes agree by construction")
}
