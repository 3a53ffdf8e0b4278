//! Darcy flow: `-div(a grad u) = f` on the unit square with zero Dirichlet
//! boundary, piecewise-constant coefficients, and `f = 1`.
//!
//! Discretization is a five-point flux-form stencil on the vertex grid
//! `x_m = m/(N-1)` with harmonic-mean face coefficients (the standard choice
//! for discontinuous `a`). The resulting symmetric positive-definite system
//! over the interior vertices is solved by conjugate gradients with Jacobi
//! preconditioning to a relative residual below `1e-8`.

use crate::error::{Error, Result};
use crate::field::Field2D;

use super::grf::{sample_grf, GrfSpec};

/// Coefficient value where the underlying Gaussian field is >= 0.
pub const DARCY_HIGH: f64 = 12.0;
/// Coefficient value elsewhere.
pub const DARCY_LOW: f64 = 3.0;
/// Relative-residual stopping threshold for the linear solve.
pub const DARCY_CG_TOL: f64 = 1e-8;
const CG_MAX_ITERS: usize = 50_000;

/// Draws a two-valued permeability field by thresholding a Neumann-boundary
/// Gaussian random field at zero.
pub fn darcy_sample_coefficient(seed: u64, n: usize) -> Result<Field2D> {
    let field = sample_grf(&GrfSpec::darcy(), seed, n)?;
    Ok(field.map(|v| if v >= 0.0 { DARCY_HIGH } else { DARCY_LOW }))
}

/// Solves the Darcy problem with the fixed unit source `f = 1`.
pub fn darcy_solve(a: &Field2D) -> Result<Field2D> {
    let ones = Field2D::from_fn(a.h(), a.w(), |_, _| 1.0);
    darcy_solve_with_source(a, &ones)
}

/// Solves `-div(a grad u) = f` with an explicit source (used by the
/// manufactured-solution oracle; the dataset always uses `f = 1`).
pub fn darcy_solve_with_source(a: &Field2D, f: &Field2D) -> Result<Field2D> {
    let stencil = Stencil::build(a)?;
    if f.h() != a.h() || f.w() != a.w() {
        return Err(Error::shape(
            "darcy",
            format!("source {}x{} vs coefficient {}x{}", f.h(), f.w(), a.h(), a.w()),
        ));
    }
    let m = stencil.m;
    let mut b = vec![0.0f64; m * m];
    for i in 0..m {
        for j in 0..m {
            b[i * m + j] = f.get(i + 1, j + 1);
        }
    }
    let interior = stencil.solve_cg(&b)?;
    let n = stencil.n;
    let mut out = Field2D::zeros(n, n);
    for i in 0..m {
        for j in 0..m {
            out.set(i + 1, j + 1, interior[i * m + j]);
        }
    }
    Ok(out)
}

/// Relative discrete residual `||A u - f|| / ||f||` of a candidate solution,
/// using the same stencil as the solver.
pub fn darcy_residual(a: &Field2D, u: &Field2D, f: &Field2D) -> Result<f64> {
    let stencil = Stencil::build(a)?;
    let m = stencil.m;
    let mut x = vec![0.0f64; m * m];
    let mut b = vec![0.0f64; m * m];
    for i in 0..m {
        for j in 0..m {
            x[i * m + j] = u.get(i + 1, j + 1);
            b[i * m + j] = f.get(i + 1, j + 1);
        }
    }
    let ax = stencil.apply(&x);
    let num: f64 = ax
        .iter()
        .zip(&b)
        .map(|(y, t)| (y - t) * (y - t))
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|t| t * t).sum::<f64>().sqrt().max(1e-300);
    Ok(num / den)
}

/// Precomputed face coefficients for the interior `(n-2)^2` unknowns.
struct Stencil {
    n: usize,
    m: usize,
    inv_h2: f64,
    east: Vec<f64>,
    west: Vec<f64>,
    south: Vec<f64>,
    north: Vec<f64>,
    diag: Vec<f64>,
}

fn harmonic_mean(x: f64, y: f64) -> f64 {
    2.0 * x * y / (x + y)
}

impl Stencil {
    fn build(a: &Field2D) -> Result<Stencil> {
        let n = a.h();
        if a.w() != n || n < 8 {
            return Err(Error::arg("darcy", "coefficient grid must be square, n >= 8"));
        }
        if a.data().iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::arg("darcy", "coefficient must be positive and finite"));
        }
        let m = n - 2;
        let h = 1.0 / (n - 1) as f64;
        let inv_h2 = 1.0 / (h * h);
        let mut east = vec![0.0; m * m];
        let mut west = vec![0.0; m * m];
        let mut south = vec![0.0; m * m];
        let mut north = vec![0.0; m * m];
        let mut diag = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                let (gi, gj) = (i + 1, j + 1);
                let centre = a.get(gi, gj);
                let idx = i * m + j;
                east[idx] = harmonic_mean(centre, a.get(gi, gj + 1));
                west[idx] = harmonic_mean(centre, a.get(gi, gj - 1));
                south[idx] = harmonic_mean(centre, a.get(gi + 1, gj));
                north[idx] = harmonic_mean(centre, a.get(gi - 1, gj));
                diag[idx] = (east[idx] + west[idx] + south[idx] + north[idx]) * inv_h2;
            }
        }
        Ok(Stencil {
            n,
            m,
            inv_h2,
            east,
            west,
            south,
            north,
            diag,
        })
    }

    /// `y = A x` over interior unknowns; Dirichlet neighbours contribute 0.
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                let idx = i * m + j;
                let mut acc = self.diag[idx] * x[idx];
                if j + 1 < m {
                    acc -= self.east[idx] * self.inv_h2 * x[idx + 1];
                }
                if j > 0 {
                    acc -= self.west[idx] * self.inv_h2 * x[idx - 1];
                }
                if i + 1 < m {
                    acc -= self.south[idx] * self.inv_h2 * x[idx + m];
                }
                if i > 0 {
                    acc -= self.north[idx] * self.inv_h2 * x[idx - m];
                }
                y[idx] = acc;
            }
        }
        y
    }

    /// Jacobi-preconditioned conjugate gradients from a zero initial guess.
    fn solve_cg(&self, b: &[f64]) -> Result<Vec<f64>> {
        let len = b.len();
        let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if bnorm == 0.0 {
            return Ok(vec![0.0; len]);
        }
        let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
        let mut x = vec![0.0; len];
        let mut r = b.to_vec();
        let mut z: Vec<f64> = r.iter().zip(&self.diag).map(|(v, d)| v / d).collect();
        let mut p = z.clone();
        let mut rho = dot(&r, &z);
        for _ in 0..CG_MAX_ITERS {
            let q = self.apply(&p);
            let alpha = rho / dot(&p, &q);
            for i in 0..len {
                x[i] += alpha * p[i];
                r[i] -= alpha * q[i];
            }
            let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if rnorm / bnorm < DARCY_CG_TOL {
                return Ok(x);
            }
            for i in 0..len {
                z[i] = r[i] / self.diag[i];
            }
            let rho_next = dot(&r, &z);
            let beta = rho_next / rho;
            for i in 0..len {
                p[i] = z[i] + beta * p[i];
            }
            rho = rho_next;
        }
        Err(Error::Solver(format!(
            "conjugate gradients did not reach relative residual {DARCY_CG_TOL} within {CG_MAX_ITERS} iterations"
        )))
    }
}
