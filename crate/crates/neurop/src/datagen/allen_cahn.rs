//! Allen-Cahn reaction-diffusion: `u_t = lap u - eps^2 u (u^2 - 1)` over a
//! short horizon, integrated with explicit Euler.
//!
//! The boundary defaults to periodic (the initial family is a sine series
//! that is near zero along the seam); a Dirichlet variant that holds the
//! boundary ring at its initial values is available behind a switch.

use crate::error::{Error, Result};
use crate::field::{BoundaryKind, Field2D};

/// Reaction rate of the dataset family.
pub const AC_EPSILON: f64 = 220.0;
/// Final time of the dataset family.
pub const AC_FINAL_TIME: f64 = 2e-4;
/// Default step: far below the stability bound so that the explicit scheme
/// also resolves the stiff reaction accurately (the step-refinement oracle
/// pins the accuracy at this value).
pub const AC_DEFAULT_DT: f64 = 1e-9;

/// Advances to `t_final` with periodic boundaries.
pub fn allen_cahn_solve(u0: &Field2D, eps: f64, t_final: f64, dt: f64) -> Result<Field2D> {
    allen_cahn_solve_with_boundary(u0, eps, t_final, dt, BoundaryKind::Periodic)
}

/// Advances to `t_final` with an explicit boundary kind. `Periodic` wraps
/// the five-point Laplacian; `DirichletZero` holds the boundary ring fixed
/// at its initial values and updates the interior only.
pub fn allen_cahn_solve_with_boundary(
    u0: &Field2D,
    eps: f64,
    t_final: f64,
    dt: f64,
    boundary: BoundaryKind,
) -> Result<Field2D> {
    let n = u0.h();
    if u0.w() != n || n < 8 {
        return Err(Error::arg("allen-cahn", "state grid must be square, n >= 8"));
    }
    if !(eps > 0.0 && eps.is_finite()) || !(dt > 0.0 && dt.is_finite()) || !(t_final >= 0.0) {
        return Err(Error::arg(
            "allen-cahn",
            "requires eps > 0, dt > 0, t_final >= 0",
        ));
    }
    let h = match boundary {
        BoundaryKind::Periodic => 1.0 / n as f64,
        BoundaryKind::DirichletZero => 1.0 / (n - 1) as f64,
        BoundaryKind::Neumann => {
            return Err(Error::arg("allen-cahn", "unsupported boundary kind: neumann"))
        }
    };
    let bound = (h * h / 8.0).min(0.5 / (eps * eps));
    if dt > bound * (1.0 + 1e-12) {
        return Err(Error::Solver(format!(
            "dt={dt} violates the stability bound min(h^2/8, 0.5/eps^2) = {bound:.3e}"
        )));
    }
    let steps_f = (t_final / dt).round();
    if (t_final - steps_f * dt).abs() > 1e-6 * dt {
        return Err(Error::arg(
            "allen-cahn",
            format!("t_final={t_final} is not an integer multiple of dt={dt}"),
        ));
    }
    let steps = steps_f as usize;

    let inv_h2 = 1.0 / (h * h);
    let eps2 = eps * eps;
    let mut u = u0.data().to_vec();
    let mut next = vec![0.0f64; n * n];
    match boundary {
        BoundaryKind::Periodic => {
            let plus: Vec<usize> = (0..n).map(|i| (i + 1) % n).collect();
            let minus: Vec<usize> = (0..n).map(|i| (i + n - 1) % n).collect();
            for _ in 0..steps {
                for i in 0..n {
                    let (ip, im) = (plus[i] * n, minus[i] * n);
                    let row = i * n;
                    for j in 0..n {
                        let c = u[row + j];
                        let lap = (u[ip + j] + u[im + j] + u[row + plus[j]] + u[row + minus[j]]
                            - 4.0 * c)
                            * inv_h2;
                        next[row + j] = c + dt * (lap - eps2 * c * (c * c - 1.0));
                    }
                }
                std::mem::swap(&mut u, &mut next);
            }
        }
        BoundaryKind::DirichletZero => {
            next.copy_from_slice(&u);
            for _ in 0..steps {
                for i in 1..n - 1 {
                    let row = i * n;
                    for j in 1..n - 1 {
                        let c = u[row + j];
                        let lap = (u[row + n + j] + u[row - n + j] + u[row + j + 1]
                            + u[row + j - 1]
                            - 4.0 * c)
                            * inv_h2;
                        next[row + j] = c + dt * (lap - eps2 * c * (c * c - 1.0));
                    }
                }
                std::mem::swap(&mut u, &mut next);
            }
        }
        BoundaryKind::Neumann => unreachable!(),
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solver("non-finite state in Allen-Cahn step".into()));
    }
    Field2D::new(n, n, u)
}
