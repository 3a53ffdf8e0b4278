//! Pseudospectral solver for 2-D incompressible Navier-Stokes in vorticity
//! form on the unit torus.
//!
//! `w_t + u . grad w = nu lap w + f`, with the velocity recovered from the
//! streamfunction: `-lap psi = w`, `u = (d psi/dy, -d psi/dx)`. Diffusion is
//! integrated implicitly (Crank-Nicolson), advection explicitly
//! (Adams-Bashforth 2 with a plain Euler first step), and the nonlinear term
//! is dealiased with the 2/3 rule.
//!
//! Spectral convention: coefficients are stored in the normalized form
//! `w_hat = forward_fft(w) / n^2`, so physical fields are recovered with an
//! unnormalized inverse transform.

use num_complex::Complex;
use rustfft::FftDirection;

use crate::error::{Error, Result};
use crate::fft::{fft2_inplace, signed_freq};
use crate::field::Field2D;

/// Default viscosity for the dataset family.
pub const NS_VISCOSITY: f64 = 1e-3;

/// The fixed forcing `0.1 (sin(2 pi (x1 + x2)) + cos(2 pi (x1 + x2)))` on
/// the periodic grid (row index is `x1`).
pub fn ns_standard_forcing(n: usize) -> Field2D {
    Field2D::from_fn(n, n, |i, j| {
        let phase = 2.0 * std::f64::consts::PI * ((i + j) as f64) / n as f64;
        0.1 * (phase.sin() + phase.cos())
    })
}

/// Enstrophy `sum w^2` over the grid (no area weight).
pub fn enstrophy(w: &Field2D) -> f64 {
    w.data().iter().map(|v| v * v).sum()
}

/// Advances the vorticity to each requested snapshot time (strictly
/// increasing, each an integer multiple of `dt`; `t = 0` returns the initial
/// state) and returns the snapshots in order.
pub fn ns_solve(
    w0: &Field2D,
    nu: f64,
    forcing: &Field2D,
    snapshot_times: &[f64],
    dt: f64,
) -> Result<Vec<Field2D>> {
    let n = w0.h();
    if w0.w() != n || n < 8 {
        return Err(Error::arg("ns-solve", "vorticity grid must be square, n >= 8"));
    }
    if forcing.h() != n || forcing.w() != n {
        return Err(Error::shape(
            "ns-solve",
            format!("forcing {}x{} vs state {n}x{n}", forcing.h(), forcing.w()),
        ));
    }
    if !(nu > 0.0 && nu.is_finite()) || !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::arg("ns-solve", "nu and dt must be positive finite"));
    }
    if snapshot_times.is_empty() {
        return Err(Error::arg("ns-solve", "no snapshot times requested"));
    }
    let mut target_steps = Vec::with_capacity(snapshot_times.len());
    let mut prev = -1i64;
    for &t in snapshot_times {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::arg("ns-solve", "snapshot times must be finite, >= 0"));
        }
        let steps = (t / dt).round();
        if (t - steps * dt).abs() > 1e-9 * t.max(1.0) {
            return Err(Error::arg(
                "ns-solve",
                format!("snapshot time {t} is not an integer multiple of dt={dt}"),
            ));
        }
        let steps = steps as i64;
        if steps <= prev {
            return Err(Error::arg("ns-solve", "snapshot times must be strictly increasing"));
        }
        prev = steps;
        target_steps.push(steps as usize);
    }

    // Per-mode tables: signed frequencies, |k|^2 Laplacian symbol, 2/3-rule
    // dealiasing mask.
    let two_pi = 2.0 * std::f64::consts::PI;
    let freq: Vec<f64> = (0..n).map(|i| signed_freq(i, n) as f64).collect();
    let cutoff = n as f64 / 3.0;
    let mut ksq = vec![0.0f64; n * n];
    let mut keep = vec![false; n * n];
    for i in 0..n {
        for j in 0..n {
            let idx = i * n + j;
            ksq[idx] = two_pi * two_pi * (freq[i] * freq[i] + freq[j] * freq[j]);
            keep[idx] = freq[i].abs() <= cutoff && freq[j].abs() <= cutoff;
        }
    }

    let to_spectral = |field: &Field2D| -> Vec<Complex<f64>> {
        let mut buf: Vec<Complex<f64>> =
            field.data().iter().map(|&v| Complex::new(v, 0.0)).collect();
        fft2_inplace(&mut buf, n, n, FftDirection::Forward);
        let norm = 1.0 / (n * n) as f64;
        for v in &mut buf {
            *v *= norm;
        }
        buf
    };
    let to_physical = |spec: &[Complex<f64>]| -> Vec<f64> {
        let mut buf = spec.to_vec();
        fft2_inplace(&mut buf, n, n, FftDirection::Inverse);
        buf.into_iter().map(|v| v.re).collect()
    };

    let mut what = to_spectral(w0);
    let fhat = to_spectral(forcing);
    let mut nhat_prev: Option<Vec<Complex<f64>>> = None;
    let mut snapshots = Vec::with_capacity(snapshot_times.len());
    let mut next_target = 0;
    if target_steps[0] == 0 {
        snapshots.push(w0.clone());
        next_target += 1;
    }
    let last_step = *target_steps.last().unwrap();

    for step in 1..=last_step {
        // Velocity and vorticity gradients from the streamfunction.
        let mut uhat = vec![Complex::new(0.0, 0.0); n * n];
        let mut vhat = vec![Complex::new(0.0, 0.0); n * n];
        let mut wxhat = vec![Complex::new(0.0, 0.0); n * n];
        let mut wyhat = vec![Complex::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                let idx = i * n + j;
                let psi = if ksq[idx] > 0.0 {
                    what[idx] / ksq[idx]
                } else {
                    Complex::new(0.0, 0.0)
                };
                let d1 = Complex::new(0.0, two_pi * freq[i]);
                let d2 = Complex::new(0.0, two_pi * freq[j]);
                uhat[idx] = d2 * psi;
                vhat[idx] = -d1 * psi;
                wxhat[idx] = d1 * what[idx];
                wyhat[idx] = d2 * what[idx];
            }
        }
        let u = to_physical(&uhat);
        let v = to_physical(&vhat);
        let wx = to_physical(&wxhat);
        let wy = to_physical(&wyhat);

        let vmax = u
            .iter()
            .chain(v.iter())
            .fold(0.0f64, |m, &x| m.max(x.abs()));
        if vmax * dt * n as f64 > 1.0 {
            return Err(Error::Solver(format!(
                "CFL violation at step {step}: max|u|*dt/h = {:.3} > 1 (max|u|={vmax:.3}, dt={dt})",
                vmax * dt * n as f64
            )));
        }

        let nonlinear = Field2D::from_fn(n, n, |i, j| {
            let idx = i * n + j;
            -(u[idx] * wx[idx] + v[idx] * wy[idx])
        });
        let mut nhat = to_spectral(&nonlinear);
        for (idx, coeff) in nhat.iter_mut().enumerate() {
            if !keep[idx] {
                *coeff = Complex::new(0.0, 0.0);
            }
        }

        let (c_now, c_prev) = if nhat_prev.is_some() {
            (1.5, -0.5)
        } else {
            (1.0, 0.0)
        };
        for idx in 0..n * n {
            let half = 0.5 * nu * ksq[idx] * dt;
            let advect = match &nhat_prev {
                Some(prev) => nhat[idx] * c_now + prev[idx] * c_prev,
                None => nhat[idx],
            };
            what[idx] =
                (what[idx] * (1.0 - half) + (advect + fhat[idx]) * dt) / (1.0 + half);
        }
        nhat_prev = Some(nhat);

        while next_target < target_steps.len() && target_steps[next_target] == step {
            let w = Field2D::new(n, n, to_physical(&what))?;
            if w.data().iter().any(|v| !v.is_finite()) {
                return Err(Error::Solver(format!(
                    "non-finite vorticity at step {step}"
                )));
            }
            snapshots.push(w);
            next_target += 1;
        }
    }
    Ok(snapshots)
}
