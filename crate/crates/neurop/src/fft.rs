//! Low-level 2-D FFT helpers shared by the tensor primitives and the
//! pseudospectral solvers.
//!
//! Convention throughout the crate: the forward transform is unnormalized,
//! the inverse carries the `1/(h*w)` factor.

use num_complex::Complex;
use rustfft::FftDirection;

use crate::tensor::Element;

/// In-place 2-D FFT of a row-major `h x w` buffer. Unnormalized in both
/// directions; callers apply `1/(h*w)` for the inverse themselves (or use
/// [`ifft2`]).
pub fn fft2_inplace<T: Element>(data: &mut [Complex<T>], h: usize, w: usize, dir: FftDirection) {
    assert_eq!(data.len(), h * w, "fft2 buffer length");
    let row_plan = T::fft_plan(w, dir);
    let mut scratch = vec![Complex::new(T::zero(), T::zero()); row_plan.get_inplace_scratch_len()];
    for row in data.chunks_exact_mut(w) {
        row_plan.process_with_scratch(row, &mut scratch);
    }
    if h == 1 {
        return;
    }
    let col_plan = T::fft_plan(h, dir);
    let mut transposed = vec![Complex::new(T::zero(), T::zero()); h * w];
    transpose(data, &mut transposed, h, w);
    scratch.resize(col_plan.get_inplace_scratch_len(), Complex::new(T::zero(), T::zero()));
    for col in transposed.chunks_exact_mut(h) {
        col_plan.process_with_scratch(col, &mut scratch);
    }
    transpose(&transposed, data, w, h);
}

/// Forward 2-D FFT into a fresh complex buffer.
pub fn fft2<T: Element>(real: &[T], h: usize, w: usize) -> Vec<Complex<T>> {
    let mut buf: Vec<Complex<T>> = real.iter().map(|&v| Complex::new(v, T::zero())).collect();
    fft2_inplace(&mut buf, h, w, FftDirection::Forward);
    buf
}

/// Inverse 2-D FFT with the `1/(h*w)` normalization applied.
pub fn ifft2<T: Element>(spec: &[Complex<T>], h: usize, w: usize) -> Vec<Complex<T>> {
    let mut buf = spec.to_vec();
    fft2_inplace(&mut buf, h, w, FftDirection::Inverse);
    let norm = T::one() / T::of((h * w) as f64);
    for v in &mut buf {
        *v = *v * norm;
    }
    buf
}

/// Signed integer frequency for index `i` of an axis of length `n`:
/// `0, 1, ..., n/2-1, -n/2, ..., -1` (even `n`).
pub fn signed_freq(i: usize, n: usize) -> i64 {
    if i <= (n - 1) / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

fn transpose<T: Copy>(src: &[T], dst: &mut [T], rows: usize, cols: usize) {
    for r in 0..rows {
        for c in 0..cols {
            dst[c * rows + r] = src[r * cols + c];
        }
    }
}
