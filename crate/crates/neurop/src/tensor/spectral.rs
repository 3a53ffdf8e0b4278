//! Spectral primitives: 2-D FFT, truncated mode mixing, and band-limited
//! resampling.
//!
//! Complex data uses a dual-plane layout: a complex tensor of logical shape
//! `[...]` is stored as a real tensor of shape `[2, ...]`, plane 0 holding
//! real parts and plane 1 imaginary parts. The convention keeps every
//! gradient real-valued and lets complex ops ride on the real engine.
//!
//! FFT convention: `fft2` is unnormalized; `ifft2` divides by `h * w`.

use rustfft::num_complex::Complex;
use rustfft::FftDirection;

use super::expr::Expr;
use super::{ensure_finite, numel_of, Element, Tensor};
use crate::error::{Error, Result};
use crate::fft::fft2_inplace;

/// Indices of the retained Fourier modes on an axis of extent `n` when
/// keeping `m` modes per sign: `k < m` or `k >= n - m`.
///
/// For `m == n / 2` this keeps the whole axis.
pub fn retained_indices(m: usize, n: usize) -> Vec<usize> {
    (0..n).filter(|&k| k < m || k >= n - m).collect()
}

/// Per-axis spectral resampling map from extent `n` to `n2`: entries
/// `(src, dst, weight)` over storage indices.
///
/// Upsampling splits the Nyquist coefficient evenly onto `+n/2` and `-n/2`;
/// downsampling folds the pair back, so down-then-up after an up-then-down
/// is exact.
pub(crate) fn axis_map(n: usize, n2: usize) -> Vec<(usize, usize, f64)> {
    let mut map = Vec::new();
    if n == n2 {
        for i in 0..n {
            map.push((i, i, 1.0));
        }
    } else if n2 > n {
        for i in 0..n {
            let f = crate::fft::signed_freq(i, n);
            if f == -((n / 2) as i64) {
                map.push((i, n / 2, 0.5));
                map.push((i, n2 - n / 2, 0.5));
            } else if f >= 0 {
                map.push((i, f as usize, 1.0));
            } else {
                map.push((i, (n2 as i64 + f) as usize, 1.0));
            }
        }
    } else {
        for i2 in 0..n2 {
            let f = crate::fft::signed_freq(i2, n2);
            if f == -((n2 / 2) as i64) {
                map.push((n2 / 2, i2, 1.0));
                map.push((n - n2 / 2, i2, 1.0));
            } else if f >= 0 {
                map.push((f as usize, i2, 1.0));
            } else {
                map.push(((n as i64 + f) as usize, i2, 1.0));
            }
        }
    }
    map
}

fn check_even_extent(op: &'static str, n: usize) -> Result<()> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::arg(op, format!("grid extent must be even and >= 2, got {n}")));
    }
    Ok(())
}

impl<T: Element> Tensor<T> {
    fn trailing_hw(&self, op: &'static str) -> Result<(usize, usize)> {
        if self.rank() < 2 {
            return Err(Error::shape(op, format!("rank {} < 2", self.rank())));
        }
        Ok((self.shape()[self.rank() - 2], self.shape()[self.rank() - 1]))
    }

    /// Unnormalized 2-D FFT over the trailing two axes of a real tensor,
    /// returning a dual-plane complex tensor of shape `[2, ...]`.
    pub fn fft2(&self) -> Result<ComplexTensor<T>> {
        let (h, w) = self.trailing_hw("fft2")?;
        let hw = h * w;
        let n = self.numel();
        let slices = n / hw;
        let src = self.data();
        let mut out = vec![T::zero(); 2 * n];
        let mut buf = vec![Complex::new(T::zero(), T::zero()); hw];
        for s in 0..slices {
            for (b, &v) in buf.iter_mut().zip(&src[s * hw..(s + 1) * hw]) {
                *b = Complex::new(v, T::zero());
            }
            fft2_inplace(&mut buf, h, w, FftDirection::Forward);
            for (i, b) in buf.iter().enumerate() {
                out[s * hw + i] = b.re;
                out[n + s * hw + i] = b.im;
            }
        }
        ensure_finite("fft2", &out)?;
        let mut shape = vec![2];
        shape.extend_from_slice(self.shape());
        let grad = self.requires_grad();
        let expr = grad.then(|| Expr::Fft2(self.clone()));
        Ok(ComplexTensor {
            raw: Tensor::make(out, shape, grad, expr),
        })
    }

    /// Band-limited resampling of the trailing two axes to `to = (h2, w2)`,
    /// preserving function values (constants stay constants). All four
    /// extents must be even.
    pub fn spectral_resample(&self, to: (usize, usize)) -> Result<Tensor<T>> {
        let (h, w) = self.trailing_hw("spectral-resample")?;
        let (h2, w2) = to;
        for n in [h, w, h2, w2] {
            check_even_extent("spectral-resample", n)?;
        }
        let hw = h * w;
        let hw2 = h2 * w2;
        let slices = self.numel() / hw;
        let rmap = axis_map(h, h2);
        let cmap = axis_map(w, w2);
        let inv = T::one() / T::of(hw as f64);
        let src = self.data();
        let mut out = vec![T::zero(); slices * hw2];
        let mut buf = vec![Complex::new(T::zero(), T::zero()); hw];
        let mut buf2 = vec![Complex::new(T::zero(), T::zero()); hw2];
        for s in 0..slices {
            for (b, &v) in buf.iter_mut().zip(&src[s * hw..(s + 1) * hw]) {
                *b = Complex::new(v, T::zero());
            }
            fft2_inplace(&mut buf, h, w, FftDirection::Forward);
            for b in buf2.iter_mut() {
                *b = Complex::new(T::zero(), T::zero());
            }
            for &(s1, d1, w1) in &rmap {
                for &(s2, d2, wc) in &cmap {
                    let wgt = T::of(w1 * wc);
                    let v = buf[s1 * w + s2];
                    let dst = &mut buf2[d1 * w2 + d2];
                    *dst = Complex::new(dst.re + wgt * v.re, dst.im + wgt * v.im);
                }
            }
            fft2_inplace(&mut buf2, h2, w2, FftDirection::Inverse);
            for (i, b) in buf2.iter().enumerate() {
                out[s * hw2 + i] = b.re * inv;
            }
        }
        ensure_finite("spectral-resample", &out)?;
        let mut shape = self.shape().to_vec();
        let r = shape.len();
        shape[r - 2] = h2;
        shape[r - 1] = w2;
        let grad = self.requires_grad();
        let expr = grad.then(|| Expr::SpectralResample {
            x: self.clone(),
            from: (h, w),
            to,
        });
        ensure_finite("spectral-resample", &out)?;
        Ok(Tensor::make(out, shape, grad, expr))
    }
}

/// A complex tensor in dual-plane storage: `raw` has shape `[2, ...]`.
#[derive(Clone, Debug)]
pub struct ComplexTensor<T: Element> {
    raw: Tensor<T>,
}

impl<T: Element> ComplexTensor<T> {
    /// Wraps a raw `[2, ...]` real tensor; errors unless the leading axis
    /// has extent 2.
    pub fn from_raw(raw: Tensor<T>) -> Result<Self> {
        if raw.rank() < 1 || raw.shape()[0] != 2 {
            return Err(Error::shape(
                "complex",
                format!("expected leading plane axis of extent 2, got {:?}", raw.shape()),
            ));
        }
        Ok(ComplexTensor { raw })
    }

    /// Stacks separate real and imaginary tensors into dual-plane form.
    pub fn from_parts(re: &Tensor<T>, im: &Tensor<T>) -> Result<Self> {
        if re.shape() != im.shape() {
            return Err(Error::shape(
                "complex",
                format!("{:?} vs {:?}", re.shape(), im.shape()),
            ));
        }
        let mut lifted = vec![1usize];
        lifted.extend_from_slice(re.shape());
        let rank = lifted.len();
        let mut b0 = vec![0usize; rank];
        let mut a0 = vec![0usize; rank];
        a0[0] = 1;
        let re_plane = re.reshape(&lifted)?.pad(&b0, &a0, super::PadMode::Zero)?;
        b0[0] = 1;
        a0[0] = 0;
        let im_plane = im.reshape(&lifted)?.pad(&b0, &a0, super::PadMode::Zero)?;
        ComplexTensor::from_raw(re_plane.add(&im_plane)?)
    }

    /// The underlying `[2, ...]` real tensor.
    pub fn as_raw(&self) -> &Tensor<T> {
        &self.raw
    }

    /// Unwraps into the underlying `[2, ...]` real tensor.
    pub fn into_inner(self) -> Tensor<T> {
        self.raw
    }

    /// Logical (complex) shape, without the plane axis.
    pub fn shape(&self) -> &[usize] {
        &self.raw.shape()[1..]
    }

    fn plane(&self, idx: usize) -> Result<Tensor<T>> {
        let mut ranges: Vec<(usize, usize)> = vec![(idx, 1)];
        ranges.extend(self.shape().iter().map(|&d| (0, d)));
        self.raw.slice(&ranges)?.reshape(self.shape())
    }

    /// Real plane as a tensor of the logical shape.
    pub fn re(&self) -> Result<Tensor<T>> {
        self.plane(0)
    }

    /// Imaginary plane as a tensor of the logical shape.
    pub fn im(&self) -> Result<Tensor<T>> {
        self.plane(1)
    }

    /// Complex elementwise product, composed from real primitives.
    pub fn cmul(&self, other: &ComplexTensor<T>) -> Result<ComplexTensor<T>> {
        if self.shape() != other.shape() {
            return Err(Error::shape(
                "complex-mul",
                format!("{:?} vs {:?}", self.shape(), other.shape()),
            ));
        }
        let (ar, ai) = (self.re()?, self.im()?);
        let (br, bi) = (other.re()?, other.im()?);
        let re = ar.mul(&br)?.sub(&ai.mul(&bi)?)?;
        let im = ar.mul(&bi)?.add(&ai.mul(&br)?)?;
        ComplexTensor::from_parts(&re, &im)
    }

    /// Normalized inverse 2-D FFT over the trailing two axes, keeping the
    /// real part. The imaginary part is discarded by construction; callers
    /// are expected to maintain Hermitian symmetry, and the adjoint accounts
    /// for the projection exactly.
    pub fn ifft2(&self) -> Result<Tensor<T>> {
        let inner_shape = self.shape().to_vec();
        if inner_shape.len() < 2 {
            return Err(Error::shape("ifft2", format!("rank {} < 2", inner_shape.len())));
        }
        let h = inner_shape[inner_shape.len() - 2];
        let w = inner_shape[inner_shape.len() - 1];
        let hw = h * w;
        let n = numel_of(&inner_shape);
        let slices = n / hw;
        let src = self.raw.data();
        let inv = T::one() / T::of(hw as f64);
        let mut out = vec![T::zero(); n];
        let mut buf = vec![Complex::new(T::zero(), T::zero()); hw];
        for s in 0..slices {
            for (i, b) in buf.iter_mut().enumerate() {
                *b = Complex::new(src[s * hw + i], src[n + s * hw + i]);
            }
            fft2_inplace(&mut buf, h, w, FftDirection::Inverse);
            for (i, b) in buf.iter().enumerate() {
                out[s * hw + i] = b.re * inv;
            }
        }
        ensure_finite("ifft2", &out)?;
        let grad = self.raw.requires_grad();
        let expr = grad.then(|| Expr::Ifft2(self.raw.clone()));
        Ok(Tensor::make(out, inner_shape, grad, expr))
    }

    /// Truncated spectral mixing: contracts the channel axis against a
    /// complex weight on the retained low-frequency modes and zeroes the
    /// rest.
    ///
    /// Input has logical shape `[b, c_in, h, w]`; `weight` is dual-plane
    /// `[2, c_out, c_in, 2*m1, 2*m2]` over the retained index sets of the
    /// two axes; output is logical `[b, c_out, h, w]`.
    pub fn mode_mix(&self, weight: &Tensor<T>, modes: (usize, usize)) -> Result<ComplexTensor<T>> {
        let ls = self.shape();
        if ls.len() != 4 {
            return Err(Error::shape("mode-mix", format!("logical shape {ls:?}, want rank 4")));
        }
        let (b, ci, h, w) = (ls[0], ls[1], ls[2], ls[3]);
        let (m1, m2) = modes;
        if m1 == 0 || m2 == 0 || 2 * m1 > h || 2 * m2 > w {
            return Err(Error::arg(
                "mode-mix",
                format!("modes ({m1},{m2}) out of range for grid {h}x{w}"),
            ));
        }
        let rows1 = retained_indices(m1, h);
        let rows2 = retained_indices(m2, w);
        let (l1, l2) = (rows1.len(), rows2.len());
        let ws = weight.shape();
        if ws.len() != 5 || ws[0] != 2 || ws[2] != ci || ws[3] != l1 || ws[4] != l2 {
            return Err(Error::shape(
                "mode-mix",
                format!("weight {ws:?}, want [2, c_out, {ci}, {l1}, {l2}]"),
            ));
        }
        let co = ws[1];
        let xd = self.raw.data();
        let wd = weight.data();
        let plane_x = b * ci * h * w;
        let plane_w = co * ci * l1 * l2;
        let plane_o = b * co * h * w;
        let mut out = vec![T::zero(); 2 * plane_o];
        for bi in 0..b {
            for (p, &r1) in rows1.iter().enumerate() {
                for (q, &r2) in rows2.iter().enumerate() {
                    for c_out in 0..co {
                        let mut acc_re = T::zero();
                        let mut acc_im = T::zero();
                        for c_in in 0..ci {
                            let xi = ((bi * ci + c_in) * h + r1) * w + r2;
                            let wi = ((c_out * ci + c_in) * l1 + p) * l2 + q;
                            let (vre, vim) = (xd[xi], xd[plane_x + xi]);
                            let (wre, wim) = (wd[wi], wd[plane_w + wi]);
                            acc_re = acc_re + wre * vre - wim * vim;
                            acc_im = acc_im + wre * vim + wim * vre;
                        }
                        let oi = ((bi * co + c_out) * h + r1) * w + r2;
                        out[oi] = acc_re;
                        out[plane_o + oi] = acc_im;
                    }
                }
            }
        }
        ensure_finite("mode-mix", &out)?;
        let grad = self.raw.requires_grad() || weight.requires_grad();
        let expr = grad.then(|| Expr::ModeMix {
            x: self.raw.clone(),
            weight: weight.clone(),
            modes,
        });
        Ok(ComplexTensor {
            raw: Tensor::make(out, vec![2, b, co, h, w], grad, expr),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < tol, "{x} vs {y}");
        }
    }

    #[test]
    fn retained_indices_corner_blocks() {
        assert_eq!(retained_indices(2, 8), vec![0, 1, 6, 7]);
        assert_eq!(retained_indices(4, 8), vec![0, 1, 2, 3, 4, 5, 6, 7]);
    }

    #[test]
    fn fft2_ifft2_roundtrip() {
        let data: Vec<f64> = (0..24).map(|i| (i as f64 * 0.7).sin()).collect();
        let x = Tensor::from_vec(data.clone(), &[1, 1, 4, 6]).unwrap();
        let back = x.fft2().unwrap().ifft2().unwrap();
        close(back.data(), &data, 1e-12);
    }

    #[test]
    fn fft2_dc_of_constant() {
        let x = Tensor::<f64>::full(&[2, 2], 3.0);
        let spec = x.fft2().unwrap();
        let raw = spec.as_raw();
        // Unnormalized: DC = sum of entries = 12; everything else zero.
        assert!((raw.data()[0] - 12.0).abs() < 1e-12);
        for &v in &raw.data()[1..] {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn cmul_matches_complex_arithmetic() {
        // (1 + 2i) * (3 - i) = 5 + 5i
        let a = ComplexTensor::from_parts(
            &Tensor::<f64>::from_vec(vec![1.0], &[1]).unwrap(),
            &Tensor::<f64>::from_vec(vec![2.0], &[1]).unwrap(),
        )
        .unwrap();
        let b = ComplexTensor::from_parts(
            &Tensor::<f64>::from_vec(vec![3.0], &[1]).unwrap(),
            &Tensor::<f64>::from_vec(vec![-1.0], &[1]).unwrap(),
        )
        .unwrap();
        let c = a.cmul(&b).unwrap();
        assert!((c.re().unwrap().data()[0] - 5.0).abs() < 1e-12);
        assert!((c.im().unwrap().data()[0] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn from_parts_planes_roundtrip() {
        let re = Tensor::from_vec(vec![1.0, 2.0], &[2]).unwrap();
        let im = Tensor::from_vec(vec![3.0, 4.0], &[2]).unwrap();
        let c = ComplexTensor::from_parts(&re, &im).unwrap();
        assert_eq!(c.as_raw().shape(), &[2, 2]);
        assert_eq!(c.re().unwrap().data(), &[1.0, 2.0]);
        assert_eq!(c.im().unwrap().data(), &[3.0, 4.0]);
    }

    #[test]
    fn resample_identity_when_same_size() {
        let data: Vec<f64> = (0..16).map(|i| (i as f64).cos()).collect();
        let x = Tensor::from_vec(data.clone(), &[4, 4]).unwrap();
        let y = x.spectral_resample((4, 4)).unwrap();
        close(y.data(), &data, 1e-12);
    }

    #[test]
    fn resample_preserves_band_limited_signal() {
        // A pure low mode evaluated on 8x8 then resampled to 16x16 must agree
        // with direct evaluation on the fine grid.
        let f = |x: f64, y: f64| (2.0 * std::f64::consts::PI * x).cos() + 0.5 * (2.0 * std::f64::consts::PI * y).sin();
        let coarse: Vec<f64> = (0..64)
            .map(|i| f((i / 8) as f64 / 8.0, (i % 8) as f64 / 8.0))
            .collect();
        let fine: Vec<f64> = (0..256)
            .map(|i| f((i / 16) as f64 / 16.0, (i % 16) as f64 / 16.0))
            .collect();
        let up = Tensor::from_vec(coarse, &[8, 8])
            .unwrap()
            .spectral_resample((16, 16))
            .unwrap();
        close(up.data(), &fine, 1e-10);
    }

    #[test]
    fn resample_down_then_up_of_upsampled_is_identity() {
        let data: Vec<f64> = (0..36).map(|i| ((i * 7 % 11) as f64) - 5.0).collect();
        let x = Tensor::from_vec(data, &[6, 6]).unwrap();
        let up = x.spectral_resample((10, 10)).unwrap();
        let down = up.spectral_resample((6, 6)).unwrap();
        close(down.data(), x.data(), 1e-10);
        // And once band-limited, up-down-up reproduces the upsampled field.
        let up2 = down.spectral_resample((10, 10)).unwrap();
        close(up2.data(), up.data(), 1e-10);
    }

    #[test]
    fn resample_rejects_odd_extents() {
        let x = Tensor::<f64>::zeros(&[5, 4]);
        assert!(x.spectral_resample((8, 8)).is_err());
        let y = Tensor::<f64>::zeros(&[4, 4]);
        assert!(y.spectral_resample((7, 8)).is_err());
    }

    #[test]
    fn mode_mix_identity_weight_truncates() {
        // c_in = c_out = 1, weight = 1 on retained modes: acts as a spectral
        // low-pass projector.
        let n = 8;
        let m = 2;
        let l = 2 * m;
        let data: Vec<f64> = (0..n * n).map(|i| ((i * 13 % 17) as f64) / 17.0).collect();
        let x = Tensor::from_vec(data, &[1, 1, n, n]).unwrap();
        let spec = x.fft2().unwrap();
        let mut wdata = vec![0.0; 2 * l * l];
        for i in 0..l * l {
            wdata[i] = 1.0;
        }
        let wt = Tensor::from_vec(wdata, &[2, 1, 1, l, l]).unwrap();
        let mixed = spec.mode_mix(&wt, (m, m)).unwrap();
        let y = mixed.ifft2().unwrap();
        // Compare against manual truncation of the spectrum.
        let keep = retained_indices(m, n);
        let raw = spec.as_raw();
        let mut tre = vec![0.0; n * n];
        let mut tim = vec![0.0; n * n];
        for &r in &keep {
            for &c in &keep {
                tre[r * n + c] = raw.data()[r * n + c];
                tim[r * n + c] = raw.data()[n * n + r * n + c];
            }
        }
        let trunc = ComplexTensor::from_parts(
            &Tensor::from_vec(tre, &[1, 1, n, n]).unwrap(),
            &Tensor::from_vec(tim, &[1, 1, n, n]).unwrap(),
        )
        .unwrap()
        .ifft2()
        .unwrap();
        close(y.data(), trunc.data(), 1e-10);
    }

    #[test]
    fn mode_mix_full_modes_with_identity_weight_is_identity() {
        let n = 6;
        let m = n / 2;
        let l = 2 * m;
        let data: Vec<f64> = (0..n * n).map(|i| (i as f64 * 0.3).sin()).collect();
        let x = Tensor::from_vec(data.clone(), &[1, 1, n, n]).unwrap();
        let mut wdata = vec![0.0; 2 * l * l];
        for i in 0..l * l {
            wdata[i] = 1.0;
        }
        let wt = Tensor::from_vec(wdata, &[2, 1, 1, l, l]).unwrap();
        let y = x.fft2().unwrap().mode_mix(&wt, (m, m)).unwrap().ifft2().unwrap();
        close(y.data(), &data, 1e-10);
    }
}
