//! Forward implementations of the differentiable primitives.
//!
//! Every op validates shapes, computes the output eagerly, rejects non-finite
//! results, and records the application on the output when any input tracks
//! gradients.

use super::expr::Expr;
use super::{ensure_finite, numel_of, strides_of, Element, PadMode, PrimitiveKind, Tensor};
use crate::error::{Error, Result};

pub(crate) const GELU_ALPHA: f64 = 0.7978845608;
pub(crate) const GELU_BETA: f64 = 0.044715;

fn node<T: Element>(
    op: &'static str,
    data: Vec<T>,
    shape: Vec<usize>,
    grad: bool,
    expr: impl FnOnce() -> Expr<T>,
) -> Result<Tensor<T>> {
    ensure_finite(op, &data)?;
    let expr = if grad { Some(expr()) } else { None };
    Ok(Tensor::make(data, shape, grad, expr))
}

fn same_shape<T: Element>(op: &'static str, a: &Tensor<T>, b: &Tensor<T>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(
            op,
            format!("{:?} vs {:?}", a.shape(), b.shape()),
        ));
    }
    Ok(())
}

/// Plain `m x k` times `k x n` row-major matrix product, accumulated into
/// `out` (which must be zeroed by the caller).
pub(crate) fn mm_acc<T: Element>(a: &[T], b: &[T], m: usize, k: usize, n: usize, out: &mut [T]) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (l, &ail) in arow.iter().enumerate() {
            let brow = &b[l * n..(l + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o = *o + ail * bv;
            }
        }
    }
}

/// Row-major transpose of an `m x n` matrix.
pub(crate) fn transpose2<T: Element>(a: &[T], m: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = a[i * n + j];
        }
    }
    out
}

/// Copies an `h x w` plane into a `(h + 2*ph) x (w + 2*pw)` buffer according
/// to the padding mode.
pub(crate) fn padded_plane<T: Element>(
    src: &[T],
    h: usize,
    w: usize,
    ph: usize,
    pw: usize,
    mode: PadMode,
) -> Vec<T> {
    let (hp, wp) = (h + 2 * ph, w + 2 * pw);
    let mut out = vec![T::zero(); hp * wp];
    for y in 0..hp {
        let sy = y as i64 - ph as i64;
        for x in 0..wp {
            let sx = x as i64 - pw as i64;
            out[y * wp + x] = match mode {
                PadMode::Zero => {
                    if sy >= 0 && sy < h as i64 && sx >= 0 && sx < w as i64 {
                        src[sy as usize * w + sx as usize]
                    } else {
                        T::zero()
                    }
                }
                PadMode::Circular => {
                    let my = sy.rem_euclid(h as i64) as usize;
                    let mx = sx.rem_euclid(w as i64) as usize;
                    src[my * w + mx]
                }
            };
        }
    }
    out
}

/// Adjoint of [`padded_plane`]: folds a padded-plane gradient back onto the
/// `h x w` source, accumulating into `dst`.
pub(crate) fn fold_padded<T: Element>(
    dpad: &[T],
    h: usize,
    w: usize,
    ph: usize,
    pw: usize,
    mode: PadMode,
    dst: &mut [T],
) {
    let (hp, wp) = (h + 2 * ph, w + 2 * pw);
    for y in 0..hp {
        let sy = y as i64 - ph as i64;
        for x in 0..wp {
            let sx = x as i64 - pw as i64;
            match mode {
                PadMode::Zero => {
                    if sy >= 0 && sy < h as i64 && sx >= 0 && sx < w as i64 {
                        let d = sy as usize * w + sx as usize;
                        dst[d] = dst[d] + dpad[y * wp + x];
                    }
                }
                PadMode::Circular => {
                    let my = sy.rem_euclid(h as i64) as usize;
                    let mx = sx.rem_euclid(w as i64) as usize;
                    let d = my * w + mx;
                    dst[d] = dst[d] + dpad[y * wp + x];
                }
            }
        }
    }
}

pub(crate) fn gelu_value<T: Element>(x: T) -> T {
    let half = T::of(0.5);
    let alpha = T::of(GELU_ALPHA);
    let beta = T::of(GELU_BETA);
    let u = alpha * (x + beta * x * x * x);
    half * x * (T::one() + u.tanh())
}

pub(crate) fn gelu_derivative<T: Element>(x: T) -> T {
    let half = T::of(0.5);
    let alpha = T::of(GELU_ALPHA);
    let beta = T::of(GELU_BETA);
    let three = T::of(3.0);
    let u = alpha * (x + beta * x * x * x);
    let t = u.tanh();
    let sech2 = T::one() - t * t;
    half * (T::one() + t) + half * x * sech2 * alpha * (T::one() + three * beta * x * x)
}

/// Normalized reduction axes: `axes` empty means reduce everything.
pub(crate) fn reduce_flags(rank: usize, axes: &[usize]) -> Result<Vec<bool>> {
    let mut flags = vec![axes.is_empty(); rank];
    for &a in axes {
        if a >= rank {
            return Err(Error::arg("reduce", format!("axis {a} out of range for rank {rank}")));
        }
        flags[a] = true;
    }
    Ok(flags)
}

fn reduced_shape(shape: &[usize], flags: &[bool], full: bool) -> Vec<usize> {
    if full {
        return Vec::new();
    }
    shape
        .iter()
        .zip(flags)
        .map(|(&d, &r)| if r { 1 } else { d })
        .collect()
}

/// Sums `src` (shape `shape`) over the flagged axes into a keep-dims buffer,
/// in flat input order (deterministic).
pub(crate) fn reduce_sum_into<T: Element>(
    src: &[T],
    shape: &[usize],
    flags: &[bool],
    out: &mut [T],
    out_strides: &[usize],
) {
    let in_strides = strides_of(shape);
    for (idx, &v) in src.iter().enumerate() {
        let mut rem = idx;
        let mut oidx = 0usize;
        for ax in 0..shape.len() {
            let coord = rem / in_strides[ax];
            rem %= in_strides[ax];
            if !flags[ax] {
                oidx += coord * out_strides[ax];
            }
        }
        out[oidx] = out[oidx] + v;
    }
}

impl<T: Element> Tensor<T> {
    pub fn add(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        same_shape("add", self, other)?;
        let data = self
            .data()
            .iter()
            .zip(other.data())
            .map(|(&a, &b)| a + b)
            .collect();
        let grad = self.requires_grad() || other.requires_grad();
        node("add", data, self.shape().to_vec(), grad, || {
            Expr::Add(self.clone(), other.clone())
        })
    }

    pub fn sub(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        same_shape("sub", self, other)?;
        let data = self
            .data()
            .iter()
            .zip(other.data())
            .map(|(&a, &b)| a - b)
            .collect();
        let grad = self.requires_grad() || other.requires_grad();
        node("sub", data, self.shape().to_vec(), grad, || {
            Expr::Sub(self.clone(), other.clone())
        })
    }

    pub fn mul(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        same_shape("elementwise-mul", self, other)?;
        let data = self
            .data()
            .iter()
            .zip(other.data())
            .map(|(&a, &b)| a * b)
            .collect();
        let grad = self.requires_grad() || other.requires_grad();
        node("elementwise-mul", data, self.shape().to_vec(), grad, || {
            Expr::Mul(self.clone(), other.clone())
        })
    }

    pub fn div(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        same_shape("elementwise-div", self, other)?;
        let data = self
            .data()
            .iter()
            .zip(other.data())
            .map(|(&a, &b)| a / b)
            .collect();
        let grad = self.requires_grad() || other.requires_grad();
        node("elementwise-div", data, self.shape().to_vec(), grad, || {
            Expr::Div(self.clone(), other.clone())
        })
    }

    /// Multiplies every element by a compile-time-constant scalar.
    pub fn scale(&self, c: T) -> Result<Tensor<T>> {
        let data = self.data().iter().map(|&a| a * c).collect();
        node("scalar-mul", data, self.shape().to_vec(), self.requires_grad(), || {
            Expr::ScalarMul(self.clone(), c)
        })
    }

    pub fn neg(&self) -> Result<Tensor<T>> {
        self.scale(T::of(-1.0))
    }

    /// Adds a constant scalar to every element (recorded as a broadcast `add`).
    pub fn add_scalar(&self, c: T) -> Result<Tensor<T>> {
        let k = Tensor::scalar(c).broadcast_to(self.shape())?;
        self.add(&k)
    }

    /// Matrix product. Accepts `[m,k] x [k,n]`, batched `[b,m,k] x [k,n]`, and
    /// batched `[b,m,k] x [b,k,n]`.
    pub fn matmul(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        let (sa, sb) = (self.shape(), other.shape());
        let (out_shape, batches, m, k, n) = match (sa.len(), sb.len()) {
            (2, 2) => {
                if sa[1] != sb[0] {
                    return Err(Error::shape("matmul", format!("{sa:?} x {sb:?}")));
                }
                (vec![sa[0], sb[1]], 1usize, sa[0], sa[1], sb[1])
            }
            (3, 2) => {
                if sa[2] != sb[0] {
                    return Err(Error::shape("matmul", format!("{sa:?} x {sb:?}")));
                }
                (vec![sa[0], sa[1], sb[1]], sa[0], sa[1], sa[2], sb[1])
            }
            (3, 3) => {
                if sa[0] != sb[0] || sa[2] != sb[1] {
                    return Err(Error::shape("matmul", format!("{sa:?} x {sb:?}")));
                }
                (vec![sa[0], sa[1], sb[2]], sa[0], sa[1], sa[2], sb[2])
            }
            _ => return Err(Error::shape("matmul", format!("ranks {} x {}", sa.len(), sb.len()))),
        };
        let mut out = vec![T::zero(); numel_of(&out_shape)];
        let (ad, bd) = (self.data(), other.data());
        for bi in 0..batches {
            let a_off = bi * m * k;
            let b_off = if sb.len() == 3 { bi * k * n } else { 0 };
            mm_acc(
                &ad[a_off..a_off + m * k],
                &bd[b_off..b_off + k * n],
                m,
                k,
                n,
                &mut out[bi * m * n..(bi + 1) * m * n],
            );
        }
        let grad = self.requires_grad() || other.requires_grad();
        node("matmul", out, out_shape, grad, || {
            Expr::Matmul(self.clone(), other.clone())
        })
    }

    /// Gaussian error linear unit, tanh approximation.
    pub fn gelu(&self) -> Result<Tensor<T>> {
        let data = self.data().iter().map(|&x| gelu_value(x)).collect();
        node("gelu", data, self.shape().to_vec(), self.requires_grad(), || {
            Expr::Gelu(self.clone())
        })
    }

    /// Rectified linear unit; the subgradient at zero is taken as zero.
    pub fn relu(&self) -> Result<Tensor<T>> {
        let data = self
            .data()
            .iter()
            .map(|&x| if x > T::zero() { x } else { T::zero() })
            .collect();
        node("relu", data, self.shape().to_vec(), self.requires_grad(), || {
            Expr::Relu(self.clone())
        })
    }

    /// Elementwise square root. Negative inputs surface as a non-finite error.
    pub fn sqrt(&self) -> Result<Tensor<T>> {
        let data = self.data().iter().map(|&x| x.sqrt()).collect();
        node("sqrt", data, self.shape().to_vec(), self.requires_grad(), || {
            Expr::Sqrt(self.clone())
        })
    }

    /// Sum of all elements, as a rank-0 tensor.
    pub fn sum(&self) -> Result<Tensor<T>> {
        self.sum_axes(&[])
    }

    /// Mean of all elements, as a rank-0 tensor.
    pub fn mean(&self) -> Result<Tensor<T>> {
        self.mean_axes(&[])
    }

    /// Sum over the given axes, which are kept with extent 1. An empty axis
    /// list reduces everything to a rank-0 scalar.
    pub fn sum_axes(&self, axes: &[usize]) -> Result<Tensor<T>> {
        let flags = reduce_flags(self.rank(), axes)?;
        let out_shape = reduced_shape(self.shape(), &flags, axes.is_empty());
        let out_strides = strides_of(&out_shape);
        let mut out = vec![T::zero(); numel_of(&out_shape)];
        reduce_sum_into(self.data(), self.shape(), &flags, &mut out, &out_strides);
        node("sum", out, out_shape, self.requires_grad(), || Expr::Sum {
            x: self.clone(),
            axes: axes.to_vec(),
        })
    }

    /// Mean over the given axes (kept with extent 1); empty reduces all.
    pub fn mean_axes(&self, axes: &[usize]) -> Result<Tensor<T>> {
        let flags = reduce_flags(self.rank(), axes)?;
        let out_shape = reduced_shape(self.shape(), &flags, axes.is_empty());
        let out_strides = strides_of(&out_shape);
        let mut out = vec![T::zero(); numel_of(&out_shape)];
        reduce_sum_into(self.data(), self.shape(), &flags, &mut out, &out_strides);
        let count: usize = self
            .shape()
            .iter()
            .zip(&flags)
            .filter(|(_, &r)| r)
            .map(|(&d, _)| d)
            .product();
        let inv = T::one() / T::of(count as f64);
        for v in &mut out {
            *v = *v * inv;
        }
        node("mean", out, out_shape, self.requires_grad(), || Expr::Mean {
            x: self.clone(),
            axes: axes.to_vec(),
        })
    }

    /// Contiguous sub-block: one `(start, len)` range per axis.
    pub fn slice(&self, ranges: &[(usize, usize)]) -> Result<Tensor<T>> {
        if ranges.len() != self.rank() {
            return Err(Error::arg(
                "slice",
                format!("{} ranges for rank {}", ranges.len(), self.rank()),
            ));
        }
        let mut starts = Vec::with_capacity(ranges.len());
        let mut lens = Vec::with_capacity(ranges.len());
        for (ax, &(s, l)) in ranges.iter().enumerate() {
            if l == 0 || s + l > self.shape()[ax] {
                return Err(Error::arg(
                    "slice",
                    format!("range ({s},{l}) out of bounds on axis {ax} (extent {})", self.shape()[ax]),
                ));
            }
            starts.push(s);
            lens.push(l);
        }
        let in_strides = self.strides();
        let out_strides = strides_of(&lens);
        let n_out = numel_of(&lens);
        let src = self.data();
        let mut out = vec![T::zero(); n_out];
        for (oidx, o) in out.iter_mut().enumerate() {
            let mut rem = oidx;
            let mut iidx = 0usize;
            for ax in 0..lens.len() {
                let coord = rem / out_strides[ax];
                rem %= out_strides[ax];
                iidx += (starts[ax] + coord) * in_strides[ax];
            }
            *o = src[iidx];
        }
        node("slice", out, lens.clone(), self.requires_grad(), || Expr::Slice {
            x: self.clone(),
            starts,
            lens,
        })
    }

    /// Pads every axis by `before[ax]` leading and `after[ax]` trailing
    /// entries, filled per `mode`.
    pub fn pad(&self, before: &[usize], after: &[usize], mode: PadMode) -> Result<Tensor<T>> {
        if before.len() != self.rank() || after.len() != self.rank() {
            return Err(Error::arg("pad", "pad widths must cover every axis"));
        }
        let out_shape: Vec<usize> = self
            .shape()
            .iter()
            .zip(before.iter().zip(after))
            .map(|(&d, (&b, &a))| d + b + a)
            .collect();
        let in_strides = self.strides();
        let out_strides = strides_of(&out_shape);
        let src = self.data();
        let mut out = vec![T::zero(); numel_of(&out_shape)];
        'outer: for (oidx, o) in out.iter_mut().enumerate() {
            let mut rem = oidx;
            let mut iidx = 0usize;
            for ax in 0..out_shape.len() {
                let coord = (rem / out_strides[ax]) as i64 - before[ax] as i64;
                rem %= out_strides[ax];
                let n = self.shape()[ax] as i64;
                let c = match mode {
                    PadMode::Zero => {
                        if coord < 0 || coord >= n {
                            continue 'outer;
                        }
                        coord as usize
                    }
                    PadMode::Circular => coord.rem_euclid(n) as usize,
                };
                iidx += c * in_strides[ax];
            }
            *o = src[iidx];
        }
        node("pad", out, out_shape, self.requires_grad(), || Expr::Pad {
            x: self.clone(),
            before: before.to_vec(),
            after: after.to_vec(),
            mode,
        })
    }

    /// Same data, new shape (element count must match).
    pub fn reshape(&self, new_shape: &[usize]) -> Result<Tensor<T>> {
        if numel_of(new_shape) != self.numel() {
            return Err(Error::shape(
                "reshape",
                format!("{:?} -> {:?}", self.shape(), new_shape),
            ));
        }
        // The buffer is immutable and row-major, so a reshape is a metadata
        // change; data is copied only because nodes own their buffers.
        let data = self.data().to_vec();
        node("reshape", data, new_shape.to_vec(), self.requires_grad(), || {
            Expr::Reshape(self.clone())
        })
    }

    /// Axis permutation: output axis `i` is input axis `axes[i]`.
    pub fn permute(&self, axes: &[usize]) -> Result<Tensor<T>> {
        let rank = self.rank();
        let mut seen = vec![false; rank];
        if axes.len() != rank || axes.iter().any(|&a| a >= rank || std::mem::replace(&mut seen[a], true)) {
            return Err(Error::arg("permute", format!("invalid permutation {axes:?} for rank {rank}")));
        }
        let out_shape: Vec<usize> = axes.iter().map(|&a| self.shape()[a]).collect();
        let in_strides = self.strides();
        let out_strides = strides_of(&out_shape);
        let src = self.data();
        let mut out = vec![T::zero(); self.numel()];
        for (oidx, o) in out.iter_mut().enumerate() {
            let mut rem = oidx;
            let mut iidx = 0usize;
            for ax in 0..rank {
                let coord = rem / out_strides[ax];
                rem %= out_strides[ax];
                iidx += coord * in_strides[axes[ax]];
            }
            *o = src[iidx];
        }
        node("permute", out, out_shape, self.requires_grad(), || Expr::Permute {
            x: self.clone(),
            axes: axes.to_vec(),
        })
    }

    /// Broadcast to `target`, right-aligned: each axis must match or have
    /// extent 1 in the source (missing leading axes count as 1).
    pub fn broadcast_to(&self, target: &[usize]) -> Result<Tensor<T>> {
        let r = self.rank();
        let big = target.len();
        if r > big {
            return Err(Error::shape(
                "broadcast",
                format!("{:?} -> {:?}", self.shape(), target),
            ));
        }
        let offset = big - r;
        for (i, &t) in target.iter().enumerate() {
            let s = if i < offset { 1 } else { self.shape()[i - offset] };
            if s != t && s != 1 {
                return Err(Error::shape(
                    "broadcast",
                    format!("{:?} -> {:?}", self.shape(), target),
                ));
            }
        }
        let in_strides = self.strides();
        let out_strides = strides_of(target);
        let src = self.data();
        let mut out = vec![T::zero(); numel_of(target)];
        for (oidx, o) in out.iter_mut().enumerate() {
            let mut rem = oidx;
            let mut iidx = 0usize;
            for ax in 0..big {
                let coord = rem / out_strides[ax];
                rem %= out_strides[ax];
                if ax >= offset && self.shape()[ax - offset] != 1 {
                    iidx += coord * in_strides[ax - offset];
                }
            }
            *o = src[iidx];
        }
        node("broadcast", out, target.to_vec(), self.requires_grad(), || {
            Expr::Broadcast(self.clone())
        })
    }

    /// 2-D cross-correlation with same-size output.
    ///
    /// Input `[b, c_in, h, w]`, kernel `[c_out, c_in, kh, kw]` with odd
    /// `kh`, `kw`; borders follow `mode`.
    pub fn conv2d(&self, kernel: &Tensor<T>, mode: PadMode) -> Result<Tensor<T>> {
        let (xs, ks) = (self.shape(), kernel.shape());
        if xs.len() != 4 || ks.len() != 4 {
            return Err(Error::shape("conv2d", format!("input {xs:?}, kernel {ks:?}")));
        }
        let (b, ci, h, w) = (xs[0], xs[1], xs[2], xs[3]);
        let (co, ci2, kh, kw) = (ks[0], ks[1], ks[2], ks[3]);
        if ci != ci2 {
            return Err(Error::shape(
                "conv2d",
                format!("input channels {ci} vs kernel channels {ci2}"),
            ));
        }
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(Error::arg("conv2d", format!("kernel extents must be odd, got {kh}x{kw}")));
        }
        let (ph, pw) = ((kh - 1) / 2, (kw - 1) / 2);
        let wp = w + 2 * pw;
        let (xd, kd) = (self.data(), kernel.data());
        let mut out = vec![T::zero(); b * co * h * w];
        for bi in 0..b {
            for c_in in 0..ci {
                let plane = &xd[(bi * ci + c_in) * h * w..][..h * w];
                let pad = padded_plane(plane, h, w, ph, pw, mode);
                for c_out in 0..co {
                    let obase = (bi * co + c_out) * h * w;
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let wgt = kd[((c_out * ci + c_in) * kh + ky) * kw + kx];
                            for y in 0..h {
                                let prow = &pad[(y + ky) * wp + kx..][..w];
                                let orow = &mut out[obase + y * w..][..w];
                                for (o, &p) in orow.iter_mut().zip(prow) {
                                    *o = *o + wgt * p;
                                }
                            }
                        }
                    }
                }
            }
        }
        let grad = self.requires_grad() || kernel.requires_grad();
        node("conv2d", out, vec![b, co, h, w], grad, || Expr::Conv2d {
            x: self.clone(),
            kernel: kernel.clone(),
            mode,
        })
    }
}

/// Attribute bag for [`apply_primitive`]; unused fields stay `None`.
#[derive(Debug, Clone, Default)]
pub struct Attrs {
    pub scalar: Option<f64>,
    pub axes: Option<Vec<usize>>,
    pub starts: Option<Vec<usize>>,
    pub lens: Option<Vec<usize>>,
    pub before: Option<Vec<usize>>,
    pub after: Option<Vec<usize>>,
    pub pad_mode: Option<PadMode>,
    pub shape: Option<Vec<usize>>,
    pub modes: Option<(usize, usize)>,
    pub target: Option<(usize, usize)>,
}

impl Attrs {
    fn want<V>(v: &Option<V>, op: &'static str, name: &str) -> Result<V>
    where
        V: Clone,
    {
        v.clone()
            .ok_or_else(|| Error::arg(op, format!("missing attribute `{name}`")))
    }
}

fn arity<T: Element>(op: &'static str, inputs: &[Tensor<T>], n: usize) -> Result<()> {
    if inputs.len() != n {
        return Err(Error::arg(
            op,
            format!("expected {n} inputs, got {}", inputs.len()),
        ));
    }
    Ok(())
}

/// Uniform dispatch over every primitive by [`PrimitiveKind`].
///
/// Complex-valued ops use the dual-plane convention: a complex tensor is a
/// real tensor with a leading axis of extent 2 (plane 0 real, plane 1
/// imaginary), so inputs and outputs here are always plain real tensors.
pub fn apply_primitive<T: Element>(
    kind: PrimitiveKind,
    inputs: &[Tensor<T>],
    attrs: &Attrs,
) -> Result<Tensor<T>> {
    use PrimitiveKind as K;
    match kind {
        K::Add => {
            arity("add", inputs, 2)?;
            inputs[0].add(&inputs[1])
        }
        K::Sub => {
            arity("sub", inputs, 2)?;
            inputs[0].sub(&inputs[1])
        }
        K::Mul => {
            arity("elementwise-mul", inputs, 2)?;
            inputs[0].mul(&inputs[1])
        }
        K::Div => {
            arity("elementwise-div", inputs, 2)?;
            inputs[0].div(&inputs[1])
        }
        K::ScalarMul => {
            arity("scalar-mul", inputs, 1)?;
            let c = Attrs::want(&attrs.scalar, "scalar-mul", "scalar")?;
            inputs[0].scale(T::of(c))
        }
        K::Matmul => {
            arity("matmul", inputs, 2)?;
            inputs[0].matmul(&inputs[1])
        }
        K::Gelu => {
            arity("gelu", inputs, 1)?;
            inputs[0].gelu()
        }
        K::Relu => {
            arity("relu", inputs, 1)?;
            inputs[0].relu()
        }
        K::Sqrt => {
            arity("sqrt", inputs, 1)?;
            inputs[0].sqrt()
        }
        K::Sum => {
            arity("sum", inputs, 1)?;
            inputs[0].sum_axes(&attrs.axes.clone().unwrap_or_default())
        }
        K::Mean => {
            arity("mean", inputs, 1)?;
            inputs[0].mean_axes(&attrs.axes.clone().unwrap_or_default())
        }
        K::Slice => {
            arity("slice", inputs, 1)?;
            let starts = Attrs::want(&attrs.starts, "slice", "starts")?;
            let lens = Attrs::want(&attrs.lens, "slice", "lens")?;
            if starts.len() != lens.len() {
                return Err(Error::arg("slice", "starts/lens length mismatch"));
            }
            let ranges: Vec<(usize, usize)> =
                starts.into_iter().zip(lens).collect();
            inputs[0].slice(&ranges)
        }
        K::Pad => {
            arity("pad", inputs, 1)?;
            let before = Attrs::want(&attrs.before, "pad", "before")?;
            let after = Attrs::want(&attrs.after, "pad", "after")?;
            let mode = Attrs::want(&attrs.pad_mode, "pad", "pad_mode")?;
            inputs[0].pad(&before, &after, mode)
        }
        K::Reshape => {
            arity("reshape", inputs, 1)?;
            let shape = Attrs::want(&attrs.shape, "reshape", "shape")?;
            inputs[0].reshape(&shape)
        }
        K::Permute => {
            arity("permute", inputs, 1)?;
            let axes = Attrs::want(&attrs.axes, "permute", "axes")?;
            inputs[0].permute(&axes)
        }
        K::Broadcast => {
            arity("broadcast", inputs, 1)?;
            let shape = Attrs::want(&attrs.shape, "broadcast", "shape")?;
            inputs[0].broadcast_to(&shape)
        }
        K::Conv2d => {
            arity("conv2d", inputs, 2)?;
            let mode = Attrs::want(&attrs.pad_mode, "conv2d", "pad_mode")?;
            inputs[0].conv2d(&inputs[1], mode)
        }
        K::Fft2 => {
            arity("fft2", inputs, 1)?;
            Ok(inputs[0].fft2()?.into_inner())
        }
        K::Ifft2 => {
            arity("ifft2", inputs, 1)?;
            super::ComplexTensor::from_raw(inputs[0].clone())?.ifft2()
        }
        K::ModeMix => {
            arity("mode-mix", inputs, 2)?;
            let modes = Attrs::want(&attrs.modes, "mode-mix", "modes")?;
            let x = super::ComplexTensor::from_raw(inputs[0].clone())?;
            Ok(x.mode_mix(&inputs[1], modes)?.into_inner())
        }
        K::SpectralResample => {
            arity("spectral-resample", inputs, 1)?;
            let target = Attrs::want(&attrs.target, "spectral-resample", "target")?;
            inputs[0].spectral_resample(target)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::PadMode;
    use super::*;

    fn t64(data: &[f64], shape: &[usize]) -> Tensor<f64> {
        Tensor::from_vec(data.to_vec(), shape).unwrap()
    }

    #[test]
    fn add_and_scalar_mul() {
        let a = t64(&[1.0, 2.0], &[2]);
        let b = t64(&[10.0, 20.0], &[2]);
        assert_eq!(a.add(&b).unwrap().data(), &[11.0, 22.0]);
        assert_eq!(a.scale(3.0).unwrap().data(), &[3.0, 6.0]);
        assert!(a.add(&t64(&[1.0], &[1])).is_err());
    }

    #[test]
    fn matmul_identity() {
        let a = t64(&[1.0, 2.0, 3.0, 4.0], &[2, 2]);
        let eye = t64(&[1.0, 0.0, 0.0, 1.0], &[2, 2]);
        assert_eq!(a.matmul(&eye).unwrap().data(), a.data());
    }

    #[test]
    fn matmul_batched() {
        // Two stacked 1x2 x 2x1 products.
        let a = t64(&[1.0, 2.0, 3.0, 4.0], &[2, 1, 2]);
        let b = t64(&[1.0, 1.0, 2.0, 0.5], &[2, 2, 1]);
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.shape(), &[2, 1, 1]);
        assert_eq!(c.data(), &[3.0, 8.0]);
        // Shared right operand.
        let b2 = t64(&[1.0, 1.0], &[2, 1]);
        let c2 = a.matmul(&b2).unwrap();
        assert_eq!(c2.data(), &[3.0, 7.0]);
    }

    #[test]
    fn mean_of_one_to_four() {
        let a = t64(&[1.0, 2.0, 3.0, 4.0], &[4]);
        assert_eq!(a.mean().unwrap().item().unwrap(), 2.5);
        assert_eq!(a.sum().unwrap().item().unwrap(), 10.0);
    }

    #[test]
    fn sum_axes_keeps_dims() {
        let a = t64(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[2, 3]);
        let s = a.sum_axes(&[1]).unwrap();
        assert_eq!(s.shape(), &[2, 1]);
        assert_eq!(s.data(), &[6.0, 15.0]);
        let m = a.mean_axes(&[0]).unwrap();
        assert_eq!(m.shape(), &[1, 3]);
        assert_eq!(m.data(), &[2.5, 3.5, 4.5]);
    }

    #[test]
    fn relu_and_gelu_spot_values() {
        let a = t64(&[-1.0, 0.0, 2.0], &[3]);
        assert_eq!(a.relu().unwrap().data(), &[0.0, 0.0, 2.0]);
        let g = a.gelu().unwrap();
        // gelu(0) = 0 and gelu(2) close to 1.9546 for the tanh form.
        assert_eq!(g.data()[1], 0.0);
        assert!((g.data()[2] - 1.9546).abs() < 1e-3);
        assert!(g.data()[0] < 0.0 && g.data()[0] > -0.2);
    }

    #[test]
    fn slice_and_pad_roundtrip() {
        let a = t64(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[2, 3]);
        let s = a.slice(&[(0, 2), (1, 2)]).unwrap();
        assert_eq!(s.shape(), &[2, 2]);
        assert_eq!(s.data(), &[2.0, 3.0, 5.0, 6.0]);
        let p = s.pad(&[0, 1], &[0, 0], PadMode::Zero).unwrap();
        assert_eq!(p.shape(), &[2, 3]);
        assert_eq!(p.data(), &[0.0, 2.0, 3.0, 0.0, 5.0, 6.0]);
    }

    #[test]
    fn circular_pad_wraps() {
        let a = t64(&[1.0, 2.0, 3.0], &[3]);
        let p = a.pad(&[1], &[1], PadMode::Circular).unwrap();
        assert_eq!(p.data(), &[3.0, 1.0, 2.0, 3.0, 1.0]);
    }

    #[test]
    fn permute_transposes() {
        let a = t64(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[2, 3]);
        let p = a.permute(&[1, 0]).unwrap();
        assert_eq!(p.shape(), &[3, 2]);
        assert_eq!(p.data(), &[1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        assert!(a.permute(&[0, 0]).is_err());
    }

    #[test]
    fn broadcast_right_aligned() {
        let a = t64(&[1.0, 2.0], &[2]);
        let b = a.broadcast_to(&[3, 2]).unwrap();
        assert_eq!(b.data(), &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        let s = Tensor::<f64>::scalar(7.0).broadcast_to(&[2, 2]).unwrap();
        assert_eq!(s.data(), &[7.0; 4]);
        assert!(a.broadcast_to(&[3]).is_err());
    }

    #[test]
    fn conv2d_identity_kernel() {
        let x = t64(&(0..16).map(|v| v as f64).collect::<Vec<_>>(), &[1, 1, 4, 4]);
        let k = t64(&[0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0], &[1, 1, 3, 3]);
        let y = x.conv2d(&k, PadMode::Zero).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn conv2d_circular_average_of_constant() {
        let x = Tensor::<f64>::full(&[1, 1, 4, 4], 2.0);
        let k = Tensor::<f64>::full(&[1, 1, 3, 3], 1.0 / 9.0);
        let y = x.conv2d(&k, PadMode::Circular).unwrap();
        for &v in y.data() {
            assert!((v - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn conv2d_rejects_even_kernels() {
        let x = Tensor::<f64>::zeros(&[1, 1, 4, 4]);
        let k = Tensor::<f64>::zeros(&[1, 1, 2, 2]);
        assert!(x.conv2d(&k, PadMode::Zero).is_err());
    }

    #[test]
    fn non_finite_is_rejected() {
        let a = t64(&[1.0, 0.0], &[2]);
        let b = t64(&[0.0, 0.0], &[2]);
        let err = a.div(&b).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
        let neg = t64(&[-1.0], &[1]);
        assert!(matches!(neg.sqrt().unwrap_err(), Error::NonFinite { .. }));
    }

    #[test]
    fn apply_primitive_dispatch_and_unknown_kind() {
        let a = t64(&[1.0, 2.0], &[2]);
        let b = t64(&[3.0, 4.0], &[2]);
        let out = apply_primitive(PrimitiveKind::Add, &[a.clone(), b], &Attrs::default()).unwrap();
        assert_eq!(out.data(), &[4.0, 6.0]);
        let scaled = apply_primitive(
            PrimitiveKind::ScalarMul,
            &[a],
            &Attrs {
                scalar: Some(2.0),
                ..Attrs::default()
            },
        )
        .unwrap();
        assert_eq!(scaled.data(), &[2.0, 4.0]);
        let parsed: Result<PrimitiveKind> = "definitely-not-an-op".parse().map_err(Into::into);
        assert!(matches!(parsed.unwrap_err(), Error::UnknownKind(_)));
        let roundtrip: PrimitiveKind = "mode-mix".parse().unwrap();
        assert_eq!(roundtrip, PrimitiveKind::ModeMix);
    }

    #[test]
    fn record_lists_ops_in_execution_order() {
        let a = t64(&[1.0, 2.0], &[2]).tracked();
        let b = a.gelu().unwrap();
        let c = b.sum().unwrap();
        let rec = c.record();
        assert_eq!(rec.len(), 2);
        assert_eq!(rec.entries[0].kind, PrimitiveKind::Gelu);
        assert_eq!(rec.entries[1].kind, PrimitiveKind::Sum);
        assert_eq!(rec.count(PrimitiveKind::Gelu), 1);
    }

    #[test]
    fn untracked_ops_record_nothing() {
        let a = t64(&[1.0, 2.0], &[2]);
        let c = a.gelu().unwrap().sum().unwrap();
        assert!(c.record().is_empty());
        assert!(!c.requires_grad());
    }
}
