//! A small dense-tensor engine with reverse-mode automatic differentiation.
//!
//! Tensors are immutable, heap-allocated, and generic over [`Element`]
//! (`f32` or `f64`). Every operation that consumed a gradient-tracking input
//! records the application on the output, forming an implicit computation
//! graph; [`Tensor::backward`] walks that graph in reverse creation order and
//! accumulates exact gradients for all tracked leaves.
//!
//! Accumulation order is fixed by node id, so repeated runs over the same
//! graph produce bit-identical gradients.

mod backward;
mod dtype;
mod expr;
mod ops;
mod spectral;

pub mod gradcheck;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

pub use backward::GradMap;
pub use dtype::{DType, Element};
pub use expr::{PrimitiveKind, Record, RecordEntry};
pub use ops::{apply_primitive, Attrs};
pub(crate) use ops::mm_acc;
pub use spectral::{retained_indices, ComplexTensor};

use crate::error::{Error, Result};
use expr::Expr;

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

/// Padding semantics shared by [`Tensor::pad`] and [`Tensor::conv2d`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PadMode {
    /// Extend with zeros.
    Zero,
    /// Wrap around periodically.
    Circular,
}

pub(crate) struct TensorInner<T: Element> {
    id: u64,
    shape: Vec<usize>,
    data: Arc<Vec<T>>,
    requires_grad: bool,
    expr: Option<Expr<T>>,
}

/// An immutable n-dimensional array with optional gradient tracking.
///
/// Cloning is cheap (a reference-count bump); the buffer is shared.
pub struct Tensor<T: Element> {
    inner: Arc<TensorInner<T>>,
}

impl<T: Element> Clone for Tensor<T> {
    fn clone(&self) -> Self {
        Tensor {
            inner: Arc::clone(&self.inner),
        }
    }
}

impl<T: Element> std::fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("id", &self.id())
            .field("shape", &self.shape())
            .field("requires_grad", &self.requires_grad())
            .finish()
    }
}

pub(crate) fn numel_of(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl<T: Element> Tensor<T> {
    pub(crate) fn make(
        data: Vec<T>,
        shape: Vec<usize>,
        requires_grad: bool,
        expr: Option<Expr<T>>,
    ) -> Self {
        debug_assert_eq!(data.len(), numel_of(&shape));
        Tensor {
            inner: Arc::new(TensorInner {
                id: fresh_id(),
                shape,
                data: Arc::new(data),
                requires_grad,
                expr,
            }),
        }
    }

    /// Untracked leaf from a flat row-major buffer.
    pub fn from_vec(data: Vec<T>, shape: &[usize]) -> Result<Self> {
        if data.len() != numel_of(shape) {
            return Err(Error::shape(
                "from_vec",
                format!("buffer length {} vs shape {:?}", data.len(), shape),
            ));
        }
        Ok(Tensor::make(data, shape.to_vec(), false, None))
    }

    /// Untracked leaf from `f64` values, converted to the element type.
    pub fn from_f64_slice(data: &[f64], shape: &[usize]) -> Result<Self> {
        Tensor::from_vec(data.iter().map(|&v| T::of(v)).collect(), shape)
    }

    /// All-zero untracked leaf.
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor::make(vec![T::zero(); numel_of(shape)], shape.to_vec(), false, None)
    }

    /// Constant-filled untracked leaf.
    pub fn full(shape: &[usize], value: T) -> Self {
        Tensor::make(vec![value; numel_of(shape)], shape.to_vec(), false, None)
    }

    /// Rank-0 scalar.
    pub fn scalar(value: T) -> Self {
        Tensor::make(vec![value], Vec::new(), false, None)
    }

    /// A fresh gradient-tracking leaf sharing this tensor's buffer.
    pub fn tracked(&self) -> Self {
        Tensor {
            inner: Arc::new(TensorInner {
                id: fresh_id(),
                shape: self.shape().to_vec(),
                data: Arc::clone(&self.inner.data),
                requires_grad: true,
                expr: None,
            }),
        }
    }

    /// A fresh untracked leaf sharing this tensor's buffer.
    pub fn detach(&self) -> Self {
        Tensor {
            inner: Arc::new(TensorInner {
                id: fresh_id(),
                shape: self.shape().to_vec(),
                data: Arc::clone(&self.inner.data),
                requires_grad: false,
                expr: None,
            }),
        }
    }

    /// Rebuilds this leaf with a new buffer of the same shape (fresh id,
    /// same tracking flag). Errors if the tensor is not a leaf.
    pub fn with_data(&self, data: Vec<T>) -> Result<Self> {
        if self.inner.expr.is_some() {
            return Err(Error::arg("with_data", "not a leaf tensor"));
        }
        if data.len() != self.numel() {
            return Err(Error::shape(
                "with_data",
                format!("buffer length {} vs shape {:?}", data.len(), self.shape()),
            ));
        }
        Ok(Tensor::make(
            data,
            self.shape().to_vec(),
            self.requires_grad(),
            None,
        ))
    }

    pub fn id(&self) -> u64 {
        self.inner.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    pub fn rank(&self) -> usize {
        self.inner.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.inner.data.len()
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.requires_grad
    }

    pub fn is_leaf(&self) -> bool {
        self.inner.expr.is_none()
    }

    /// Flat row-major view of the data.
    pub fn data(&self) -> &[T] {
        &self.inner.data
    }

    /// Flat row-major copy converted to `f64`.
    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.inner.data.iter().map(|&v| v.as_f64()).collect()
    }

    /// The single element of a one-element tensor.
    pub fn item(&self) -> Result<T> {
        if self.numel() != 1 {
            return Err(Error::NotScalar {
                numel: self.numel(),
            });
        }
        Ok(self.inner.data[0])
    }

    pub(crate) fn expr(&self) -> Option<&Expr<T>> {
        self.inner.expr.as_ref()
    }

    /// Row-major strides for this tensor's shape.
    pub(crate) fn strides(&self) -> Vec<usize> {
        strides_of(self.shape())
    }
}

pub(crate) fn strides_of(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * shape[i + 1];
    }
    strides
}

/// Errors if any value in `data` is non-finite; `op` names the producer.
pub(crate) fn ensure_finite<T: Element>(op: &'static str, data: &[T]) -> Result<()> {
    if data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { op })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strides_are_row_major() {
        assert_eq!(strides_of(&[2, 3, 4]), vec![12, 4, 1]);
        assert_eq!(strides_of(&[5]), vec![1]);
        assert_eq!(strides_of(&[]), Vec::<usize>::new());
    }

    #[test]
    fn from_vec_checks_length() {
        assert!(Tensor::<f64>::from_vec(vec![1.0, 2.0], &[3]).is_err());
        let t = Tensor::<f64>::from_vec(vec![1.0, 2.0, 3.0], &[3]).unwrap();
        assert_eq!(t.shape(), &[3]);
        assert!(!t.requires_grad());
    }

    #[test]
    fn tracked_shares_data_with_fresh_identity() {
        let t = Tensor::<f64>::from_vec(vec![1.0, 2.0], &[2]).unwrap();
        let p = t.tracked();
        assert!(p.requires_grad());
        assert_ne!(p.id(), t.id());
        assert_eq!(p.data(), t.data());
    }

    #[test]
    fn ids_increase() {
        let a = Tensor::<f64>::zeros(&[1]);
        let b = Tensor::<f64>::zeros(&[1]);
        assert!(b.id() > a.id());
    }

    #[test]
    fn scalar_item() {
        let s = Tensor::<f64>::scalar(4.5);
        assert_eq!(s.rank(), 0);
        assert_eq!(s.numel(), 1);
        assert_eq!(s.item().unwrap(), 4.5);
        assert!(Tensor::<f64>::zeros(&[2]).item().is_err());
    }
}
