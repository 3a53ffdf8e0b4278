//! Scalar fields on uniform 2-D grids.
//!
//! Generation and analysis run in `f64` throughout; fields are converted to
//! the training element type only at dataset-serialization time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

/// Boundary behaviour of a sampled random field or PDE problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryKind {
    /// Periodic torus; grid points `x_m = m / n` exclude the right edge.
    Periodic,
    /// Homogeneous Dirichlet; grid points `x_m = m / (n - 1)` include both
    /// edges.
    DirichletZero,
    /// Homogeneous Neumann; cosine basis on the vertex grid.
    Neumann,
}

impl BoundaryKind {
    /// Physical coordinate of index `i` on an axis with `n` points.
    pub fn coord(&self, i: usize, n: usize) -> f64 {
        match self {
            BoundaryKind::Periodic => i as f64 / n as f64,
            BoundaryKind::DirichletZero | BoundaryKind::Neumann => i as f64 / (n - 1) as f64,
        }
    }
}

/// A dense `h x w` scalar field in row-major order, `f64` storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Field2D {
    h: usize,
    w: usize,
    data: Vec<f64>,
}

impl Field2D {
    pub fn new(h: usize, w: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != h * w {
            return Err(Error::shape(
                "field",
                format!("{} values for {h}x{w} grid", data.len()),
            ));
        }
        Ok(Field2D { h, w, data })
    }

    pub fn zeros(h: usize, w: usize) -> Self {
        Field2D {
            h,
            w,
            data: vec![0.0; h * w],
        }
    }

    /// Builds a field by evaluating `f(row, col)`.
    pub fn from_fn(h: usize, w: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(h * w);
        for i in 0..h {
            for j in 0..w {
                data.push(f(i, j));
            }
        }
        Field2D { h, w, data }
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.w + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.w + j] = v;
    }

    /// Elementwise map into a new field.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field2D {
        Field2D {
            h: self.h,
            w: self.w,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise difference `self - other`.
    pub fn sub(&self, other: &Field2D) -> Result<Field2D> {
        if self.h != other.h || self.w != other.w {
            return Err(Error::shape(
                "field",
                format!("{}x{} vs {}x{}", self.h, self.w, other.h, other.w),
            ));
        }
        Ok(Field2D {
            h: self.h,
            w: self.w,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    /// Discrete l2 norm `sqrt(sum v^2)` (no grid weights).
    pub fn norm_l2(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Maximum absolute value.
    pub fn norm_max(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Relative l2 distance to `other` with a `1e-12` floor on the reference
    /// norm.
    pub fn rel_l2(&self, reference: &Field2D) -> Result<f64> {
        let diff = self.sub(reference)?;
        Ok(diff.norm_l2() / reference.norm_l2().max(1e-12))
    }

    /// Mean of all entries.
    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / (self.h * self.w) as f64
    }

    /// Converts into a `[1, 1, h, w]` tensor of the requested element type.
    pub fn to_tensor<T: Element>(&self) -> Tensor<T> {
        let data: Vec<T> = self.data.iter().map(|&v| T::of(v)).collect();
        Tensor::from_vec(data, &[1, 1, self.h, self.w]).expect("sizes agree by construction")
    }

    /// Builds a field from a flat `f64` slice in row-major order.
    pub fn from_slice(h: usize, w: usize, data: &[f64]) -> Result<Self> {
        Field2D::new(h, w, data.to_vec())
    }
}
