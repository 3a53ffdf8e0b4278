use std::collections::HashSet;
use std::str::FromStr;

use super::{Element, PadMode, Tensor};
use crate::error::Error;

/// Identifier for every differentiable primitive the engine supports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrimitiveKind {
    Add,
    Sub,
    Mul,
    Div,
    ScalarMul,
    Matmul,
    Gelu,
    Relu,
    Sqrt,
    Sum,
    Mean,
    Slice,
    Pad,
    Reshape,
    Permute,
    Broadcast,
    Conv2d,
    Fft2,
    Ifft2,
    ModeMix,
    SpectralResample,
}

impl PrimitiveKind {
    pub const ALL: [PrimitiveKind; 21] = [
        PrimitiveKind::Add,
        PrimitiveKind::Sub,
        PrimitiveKind::Mul,
        PrimitiveKind::Div,
        PrimitiveKind::ScalarMul,
        PrimitiveKind::Matmul,
        PrimitiveKind::Gelu,
        PrimitiveKind::Relu,
        PrimitiveKind::Sqrt,
        PrimitiveKind::Sum,
        PrimitiveKind::Mean,
        PrimitiveKind::Slice,
        PrimitiveKind::Pad,
        PrimitiveKind::Reshape,
        PrimitiveKind::Permute,
        PrimitiveKind::Broadcast,
        PrimitiveKind::Conv2d,
        PrimitiveKind::Fft2,
        PrimitiveKind::Ifft2,
        PrimitiveKind::ModeMix,
        PrimitiveKind::SpectralResample,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PrimitiveKind::Add => "add",
            PrimitiveKind::Sub => "sub",
            PrimitiveKind::Mul => "elementwise-mul",
            PrimitiveKind::Div => "elementwise-div",
            PrimitiveKind::ScalarMul => "scalar-mul",
            PrimitiveKind::Matmul => "matmul",
            PrimitiveKind::Gelu => "gelu",
            PrimitiveKind::Relu => "relu",
            PrimitiveKind::Sqrt => "sqrt",
            PrimitiveKind::Sum => "sum",
            PrimitiveKind::Mean => "mean",
            PrimitiveKind::Slice => "slice",
            PrimitiveKind::Pad => "pad",
            PrimitiveKind::Reshape => "reshape",
            PrimitiveKind::Permute => "permute",
            PrimitiveKind::Broadcast => "broadcast",
            PrimitiveKind::Conv2d => "conv2d",
            PrimitiveKind::Fft2 => "fft2",
            PrimitiveKind::Ifft2 => "ifft2",
            PrimitiveKind::ModeMix => "mode-mix",
            PrimitiveKind::SpectralResample => "spectral-resample",
        }
    }
}

impl FromStr for PrimitiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        PrimitiveKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownKind(s.to_string()))
    }
}

/// The recorded application that produced a tensor. Inputs are held by
/// reference-counted handle, so the record of a whole forward pass hangs off
/// its output tensor and stays alive exactly as long as someone can still ask
/// for gradients.
pub(crate) enum Expr<T: Element> {
    Add(Tensor<T>, Tensor<T>),
    Sub(Tensor<T>, Tensor<T>),
    Mul(Tensor<T>, Tensor<T>),
    Div(Tensor<T>, Tensor<T>),
    ScalarMul(Tensor<T>, T),
    Matmul(Tensor<T>, Tensor<T>),
    Gelu(Tensor<T>),
    Relu(Tensor<T>),
    Sqrt(Tensor<T>),
    /// Sum over `axes` (kept as size-1); `axes` empty means all axes.
    Sum {
        x: Tensor<T>,
        axes: Vec<usize>,
    },
    Mean {
        x: Tensor<T>,
        axes: Vec<usize>,
    },
    Slice {
        x: Tensor<T>,
        starts: Vec<usize>,
        lens: Vec<usize>,
    },
    Pad {
        x: Tensor<T>,
        before: Vec<usize>,
        after: Vec<usize>,
        mode: PadMode,
    },
    Reshape(Tensor<T>),
    Permute {
        x: Tensor<T>,
        axes: Vec<usize>,
    },
    Broadcast(Tensor<T>),
    Conv2d {
        x: Tensor<T>,
        kernel: Tensor<T>,
        mode: PadMode,
    },
    Fft2(Tensor<T>),
    Ifft2(Tensor<T>),
    ModeMix {
        x: Tensor<T>,
        weight: Tensor<T>,
        modes: (usize, usize),
    },
    SpectralResample {
        x: Tensor<T>,
        from: (usize, usize),
        to: (usize, usize),
    },
}

impl<T: Element> Expr<T> {
    pub(crate) fn kind(&self) -> PrimitiveKind {
        match self {
            Expr::Add(..) => PrimitiveKind::Add,
            Expr::Sub(..) => PrimitiveKind::Sub,
            Expr::Mul(..) => PrimitiveKind::Mul,
            Expr::Div(..) => PrimitiveKind::Div,
            Expr::ScalarMul(..) => PrimitiveKind::ScalarMul,
            Expr::Matmul(..) => PrimitiveKind::Matmul,
            Expr::Gelu(..) => PrimitiveKind::Gelu,
            Expr::Relu(..) => PrimitiveKind::Relu,
            Expr::Sqrt(..) => PrimitiveKind::Sqrt,
            Expr::Sum { .. } => PrimitiveKind::Sum,
            Expr::Mean { .. } => PrimitiveKind::Mean,
            Expr::Slice { .. } => PrimitiveKind::Slice,
            Expr::Pad { .. } => PrimitiveKind::Pad,
            Expr::Reshape(..) => PrimitiveKind::Reshape,
            Expr::Permute { .. } => PrimitiveKind::Permute,
            Expr::Broadcast(..) => PrimitiveKind::Broadcast,
            Expr::Conv2d { .. } => PrimitiveKind::Conv2d,
            Expr::Fft2(..) => PrimitiveKind::Fft2,
            Expr::Ifft2(..) => PrimitiveKind::Ifft2,
            Expr::ModeMix { .. } => PrimitiveKind::ModeMix,
            Expr::SpectralResample { .. } => PrimitiveKind::SpectralResample,
        }
    }

    pub(crate) fn inputs(&self) -> Vec<&Tensor<T>> {
        match self {
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Matmul(a, b) => vec![a, b],
            Expr::ScalarMul(a, _) => vec![a],
            Expr::Gelu(a) | Expr::Relu(a) | Expr::Sqrt(a) => vec![a],
            Expr::Sum { x, .. } | Expr::Mean { x, .. } => vec![x],
            Expr::Slice { x, .. } | Expr::Pad { x, .. } => vec![x],
            Expr::Reshape(x) | Expr::Broadcast(x) => vec![x],
            Expr::Permute { x, .. } => vec![x],
            Expr::Conv2d { x, kernel, .. } => vec![x, kernel],
            Expr::Fft2(x) | Expr::Ifft2(x) => vec![x],
            Expr::ModeMix { x, weight, .. } => vec![x, weight],
            Expr::SpectralResample { x, .. } => vec![x],
        }
    }
}

/// One entry of a [`Record`]: the primitive kind plus the tensor ids it
/// connected.
#[derive(Debug, Clone)]
pub struct RecordEntry {
    pub kind: PrimitiveKind,
    pub inputs: Vec<u64>,
    pub output: u64,
}

/// The ordered list of primitive applications reachable from one output,
/// in execution (topological) order. Inputs of an entry always precede it.
#[derive(Debug, Clone, Default)]
pub struct Record {
    pub entries: Vec<RecordEntry>,
}

impl Record {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of applications of `kind` in the record.
    pub fn count(&self, kind: PrimitiveKind) -> usize {
        self.entries.iter().filter(|e| e.kind == kind).count()
    }
}

/// All graph nodes reachable from `output`, sorted ascending by id.
/// Creation ids increase monotonically, so this is a topological order.
pub(crate) fn collect_nodes<T: Element>(output: &Tensor<T>) -> Vec<Tensor<T>> {
    let mut seen: HashSet<u64> = HashSet::new();
    let mut nodes: Vec<Tensor<T>> = Vec::new();
    let mut stack: Vec<Tensor<T>> = vec![output.clone()];
    while let Some(t) = stack.pop() {
        if !t.requires_grad() || !seen.insert(t.id()) {
            continue;
        }
        if let Some(expr) = t.expr() {
            for input in expr.inputs() {
                stack.push(input.clone());
            }
        }
        nodes.push(t);
    }
    nodes.sort_by_key(|t| t.id());
    nodes
}

impl<T: Element> Tensor<T> {
    /// The computation record that produced this tensor, in execution order.
    ///
    /// Useful for structural assertions (e.g. counting FFT applications).
    /// The record is reusable: it lives as long as the output tensor, and
    /// [`Tensor::backward`] may be called on the same record any number of
    /// times.
    pub fn record(&self) -> Record {
        let entries = collect_nodes(self)
            .into_iter()
            .filter_map(|t| {
                t.expr().map(|e| RecordEntry {
                    kind: e.kind(),
                    inputs: e.inputs().iter().map(|i| i.id()).collect(),
                    output: t.id(),
                })
            })
            .collect();
        Record { entries }
    }
}
