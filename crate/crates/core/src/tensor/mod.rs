//! Dense f32 tensors with reverse-mode automatic differentiation.
//!
//! Tensors are immutable row-major buffers. Differentiable operations record
//! how their output was produced; calling [`Tensor::backward`] on a scalar
//! replays those records in reverse execution order and accumulates gradients
//! into every tracked tensor (leaves marked `requires_grad` and the
//! intermediates between them and the loss). The record is rebuilt on every
//! forward pass, so the graph always mirrors the code that just ran.

use std::cell::{Cell, RefCell};
use std::collections::HashSet;
use std::fmt;
use std::rc::Rc;

use thiserror::Error;

mod kernels;
mod ops;

pub use ops::cross_entropy;

/// Errors raised by tensor construction and shape-sensitive operations.
#[derive(Debug, Error)]
pub enum TensorError {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("invalid shape {shape:?}: {reason}")]
    InvalidShape { shape: Vec<usize>, reason: String },
    #[error("data length {len} does not match shape {shape:?} ({expected} elements)")]
    DataLength {
        shape: Vec<usize>,
        len: usize,
        expected: usize,
    },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("index {index} out of range for table of {rows} rows")]
    IndexOutOfRange { index: usize, rows: usize },
    #[error("backward requires a scalar tensor, got shape {shape:?}")]
    NotScalar { shape: Vec<usize> },
    #[error("axis {axis} out of bounds for rank {rank}")]
    AxisOutOfBounds { axis: usize, rank: usize },
    #[error("slice [{start}, {start}+{len}) exceeds size {dim} on axis {axis}")]
    SliceOutOfRange {
        axis: usize,
        start: usize,
        len: usize,
        dim: usize,
    },
    #[error("dropout probability {p} outside [0, 1)")]
    InvalidDropout { p: f32 },
}

thread_local! {
    static NEXT_SEQ: Cell<u64> = const { Cell::new(0) };
}

fn next_seq() -> u64 {
    NEXT_SEQ.with(|c| {
        let v = c.get();
        c.set(v + 1);
        v
    })
}

/// Per-input gradients produced by one recorded operation. `None` marks an
/// input that does not need (or cannot receive) a gradient.
pub(crate) type InputGrads = Vec<Option<Vec<f32>>>;
pub(crate) type BackwardFn = Box<dyn Fn(&[f32]) -> InputGrads>;

pub(crate) struct GradFn {
    pub(crate) inputs: Vec<Tensor>,
    pub(crate) backward: BackwardFn,
}

struct Inner {
    shape: Vec<usize>,
    data: Rc<Vec<f32>>,
    requires_grad: bool,
    grad: RefCell<Option<Vec<f32>>>,
    gradfn: Option<GradFn>,
    /// Creation order within the thread; doubles as the position of the
    /// producing operation on the implicit tape.
    seq: u64,
}

/// Handle to an immutable n-dimensional f32 array, cheap to clone.
pub struct Tensor {
    inner: Rc<Inner>,
}

impl Clone for Tensor {
    fn clone(&self) -> Self {
        Tensor {
            inner: Rc::clone(&self.inner),
        }
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.inner.shape)
            .field("requires_grad", &self.inner.requires_grad)
            .field("tracked", &self.is_tracked())
            .finish()
    }
}

fn check_shape(shape: &[usize]) -> Result<usize, TensorError> {
    if shape.is_empty() {
        return Err(TensorError::InvalidShape {
            shape: shape.to_vec(),
            reason: "rank must be at least 1 (scalars use shape [1])".into(),
        });
    }
    let mut n = 1usize;
    for &d in shape {
        if d == 0 {
            return Err(TensorError::InvalidShape {
                shape: shape.to_vec(),
                reason: "dimensions must be positive".into(),
            });
        }
        n = n.checked_mul(d).ok_or_else(|| TensorError::InvalidShape {
            shape: shape.to_vec(),
            reason: "element count overflows".into(),
        })?;
    }
    Ok(n)
}

impl Tensor {
    fn from_parts(shape: Vec<usize>, data: Rc<Vec<f32>>, requires_grad: bool, gradfn: Option<GradFn>) -> Tensor {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor {
            inner: Rc::new(Inner {
                shape,
                data,
                requires_grad,
                grad: RefCell::new(None),
                gradfn,
                seq: next_seq(),
            }),
        }
    }

    /// Untracked leaf tensor from raw row-major data.
    pub fn from_vec(shape: &[usize], data: Vec<f32>) -> Result<Tensor, TensorError> {
        let n = check_shape(shape)?;
        if data.len() != n {
            return Err(TensorError::DataLength {
                shape: shape.to_vec(),
                len: data.len(),
                expected: n,
            });
        }
        Ok(Tensor::from_parts(shape.to_vec(), Rc::new(data), false, None))
    }

    /// Trainable leaf: gradients accumulate here during backward passes.
    pub fn param(shape: &[usize], data: Vec<f32>) -> Result<Tensor, TensorError> {
        let t = Tensor::from_vec(shape, data)?;
        Ok(Tensor::from_parts(
            t.inner.shape.clone(),
            Rc::clone(&t.inner.data),
            true,
            None,
        ))
    }

    pub fn zeros(shape: &[usize]) -> Tensor {
        let n = check_shape(shape).expect("valid shape");
        Tensor::from_parts(shape.to_vec(), Rc::new(vec![0.0; n]), false, None)
    }

    pub fn full(shape: &[usize], value: f32) -> Tensor {
        let n = check_shape(shape).expect("valid shape");
        Tensor::from_parts(shape.to_vec(), Rc::new(vec![value; n]), false, None)
    }

    pub fn scalar(value: f32) -> Tensor {
        Tensor::from_parts(vec![1], Rc::new(vec![value]), false, None)
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

    pub fn data(&self) -> &[f32] {
        &self.inner.data
    }

    pub(crate) fn data_rc(&self) -> Rc<Vec<f32>> {
        Rc::clone(&self.inner.data)
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.requires_grad
    }

    /// Tracked tensors participate in backward passes: trainable leaves and
    /// every intermediate computed from one.
    pub fn is_tracked(&self) -> bool {
        self.inner.requires_grad || self.inner.gradfn.is_some()
    }

    /// Value of a scalar tensor.
    pub fn item(&self) -> f32 {
        assert_eq!(self.numel(), 1, "item() on non-scalar tensor");
        self.inner.data[0]
    }

    /// Copy of the accumulated gradient, if any backward pass deposited one.
    pub fn grad(&self) -> Option<Vec<f32>> {
        self.inner.grad.borrow().clone()
    }

    pub fn zero_grad(&self) {
        *self.inner.grad.borrow_mut() = None;
    }

    /// New leaf sharing this tensor's buffer, cut loose from any graph.
    pub fn detach(&self, requires_grad: bool) -> Tensor {
        Tensor::from_parts(
            self.inner.shape.clone(),
            Rc::clone(&self.inner.data),
            requires_grad,
            None,
        )
    }

    pub(crate) fn accumulate_grad(&self, g: &[f32]) {
        debug_assert_eq!(g.len(), self.numel());
        let mut slot = self.inner.grad.borrow_mut();
        match slot.as_mut() {
            Some(buf) => {
                for (b, x) in buf.iter_mut().zip(g) {
                    *b += *x;
                }
            }
            None => *slot = Some(g.to_vec()),
        }
    }

    /// Reverse-mode pass from a scalar. Seeds d(loss)/d(loss) = 1, then walks
    /// the recorded operations once each in reverse execution order, summing
    /// gradient contributions wherever a tensor was consumed more than once.
    pub fn backward(&self) -> Result<(), TensorError> {
        if self.numel() != 1 {
            return Err(TensorError::NotScalar {
                shape: self.inner.shape.clone(),
            });
        }
        self.accumulate_grad(&[1.0]);
        for node in tape_of(self) {
            let gf = node.inner.gradfn.as_ref().expect("tape holds op outputs");
            let upstream = match node.inner.grad.borrow().as_ref() {
                Some(g) => g.clone(),
                // No gradient reached this value through any path to the loss.
                None => continue,
            };
            let grads = (gf.backward)(&upstream);
            debug_assert_eq!(grads.len(), gf.inputs.len());
            for (input, grad) in gf.inputs.iter().zip(grads) {
                if let Some(g) = grad {
                    if input.is_tracked() {
                        input.accumulate_grad(&g);
                    }
                }
            }
        }
        Ok(())
    }

    /// Row-wise argmax over the last axis, first index winning ties.
    pub fn argmax_rows(&self) -> Vec<usize> {
        let cols = *self.shape().last().expect("rank >= 1");
        self.data()
            .chunks(cols)
            .map(|row| {
                let mut best = 0usize;
                for (j, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect()
    }
}

/// The tape for one backward pass: every operation output that can influence
/// `root`, ordered so an operation appears before everything it consumed
/// (reverse execution order). Visiting front to back therefore processes each
/// recorded operation exactly once, after all of its consumers.
fn tape_of(root: &Tensor) -> Vec<Tensor> {
    let mut seen: HashSet<usize> = HashSet::new();
    let mut nodes: Vec<Tensor> = Vec::new();
    let mut stack: Vec<Tensor> = vec![root.clone()];
    while let Some(t) = stack.pop() {
        if !seen.insert(Rc::as_ptr(&t.inner) as usize) {
            continue;
        }
        if let Some(gf) = &t.inner.gradfn {
            for input in &gf.inputs {
                if input.inner.gradfn.is_some() {
                    stack.push(input.clone());
                }
            }
            nodes.push(t);
        }
    }
    nodes.sort_unstable_by_key(|t| std::cmp::Reverse(t.inner.seq));
    nodes
}

/// Build an op output: tracked (with the given backward record) iff any input
/// is tracked, otherwise a plain untracked value.
pub(crate) fn op_output(
    shape: Vec<usize>,
    data: Rc<Vec<f32>>,
    inputs: Vec<Tensor>,
    backward: BackwardFn,
) -> Tensor {
    let tracked = inputs.iter().any(Tensor::is_tracked);
    let gradfn = if tracked {
        Some(GradFn { inputs, backward })
    } else {
        None
    };
    Tensor::from_parts(shape, data, false, gradfn)
}

#[cfg(test)]
mod tests;
