//! Reverse-mode automatic differentiation over dense f64 tensors.
//!
//! Forward ops build an operation graph (the tape); [`Tensor::backward`]
//! topologically orders the recorded ops and replays their backward rules
//! exactly once each, accumulating gradients additively into leaf tensors.
//! Tensors are immutable after creation except for the gradient slot.

mod ops;

pub mod gradcheck;

pub use gradcheck::{grad_check, GradCheckReport};

use std::cell::{Cell, RefCell};
use std::collections::HashSet;
use std::fmt;
use std::rc::Rc;

/// Train/eval switch for stochastic ops (dropout).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, thiserror::Error)]
pub enum TensorError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("invalid parameter for {op}: {msg}")]
    InvalidParameter { op: &'static str, msg: String },
    #[error("target index {index} out of range for {n_classes} classes at batch row {row}")]
    TargetOutOfRange {
        row: usize,
        index: usize,
        n_classes: usize,
    },
    #[error("{op} requires a scalar output, got shape {shape:?}")]
    NonScalarOutput { op: &'static str, shape: Vec<usize> },
}

/// Backward rule: given the output gradient, accumulate into the parents.
pub(crate) type BackwardFn = Box<dyn Fn(&[f64], &[Tensor])>;

struct Inner {
    id: u64,
    shape: Vec<usize>,
    data: Vec<f64>,
    requires_grad: bool,
    grad: RefCell<Option<Vec<f64>>>,
    parents: Vec<Tensor>,
    backward: Option<BackwardFn>,
}

thread_local! {
    static NEXT_ID: Cell<u64> = const { Cell::new(0) };
}

fn fresh_id() -> u64 {
    NEXT_ID.with(|c| {
        let id = c.get();
        c.set(id + 1);
        id
    })
}

/// Dense n-dimensional array with an optional gradient slot.
///
/// Cloning is cheap (reference-counted); the underlying buffer is shared.
#[derive(Clone)]
pub struct Tensor {
    inner: Rc<Inner>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.inner.shape)
            .field("requires_grad", &self.inner.requires_grad)
            .field("data", &self.inner.data)
            .finish()
    }
}

impl Tensor {
    /// Constant (non-differentiable) tensor.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Tensor {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "shape {:?} does not match data length {}",
            shape,
            data.len()
        );
        Tensor {
            inner: Rc::new(Inner {
                id: fresh_id(),
                shape,
                data,
                requires_grad: false,
                grad: RefCell::new(None),
                parents: Vec::new(),
                backward: None,
            }),
        }
    }

    /// Leaf tensor that accumulates gradients (a trainable parameter or a
    /// grad-check input).
    pub fn param(shape: Vec<usize>, data: Vec<f64>) -> Tensor {
        assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor {
            inner: Rc::new(Inner {
                id: fresh_id(),
                shape,
                data,
                requires_grad: true,
                grad: RefCell::new(None),
                parents: Vec::new(),
                backward: None,
            }),
        }
    }

    pub fn scalar(v: f64) -> Tensor {
        Tensor::new(vec![1], vec![v])
    }

    pub fn zeros(shape: Vec<usize>) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape, vec![0.0; n])
    }

    pub fn full(shape: Vec<usize>, v: f64) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape, vec![v; n])
    }

    /// Result of a recorded op. Parents and the backward rule are dropped if
    /// no parent is differentiable, truncating the graph.
    pub(crate) fn from_op(
        shape: Vec<usize>,
        data: Vec<f64>,
        parents: Vec<Tensor>,
        backward: BackwardFn,
    ) -> Tensor {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        let requires_grad = parents.iter().any(|p| p.requires_grad());
        Tensor {
            inner: Rc::new(Inner {
                id: fresh_id(),
                shape,
                data,
                requires_grad,
                grad: RefCell::new(None),
                parents: if requires_grad { parents } else { Vec::new() },
                backward: if requires_grad { Some(backward) } else { None },
            }),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.inner.data
    }

    pub fn len(&self) -> usize {
        self.inner.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inner.data.is_empty()
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.requires_grad
    }

    /// Scalar value; panics if the tensor is not a single element.
    pub fn item(&self) -> f64 {
        assert_eq!(self.len(), 1, "item() on tensor of shape {:?}", self.shape());
        self.inner.data[0]
    }

    /// Current accumulated gradient, if any.
    pub fn grad(&self) -> Option<Vec<f64>> {
        self.inner.grad.borrow().clone()
    }

    pub fn zero_grad(&self) {
        *self.inner.grad.borrow_mut() = None;
    }

    /// Detached copy: same data, no history, no gradient.
    pub fn detach(&self) -> Tensor {
        Tensor::new(self.inner.shape.clone(), self.inner.data.clone())
    }

    /// Add `g` into this tensor's gradient slot (no-op for constants).
    pub fn accum_grad(&self, g: &[f64]) {
        if !self.inner.requires_grad {
            return;
        }
        assert_eq!(g.len(), self.len(), "gradient length mismatch");
        let mut slot = self.inner.grad.borrow_mut();
        match slot.as_mut() {
            Some(acc) => {
                for (a, gi) in acc.iter_mut().zip(g) {
                    *a += gi;
                }
            }
            None => *slot = Some(g.to_vec()),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.inner.data.iter().all(|v| v.is_finite())
    }

    /// Reverse pass from a scalar output. Seeds the output gradient with 1
    /// and visits every recorded op exactly once in reverse topological
    /// order, accumulating into every reachable differentiable tensor.
    pub fn backward(&self) {
        assert_eq!(
            self.len(),
            1,
            "backward() requires a scalar output, got shape {:?}",
            self.shape()
        );
        if !self.inner.requires_grad {
            return;
        }
        let order = self.topo_order();
        self.accum_grad(&[1.0]);
        for node in order.iter().rev() {
            if let Some(bw) = &node.inner.backward {
                let g = node
                    .inner
                    .grad
                    .borrow()
                    .clone()
                    .unwrap_or_else(|| vec![0.0; node.len()]);
                bw(&g, &node.inner.parents);
            }
        }
    }

    /// Topological order of the reachable graph (parents before children).
    fn topo_order(&self) -> Vec<Tensor> {
        let mut order = Vec::new();
        let mut visited: HashSet<u64> = HashSet::new();
        // Iterative post-order DFS; lyrics-length graphs overflow the stack
        // with naive recursion.
        let mut stack: Vec<(Tensor, usize)> = vec![(self.clone(), 0)];
        visited.insert(self.inner.id);
        while let Some((node, child_idx)) = stack.pop() {
            if child_idx < node.inner.parents.len() {
                let parent = node.inner.parents[child_idx].clone();
                stack.push((node, child_idx + 1));
                if parent.requires_grad() && visited.insert(parent.inner.id) {
                    stack.push((parent, 0));
                }
            } else {
                order.push(node);
            }
        }
        order
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_graph_is_truncated() {
        let a = Tensor::new(vec![2], vec![1.0, 2.0]);
        let b = Tensor::new(vec![2], vec![3.0, 4.0]);
        let c = a.add(&b).unwrap();
        assert!(!c.requires_grad());
        assert!(c.inner.parents.is_empty());
    }

    #[test]
    fn grad_accumulation_is_additive() {
        let x = Tensor::param(vec![2], vec![1.0, 2.0]);
        x.accum_grad(&[1.0, 1.0]);
        x.accum_grad(&[0.5, -1.0]);
        assert_eq!(x.grad().unwrap(), vec![1.5, 0.0]);
        x.zero_grad();
        assert!(x.grad().is_none());
    }

    #[test]
    fn diamond_graph_backward_visits_each_op_once() {
        // y = (x + x) summed; dy/dx = [2, 2]
        let x = Tensor::param(vec![2], vec![1.0, 2.0]);
        let y = x.add(&x).unwrap().sum();
        y.backward();
        assert_eq!(x.grad().unwrap(), vec![2.0, 2.0]);
    }

    #[test]
    fn repeated_backward_accumulates() {
        let x = Tensor::param(vec![2], vec![1.0, 2.0]);
        let y = x.sum();
        y.backward();
        let z = x.sum();
        z.backward();
        assert_eq!(x.grad().unwrap(), vec![2.0, 2.0]);
    }
}
