//! Dense tensors with reverse-mode automatic differentiation.
//!
//! A [`Tensor`] is a cheap-to-clone handle onto an immutable graph node.
//! Every operation records its inputs and a backward closure; calling
//! [`Tensor::backward`] on a scalar loss walks the recorded nodes in
//! reverse creation order (a valid topological order by construction) and
//! accumulates gradients into every node that requires them.
//!
//! Graphs are thread-local by construction: nodes are reference-counted
//! and never shared across threads. Models keep parameters as plain
//! buffers ([`crate::model`]) and bind them into fresh graph leaves per
//! step, so model values themselves stay `Send`.

mod element;
pub mod ops;

pub use element::Element;

use std::cell::{Cell, RefCell};
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

static NEXT_ID: AtomicU64 = AtomicU64::new(0);

/// Per-parent gradient contributions returned by a backward closure.
type Contributions<T> = Vec<Option<Vec<T>>>;
type BackwardFn<T> = Box<dyn Fn(&Node<T>, &[T]) -> Contributions<T>>;

pub(crate) struct Node<T: Element> {
    id: u64,
    shape: Vec<usize>,
    data: Vec<T>,
    requires_grad: bool,
    grad: RefCell<Option<Vec<T>>>,
    parents: Vec<Tensor<T>>,
    backward_fn: Option<BackwardFn<T>>,
    backward_consumed: Cell<bool>,
}

/// Dense n-dimensional array, row-major, with an optional gradient buffer.
pub struct Tensor<T: Element> {
    pub(crate) node: Rc<Node<T>>,
}

impl<T: Element> Clone for Tensor<T> {
    fn clone(&self) -> Self {
        Tensor {
            node: Rc::clone(&self.node),
        }
    }
}

impl<T: Element> std::fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.node.shape)
            .field("requires_grad", &self.node.requires_grad)
            .finish()
    }
}

pub(crate) fn check_shape_data<T>(shape: &[usize], data: &[T]) -> Result<()> {
    let numel: usize = shape.iter().product();
    if shape.iter().any(|&d| d == 0) || numel != data.len() {
        return Err(Error::ShapeMismatch {
            op: "tensor construction",
            lhs: shape.to_vec(),
            rhs: vec![data.len()],
        });
    }
    Ok(())
}

impl<T: Element> Tensor<T> {
    fn make(
        shape: Vec<usize>,
        data: Vec<T>,
        requires_grad: bool,
        parents: Vec<Tensor<T>>,
        backward_fn: Option<BackwardFn<T>>,
    ) -> Tensor<T> {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor {
            node: Rc::new(Node {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                shape,
                data,
                requires_grad,
                grad: RefCell::new(None),
                parents,
                backward_fn,
                backward_consumed: Cell::new(false),
            }),
        }
    }

    /// A constant leaf; gradients never flow into it.
    pub fn constant(data: Vec<T>, shape: &[usize]) -> Result<Tensor<T>> {
        check_shape_data(shape, &data)?;
        Ok(Self::make(shape.to_vec(), data, false, Vec::new(), None))
    }

    /// A trainable leaf; `backward` populates its gradient.
    pub fn param(data: Vec<T>, shape: &[usize]) -> Result<Tensor<T>> {
        check_shape_data(shape, &data)?;
        Ok(Self::make(shape.to_vec(), data, true, Vec::new(), None))
    }

    pub fn zeros(shape: &[usize]) -> Tensor<T> {
        let numel = shape.iter().product();
        Self::make(shape.to_vec(), vec![T::zero(); numel], false, Vec::new(), None)
    }

    pub fn scalar(v: T) -> Tensor<T> {
        Self::make(vec![1], vec![v], false, Vec::new(), None)
    }

    /// Records a new graph node. If no parent requires gradients the node
    /// is a plain value: parents and the backward closure are dropped, so
    /// inference builds no graph.
    pub(crate) fn from_op(
        shape: Vec<usize>,
        data: Vec<T>,
        parents: Vec<Tensor<T>>,
        backward_fn: BackwardFn<T>,
    ) -> Tensor<T> {
        let requires_grad = parents.iter().any(|p| p.node.requires_grad);
        if requires_grad {
            Self::make(shape, data, true, parents, Some(backward_fn))
        } else {
            Self::make(shape, data, false, Vec::new(), None)
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.node.shape
    }

    pub fn numel(&self) -> usize {
        self.node.data.len()
    }

    pub fn data(&self) -> &[T] {
        &self.node.data
    }

    pub fn requires_grad(&self) -> bool {
        self.node.requires_grad
    }

    /// The accumulated gradient, if `backward` has flowed into this node.
    pub fn grad(&self) -> Option<Vec<T>> {
        self.node.grad.borrow().clone()
    }

    pub fn clear_grad(&self) {
        *self.node.grad.borrow_mut() = None;
    }

    pub fn item(&self) -> T {
        debug_assert_eq!(self.numel(), 1);
        self.node.data[0]
    }

    /// Reverse-mode sweep from a scalar loss.
    ///
    /// Visits the reachable graph in reverse creation order exactly once,
    /// accumulating gradients. Every reachable node that requires a
    /// gradient ends up with one (zero-filled if nothing flowed). Calling
    /// this twice on the same loss node is an error; rebuild the forward
    /// graph instead.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(Error::Contract {
                op: "backward",
                message: format!("loss must be scalar, got shape {:?}", self.shape()),
            });
        }
        if self.node.backward_consumed.replace(true) {
            return Err(Error::Contract {
                op: "backward",
                message: "backward already ran for this loss; run a fresh forward pass".into(),
            });
        }
        if !self.node.requires_grad {
            return Ok(());
        }

        // Collect the reachable subgraph. Creation ids are strictly
        // increasing within a thread, so descending id order is a valid
        // topological order.
        let mut stack = vec![self.clone()];
        let mut seen = std::collections::HashSet::new();
        let mut order: Vec<Tensor<T>> = Vec::new();
        while let Some(t) = stack.pop() {
            if !t.node.requires_grad || !seen.insert(t.node.id) {
                continue;
            }
            for p in &t.node.parents {
                stack.push(p.clone());
            }
            order.push(t);
        }
        order.sort_unstable_by(|a, b| b.node.id.cmp(&a.node.id));

        *self.node.grad.borrow_mut() = Some(vec![T::one()]);

        for t in &order {
            let grad = t.node.grad.borrow().clone();
            let Some(grad) = grad else { continue };
            let Some(bf) = &t.node.backward_fn else {
                continue;
            };
            let contribs = bf(&t.node, &grad);
            debug_assert_eq!(contribs.len(), t.node.parents.len());
            for (parent, contrib) in t.node.parents.iter().zip(contribs) {
                if let Some(c) = contrib {
                    parent.accumulate_grad(c);
                }
            }
        }

        // Materialize zero gradients so the "populated after backward"
        // contract holds even where nothing flowed.
        for t in &order {
            let mut g = t.node.grad.borrow_mut();
            if g.is_none() {
                *g = Some(vec![T::zero(); t.numel()]);
            }
        }
        Ok(())
    }

    fn accumulate_grad(&self, contrib: Vec<T>) {
        debug_assert_eq!(contrib.len(), self.numel());
        let mut slot = self.node.grad.borrow_mut();
        match slot.as_mut() {
            Some(existing) => {
                for (e, c) in existing.iter_mut().zip(contrib) {
                    *e = *e + c;
                }
            }
            None => *slot = Some(contrib),
        }
    }
}

/// Row-major strides for a shape.
pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}
