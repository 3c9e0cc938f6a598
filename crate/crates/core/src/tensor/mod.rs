//! Dense float64 tensors with reverse-mode automatic differentiation.
//!
//! A [`Tensor`] is an immutable, reference-counted buffer. Operations on
//! tensors that require gradients record a provenance node holding the
//! parents and a backward closure; [`Tensor::backward`] walks those nodes in
//! reverse topological order and accumulates gradients into the leaves.
//!
//! Only scalar-vs-tensor and equal-shape operands are supported by the
//! binary ops; there is no general broadcasting.

mod gradcheck;
mod graph;
mod ops;

use std::cell::{Ref, RefCell};
use std::fmt;
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

pub use gradcheck::{grad_check, grad_check_at, GradCheck};
pub use graph::Graph;

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

/// Per-parent gradient contributions; `None` for parents that do not need one.
pub(crate) type ParentGrads = Vec<Option<Vec<f64>>>;

/// Everything a backward closure can see when it runs.
pub(crate) struct BackwardCtx<'a> {
    pub grad: &'a [f64],
    pub output: &'a [f64],
    pub parents: &'a [Tensor],
}

pub(crate) type BackwardFn = Box<dyn Fn(&BackwardCtx<'_>) -> ParentGrads>;

pub(crate) struct Node {
    pub(crate) op: &'static str,
    pub(crate) parents: Vec<Tensor>,
    /// Taken (set to `None`) by the backward pass that consumes the node.
    pub(crate) backward: RefCell<Option<BackwardFn>>,
}

struct Inner {
    id: u64,
    shape: Vec<usize>,
    data: Vec<f64>,
    requires_grad: bool,
    grad: RefCell<Option<Vec<f64>>>,
    node: Option<Node>,
}

/// Dense N-dimensional float array. Image data uses N×C×H×W order.
#[derive(Clone)]
pub struct Tensor(Rc<Inner>);

pub(crate) fn numel_of(shape: &[usize]) -> usize {
    shape.iter().product()
}

fn check_shape(shape: &[usize]) -> Result<()> {
    if shape.contains(&0) {
        return Err(Error::InvalidShape(shape.to_vec()));
    }
    Ok(())
}

impl Tensor {
    fn from_parts(
        shape: Vec<usize>,
        data: Vec<f64>,
        requires_grad: bool,
        node: Option<Node>,
    ) -> Self {
        debug_assert_eq!(numel_of(&shape), data.len());
        Tensor(Rc::new(Inner {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            shape,
            data,
            requires_grad,
            grad: RefCell::new(None),
            node,
        }))
    }

    /// Leaf tensor from a shape and a row-major buffer.
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        check_shape(shape)?;
        if numel_of(shape) != data.len() {
            return Err(Error::DataLength {
                shape: shape.to_vec(),
                len: data.len(),
            });
        }
        Ok(Self::from_parts(shape.to_vec(), data, false, None))
    }

    /// Rank-0 tensor holding `value`.
    pub fn scalar(value: f64) -> Self {
        Self::from_parts(Vec::new(), vec![value], false, None)
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::full(shape, 0.0)
    }

    pub fn ones(shape: &[usize]) -> Result<Self> {
        Self::full(shape, 1.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Result<Self> {
        check_shape(shape)?;
        Ok(Self::from_parts(
            shape.to_vec(),
            vec![value; numel_of(shape)],
            false,
            None,
        ))
    }

    /// Gaussian samples with the given standard deviation, deterministic per seed.
    pub fn randn(shape: &[usize], seed: u64, stddev: f64) -> Result<Self> {
        check_shape(shape)?;
        Ok(Self::from_parts(
            shape.to_vec(),
            gaussian_buffer(numel_of(shape), seed, stddev)?,
            false,
            None,
        ))
    }

    /// Returns a leaf sharing this tensor's values that participates in
    /// gradient computation.
    pub fn requires_grad(&self) -> Tensor {
        Self::from_parts(self.0.shape.clone(), self.0.data.clone(), true, None)
    }

    /// Returns a leaf with the same values and no provenance.
    pub fn detach(&self) -> Tensor {
        Self::from_parts(self.0.shape.clone(), self.0.data.clone(), false, None)
    }

    /// Records the result of an operation. A provenance node is only kept when
    /// at least one parent takes part in gradient computation.
    pub(crate) fn from_op(
        op: &'static str,
        shape: Vec<usize>,
        data: Vec<f64>,
        parents: Vec<Tensor>,
        backward: BackwardFn,
    ) -> Tensor {
        let requires_grad = parents.iter().any(Tensor::is_tracked);
        let node = requires_grad.then(|| Node {
            op,
            parents,
            backward: RefCell::new(Some(backward)),
        });
        Self::from_parts(shape, data, requires_grad, node)
    }

    pub fn id(&self) -> u64 {
        self.0.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.0.shape
    }

    pub fn rank(&self) -> usize {
        self.0.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.0.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.0.data
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.data.clone()
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> Result<f64> {
        if self.numel() != 1 {
            return Err(Error::InvalidArgument(format!(
                "item() on tensor of shape {:?}",
                self.shape()
            )));
        }
        Ok(self.0.data[0])
    }

    /// True if gradients flow through this tensor.
    pub fn is_tracked(&self) -> bool {
        self.0.requires_grad
    }

    /// True if the tensor has no provenance record.
    pub fn is_leaf(&self) -> bool {
        self.0.node.is_none()
    }

    pub fn op_name(&self) -> Option<&'static str> {
        self.0.node.as_ref().map(|n| n.op)
    }

    pub(crate) fn node(&self) -> Option<&Node> {
        self.0.node.as_ref()
    }

    pub(crate) fn parents(&self) -> &[Tensor] {
        self.0.node.as_ref().map_or(&[], |n| n.parents.as_slice())
    }

    pub fn grad(&self) -> Option<Vec<f64>> {
        self.0.grad.borrow().clone()
    }

    pub fn grad_ref(&self) -> Ref<'_, Option<Vec<f64>>> {
        self.0.grad.borrow()
    }

    pub fn zero_grad(&self) {
        *self.0.grad.borrow_mut() = None;
    }

    pub(crate) fn accumulate_grad(&self, g: &[f64]) {
        let mut slot = self.0.grad.borrow_mut();
        match slot.as_mut() {
            Some(acc) => acc.iter_mut().zip(g).for_each(|(a, b)| *a += b),
            None => *slot = Some(g.to_vec()),
        }
    }

    pub fn same_shape(&self, other: &Tensor) -> bool {
        self.shape() == other.shape()
    }
}

pub(crate) fn gaussian_buffer(len: usize, seed: u64, stddev: f64) -> Result<Vec<f64>> {
    let normal = Normal::new(0.0, stddev)
        .map_err(|e| Error::InvalidArgument(format!("stddev {stddev}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..len).map(|_| normal.sample(&mut rng)).collect())
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = f.debug_struct("Tensor");
        s.field("shape", &self.shape());
        if self.numel() <= 16 {
            s.field("data", &self.data());
        }
        s.field("requires_grad", &self.is_tracked())
            .field("op", &self.op_name())
            .finish()
    }
}
