//! Reverse-mode autodiff over whole tensors.
//!
//! The tape records one entry per operation in execution order. Node ids are
//! strictly increasing and every op's output id is larger than all of its
//! input ids, so a single reverse sweep sees each output gradient fully
//! accumulated before the producing op consumes it.

use super::{Scalar, Tensor};

/// Handle to a value on the tape.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct NodeId(pub(crate) usize);

/// Gradient accumulator handed to ops during the reverse sweep. Only nodes
/// created before the op's output are reachable.
pub struct GradSink<'a, T> {
    grads: &'a mut [Option<Tensor<T>>],
}

impl<'a, T: Scalar> GradSink<'a, T> {
    /// Returns the (zero-initialized on first touch) gradient buffer of `node`.
    pub fn accum(&mut self, node: NodeId, rows: usize, cols: usize) -> &mut Tensor<T> {
        let slot = &mut self.grads[node.0];
        if slot.is_none() {
            *slot = Some(Tensor::zeros(rows, cols));
        }
        let t = slot.as_mut().unwrap();
        debug_assert_eq!(t.shape(), (rows, cols), "gradient shape mismatch");
        t
    }

    /// Adds a ready-made contribution.
    pub fn add(&mut self, node: NodeId, contribution: Tensor<T>) {
        match &mut self.grads[node.0] {
            slot @ None => *slot = Some(contribution),
            Some(t) => t.add_assign(&contribution),
        }
    }

    /// Adds `v` to a scalar node's gradient.
    pub fn add_scalar(&mut self, node: NodeId, v: T) {
        let g = self.accum(node, 1, 1);
        let s = g.as_mut_slice();
        s[0] += v;
    }
}

/// One differentiable operation. Forward results live in `Tape::vals`;
/// anything else needed by the reverse pass is stored on the op itself.
pub trait TapeOp<T: Scalar> {
    /// Propagates `out_grad` (gradient of this op's output) into the
    /// gradients of its input nodes. `vals` gives read access to all
    /// forward values.
    fn backward(&self, out_grad: &Tensor<T>, vals: &[Tensor<T>], sink: &mut GradSink<'_, T>);
}

struct OpRecord<T> {
    out: usize,
    op: Box<dyn TapeOp<T>>,
}

/// Records forward values and operations; `backward` runs the reverse sweep.
pub struct Tape<T: Scalar> {
    vals: Vec<Tensor<T>>,
    ops: Vec<OpRecord<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape {
            vals: Vec::new(),
            ops: Vec::new(),
        }
    }

    /// Creates a leaf (typically a parameter). Its gradient survives
    /// `backward` and can be read with [`Gradients::get`].
    pub fn leaf(&mut self, t: Tensor<T>) -> NodeId {
        let id = self.vals.len();
        self.vals.push(t);
        NodeId(id)
    }

    pub fn value(&self, n: NodeId) -> &Tensor<T> {
        &self.vals[n.0]
    }

    pub fn num_nodes(&self) -> usize {
        self.vals.len()
    }

    /// Pushes an op together with its already-computed output value.
    pub fn push(&mut self, out_val: Tensor<T>, op: Box<dyn TapeOp<T>>) -> NodeId {
        let id = self.vals.len();
        self.vals.push(out_val);
        self.ops.push(OpRecord { out: id, op });
        NodeId(id)
    }

    /// Reverse sweep from `loss` (must be 1×1). Gradients of intermediate
    /// nodes are dropped as soon as their producer has consumed them; leaf
    /// gradients are kept.
    pub fn backward(&self, loss: NodeId) -> Gradients<T> {
        assert_eq!(
            self.vals[loss.0].shape(),
            (1, 1),
            "backward requires a scalar loss"
        );
        let mut grads: Vec<Option<Tensor<T>>> = Vec::with_capacity(self.vals.len());
        grads.resize_with(self.vals.len(), || None);
        grads[loss.0] = Some(Tensor::scalar(T::one()));

        for rec in self.ops.iter().rev() {
            // Take (and free) the output gradient; all consumers of this
            // node appear later on the tape and have already run.
            let Some(gout) = grads[rec.out].take() else {
                continue;
            };
            let (before, _) = grads.split_at_mut(rec.out);
            let mut sink = GradSink { grads: before };
            rec.op.backward(&gout, &self.vals, &mut sink);
        }
        Gradients { grads }
    }
}

/// Result of a reverse sweep; holds gradients of leaves (and of any node
/// no op consumed).
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient of `node`, if any path connected it to the loss.
    pub fn get(&self, node: NodeId) -> Option<&Tensor<T>> {
        self.grads.get(node.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, node: NodeId) -> Option<Tensor<T>> {
        self.grads.get_mut(node.0).and_then(|g| g.take())
    }
}
