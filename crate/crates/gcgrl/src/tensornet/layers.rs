//! Layer assembly on top of the tape primitives.

use std::sync::Arc;

use super::ops::HeadReduce;
use super::tape::{NodeId, Tape};
use super::{AdjList, Scalar, SparseMatrix};
use crate::error::Error;
use crate::Result;

/// Activation applied after a layer's affine part.
#[derive(Copy, Clone, Debug)]
pub enum Activation {
    /// PReLU with a learnable scalar slope.
    Prelu(NodeId),
    Relu,
    None,
}

pub fn apply_activation<T: Scalar>(tape: &mut Tape<T>, x: NodeId, act: Activation) -> NodeId {
    match act {
        Activation::Prelu(alpha) => tape.prelu(x, alpha),
        Activation::Relu => tape.relu(x),
        Activation::None => x,
    }
}

/// GCN propagation: act(Â·(H·W) + bias).
pub fn gcn_layer<T: Scalar>(
    tape: &mut Tape<T>,
    norm_adj: &Arc<SparseMatrix<T>>,
    h: NodeId,
    w: NodeId,
    bias: NodeId,
    act: Activation,
) -> Result<NodeId> {
    let (hr, hc) = tape.value(h).shape();
    let (wr, wc) = tape.value(w).shape();
    if hc != wr {
        return Err(Error::InvalidArgument(format!(
            "gcn_layer: H is {hr}x{hc} but W is {wr}x{wc}"
        )));
    }
    if hr != norm_adj.n {
        return Err(Error::InvalidArgument(format!(
            "gcn_layer: H has {hr} rows but adjacency has {} nodes",
            norm_adj.n
        )));
    }
    if tape.value(bias).shape() != (1, wc) {
        return Err(Error::InvalidArgument("gcn_layer: bias width mismatch".into()));
    }
    let hw = tape.matmul(h, w);
    let agg = tape.spmm(norm_adj.clone(), hw);
    let b = tape.add_bias(agg, bias);
    Ok(apply_activation(tape, b, act))
}

/// The learnable pieces of one GAT layer.
#[derive(Copy, Clone, Debug)]
pub struct GatLayerParams {
    pub w: NodeId,
    pub a_src: NodeId,
    pub a_dst: NodeId,
    pub bias: NodeId,
}

/// GAT propagation: attention-weighted aggregation over neighbors including
/// a self-loop, multi-head concat (hidden) or mean (output), plus bias and
/// activation.
#[allow(clippy::too_many_arguments)]
pub fn gat_layer<T: Scalar>(
    tape: &mut Tape<T>,
    adj: &Arc<AdjList>,
    h: NodeId,
    p: &GatLayerParams,
    heads: usize,
    reduce: HeadReduce,
    act: Activation,
    attn_mask: Option<Arc<Vec<T>>>,
) -> Result<NodeId> {
    let (hr, hc) = tape.value(h).shape();
    let (wr, wc) = tape.value(p.w).shape();
    if hc != wr {
        return Err(Error::InvalidArgument(format!(
            "gat_layer: H is {hr}x{hc} but W is {wr}x{wc}"
        )));
    }
    if hr != adj.n {
        return Err(Error::InvalidArgument(format!(
            "gat_layer: H has {hr} rows but adjacency has {} nodes",
            adj.n
        )));
    }
    if heads == 0 || wc % heads != 0 {
        return Err(Error::InvalidArgument(format!(
            "gat_layer: {heads} heads must divide output width {wc}"
        )));
    }
    let out_cols = match reduce {
        HeadReduce::Concat => wc,
        HeadReduce::Mean => wc / heads,
    };
    if tape.value(p.bias).shape() != (1, out_cols) {
        return Err(Error::InvalidArgument("gat_layer: bias width mismatch".into()));
    }
    let hw = tape.matmul(h, p.w);
    let att = tape.gat_attend(adj.clone(), hw, p.a_src, p.a_dst, heads, reduce, attn_mask);
    let b = tape.add_bias(att, p.bias);
    Ok(apply_activation(tape, b, act))
}

/// Affine + activation stack.
pub fn mlp<T: Scalar>(
    tape: &mut Tape<T>,
    h: NodeId,
    layers: &[(NodeId, NodeId, Activation)],
) -> Result<NodeId> {
    let mut cur = h;
    for &(w, bias, act) in layers {
        let (_, hc) = tape.value(cur).shape();
        let (wr, wc) = tape.value(w).shape();
        if hc != wr {
            return Err(Error::InvalidArgument(format!(
                "mlp: input width {hc} does not match W ({wr}x{wc})"
            )));
        }
        if tape.value(bias).shape() != (1, wc) {
            return Err(Error::InvalidArgument("mlp: bias width mismatch".into()));
        }
        let a = tape.matmul(cur, w);
        let b = tape.add_bias(a, bias);
        cur = apply_activation(tape, b, act);
    }
    Ok(cur)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensornet::Tensor;

    fn single_node_adj() -> Arc<AdjList> {
        Arc::new(AdjList::from_sorted_neighbors(1, |_| &[][..]))
    }

    fn two_node_adj() -> Arc<AdjList> {
        static N0: [u32; 1] = [1];
        static N1: [u32; 1] = [0];
        Arc::new(AdjList::from_sorted_neighbors(2, |v| {
            if v == 0 {
                &N0[..]
            } else {
                &N1[..]
            }
        }))
    }

    #[test]
    fn gcn_identity_on_isolated_node() {
        // one node, no edges: normalized adjacency is [[1]]
        let adj = Arc::new(SparseMatrix {
            n: 1,
            row_ptr: vec![0, 1],
            col_idx: vec![0],
            values: vec![1.0f64],
        });
        let mut tape: Tape<f64> = Tape::new();
        let h = tape.leaf(Tensor::from_vec(1, 2, vec![0.3, -0.7]));
        let w = tape.leaf(Tensor::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]));
        let b = tape.leaf(Tensor::zeros(1, 2));
        let out = gcn_layer(&mut tape, &adj, h, w, b, Activation::None).unwrap();
        assert_eq!(tape.value(out).as_slice(), &[0.3, -0.7]);
    }

    #[test]
    fn gcn_two_nodes_one_edge_averages() {
        // normalized adjacency with self-loops: all entries 0.5
        let adj = Arc::new(SparseMatrix {
            n: 2,
            row_ptr: vec![0, 2, 4],
            col_idx: vec![0, 1, 0, 1],
            values: vec![0.5f64; 4],
        });
        let mut tape: Tape<f64> = Tape::new();
        let h = tape.leaf(Tensor::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]));
        let w = tape.leaf(Tensor::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]));
        let b = tape.leaf(Tensor::zeros(1, 2));
        let out = gcn_layer(&mut tape, &adj, h, w, b, Activation::None).unwrap();
        assert_eq!(tape.value(out).row(0), &[0.5, 0.5]);
        assert_eq!(tape.value(out).row(1), &[0.5, 0.5]);
    }

    #[test]
    fn gat_single_node_is_projection() {
        // softmax over the lone self-loop is 1, so out = x·W + bias
        let adj = single_node_adj();
        let mut tape: Tape<f64> = Tape::new();
        let h = tape.leaf(Tensor::from_vec(1, 3, vec![1.0, 2.0, -1.0]));
        let p = GatLayerParams {
            w: tape.leaf(Tensor::from_vec(3, 2, vec![1.0, 0.5, 0.0, -1.0, 2.0, 0.0])),
            a_src: tape.leaf(Tensor::from_vec(1, 2, vec![0.3, -0.2])),
            a_dst: tape.leaf(Tensor::from_vec(1, 2, vec![0.1, 0.4])),
            bias: tape.leaf(Tensor::zeros(1, 2)),
        };
        let out = gat_layer(
            &mut tape,
            &adj,
            h,
            &p,
            1,
            HeadReduce::Concat,
            Activation::None,
            None,
        )
        .unwrap();
        // x·W = [1*1+2*0-1*2, 1*0.5-2*1-1*0] = [-1, -1.5]
        let v = tape.value(out).as_slice();
        assert!((v[0] - (-1.0)).abs() < 1e-12);
        assert!((v[1] - (-1.5)).abs() < 1e-12);
    }

    #[test]
    fn gat_identical_features_give_uniform_attention() {
        let adj = two_node_adj();
        let mut tape: Tape<f64> = Tape::new();
        // both nodes share the same feature row => scores equal => uniform
        let h = tape.leaf(Tensor::from_vec(2, 2, vec![0.7, -0.2, 0.7, -0.2]));
        let p = GatLayerParams {
            w: tape.leaf(Tensor::from_vec(2, 2, vec![1.0, 2.0, -0.5, 0.3])),
            a_src: tape.leaf(Tensor::from_vec(1, 2, vec![0.9, -0.4])),
            a_dst: tape.leaf(Tensor::from_vec(1, 2, vec![0.2, 0.8])),
            bias: tape.leaf(Tensor::zeros(1, 2)),
        };
        let out = gat_layer(
            &mut tape,
            &adj,
            h,
            &p,
            1,
            HeadReduce::Concat,
            Activation::None,
            None,
        )
        .unwrap();
        // uniform attention over {self, neighbor} with identical u rows
        // means out = u exactly
        let u = [0.7 * 1.0 + -0.2 * -0.5, 0.7 * 2.0 + -0.2 * 0.3];
        let v = tape.value(out).as_slice();
        assert!((v[0] - u[0]).abs() < 1e-12 && (v[1] - u[1]).abs() < 1e-12);
    }

    #[test]
    fn mlp_identity_passthrough_and_zero_weights() {
        let mut tape: Tape<f64> = Tape::new();
        let h = tape.leaf(Tensor::from_vec(2, 2, vec![1.0, -2.0, 3.0, 4.0]));
        let eye = tape.leaf(Tensor::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]));
        let zero_b = tape.leaf(Tensor::zeros(1, 2));
        let out = mlp(&mut tape, h, &[(eye, zero_b, Activation::None)]).unwrap();
        assert_eq!(tape.value(out).as_slice(), tape.value(h).as_slice());

        let zeros_w = tape.leaf(Tensor::zeros(2, 2));
        let bias = tape.leaf(Tensor::from_vec(1, 2, vec![0.5, -1.5]));
        let out2 = mlp(&mut tape, h, &[(zeros_w, bias, Activation::None)]).unwrap();
        assert_eq!(tape.value(out2).row(0), &[0.5, -1.5]);
        assert_eq!(tape.value(out2).row(1), &[0.5, -1.5]);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let adj = single_node_adj();
        let mut tape: Tape<f64> = Tape::new();
        let h = tape.leaf(Tensor::from_vec(1, 3, vec![1.0, 2.0, -1.0]));
        let p = GatLayerParams {
            w: tape.leaf(Tensor::from_vec(2, 2, vec![1.0, 0.5, 0.0, -1.0])),
            a_src: tape.leaf(Tensor::from_vec(1, 2, vec![0.3, -0.2])),
            a_dst: tape.leaf(Tensor::from_vec(1, 2, vec![0.1, 0.4])),
            bias: tape.leaf(Tensor::zeros(1, 2)),
        };
        let err = gat_layer(
            &mut tape,
            &adj,
            h,
            &p,
            1,
            HeadReduce::Concat,
            Activation::None,
            None,
        );
        assert!(err.is_err());
    }
}
