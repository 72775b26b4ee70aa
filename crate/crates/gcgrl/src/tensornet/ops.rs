//! Differentiable tensor operations.
//!
//! Each op computes its forward value eagerly and stores whatever the
//! reverse pass needs (saved activations, sparse payloads) on the op struct.
//! Non-differentiable inputs (adjacency, edge lists, masks) are shared via
//! `Arc` rather than occupying tape nodes.

use std::sync::Arc;

use rayon::prelude::*;

use super::tape::{GradSink, NodeId, Tape, TapeOp};
use super::{gemm, gemm_acc, AdjList, Scalar, SparseFeatures, SparseMatrix, Tensor, Trans};

/// LeakyReLU slope used inside attention scoring.
pub const ATTN_LEAKY_SLOPE: f64 = 0.2;

/// Probabilities are clamped into `[PROB_EPS, 1-PROB_EPS]` before logs.
pub const PROB_EPS: f64 = 1e-7;

/// Norm floor for cosine similarities.
pub const NORM_EPS: f64 = 1e-8;

/// Multi-head combination of a GAT layer.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum HeadReduce {
    Concat,
    Mean,
}

/// Maps view rows onto original feature rows and flags masked rows.
#[derive(Clone, Debug)]
pub struct RowSelect {
    pub node_map: Vec<u32>,
    pub masked: Vec<bool>,
}

impl RowSelect {
    pub fn new(node_map: Vec<u32>, masked: Vec<bool>) -> Self {
        assert_eq!(node_map.len(), masked.len());
        RowSelect { node_map, masked }
    }

    /// Identity selection with nothing masked.
    pub fn identity(n: usize) -> Self {
        RowSelect {
            node_map: (0..n as u32).collect(),
            masked: vec![false; n],
        }
    }

    pub fn len(&self) -> usize {
        self.node_map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_map.is_empty()
    }
}

// ---------------------------------------------------------------------------
// matmul
// ---------------------------------------------------------------------------

struct MatMulOp {
    a: NodeId,
    b: NodeId,
}

impl<T: Scalar> TapeOp<T> for MatMulOp {
    fn backward(&self, g: &Tensor<T>, vals: &[Tensor<T>], sink: &mut GradSink<'_, T>) {
        let a = &vals[self.a.0];
        let b = &vals[self.b.0];
        {
            let da = sink.accum(self.a, a.rows(), a.cols());
            gemm_acc(da, g, Trans::No, b, Trans::Yes);
        }
        {
            let db = sink.accum(self.b, b.rows(), b.cols());
            gemm_acc(db, a, Trans::Yes, g, Trans::No);
        }
    }
}

// ---------------------------------------------------------------------------
// first-layer feature product with mask-token substitution
// ---------------------------------------------------------------------------

struct FeatureMatmulOp<T> {
    feats: Arc<SparseFeatures<T>>,
    sel: Arc<RowSelect>,
    /// inverse of `sel.node_map`: original row -> view row (u32::MAX absent)
    inv_map: Vec<u32>,
    token: NodeId,
    w: NodeId,
}

impl<T: Scalar> TapeOp<T> for FeatureMatmulOp<T> {
    fn backward(&self, g: &Tensor<T>, vals: &[Tensor<T>], sink: &mut GradSink<'_, T>) {
        let w = &vals[self.w.0];
        let d_in = w.rows();
        let d_out = w.cols();

        // Sum of output gradients over masked rows: shared by dW and dtoken.
        let mut gsum = vec![T::zero(); d_out];
        for (i, &m) in self.sel.masked.iter().enumerate() {
            if m {
                for (s, &gv) in gsum.iter_mut().zip(g.row(i)) {
                    *s += gv;
                }
            }
        }

        let token = vals[self.token.0].as_slice().to_vec();
        {
            let dw = sink.accum(self.w, d_in, d_out);
            let feats = &self.feats;
            let inv_map = &self.inv_map;
            let masked = &self.sel.masked;
            let gsum_ref = &gsum;
            dw.as_mut_slice()
                .par_chunks_mut(d_out)
                .enumerate()
                .for_each(|(j, dw_row)| {
                    // unmasked view rows whose original feature j is nonzero
                    for p in feats.col_ptr[j]..feats.col_ptr[j + 1] {
                        let orig = feats.col_row[p] as usize;
                        let vi = inv_map[orig];
                        if vi == u32::MAX || masked[vi as usize] {
                            continue;
                        }
                        let x = feats.col_val[p];
                        for (d, &gv) in dw_row.iter_mut().zip(g.row(vi as usize)) {
                            *d += x * gv;
                        }
                    }
                    // masked rows contribute token_j * gsum
                    let tj = token[j];
                    if tj != T::zero() {
                        for (d, &s) in dw_row.iter_mut().zip(gsum_ref) {
                            *d += tj * s;
                        }
                    }
                });
        }
        {
            let dt = sink.accum(self.token, 1, d_in);
            let dts = dt.as_mut_slice();
            for (j, slot) in dts.iter_mut().enumerate() {
                let wr = w.row(j);
                let mut acc = T::zero();
                for (a, b) in wr.iter().zip(&gsum) {
                    acc += *a * *b;
                }
                *slot += acc;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// sparse adjacency product
// ---------------------------------------------------------------------------

struct SpmmOp<T> {
    adj: Arc<SparseMatrix<T>>,
    h: NodeId,
}

impl<T: Scalar> TapeOp<T> for SpmmOp<T> {
    fn backward(&self, g: &Tensor<T>, _vals: &[Tensor<T>], sink: &mut GradSink<'_, T>) {
        // adjacency is symmetric, so dH = Aᵀ·G = A·G
        sink.add(self.h, self.adj.matmul(g));
    }
}

// ---------------------------------------------------------------------------
// bias / activations / dropout
// ---------------------------------------------------------------------------

struct AddBiasOp {
    h: NodeId,
    bias: NodeId,
}

impl<T: Scalar> TapeOp<T> for AddBiasOp {
    fn backward(&self, g: &Tensor<T>, _vals: &[Tensor<T>], sink: &mut GradSink<'_, T>) {
        let cols = g.cols();
        {
            let db = sink.accum(self.bias, 1, cols);
            let dbs = db.as_mut_slice();
            for i in 0..g.rows() {
                for (d, &gv) in dbs.iter_mut().zip(g.row(i)) {
                    *d += gv;
                }
            }
        }
        sink.add(self.h, g.clone());
    }
}

struct PreluOp {
    x: NodeId,
    alpha: NodeId,
}

impl<T: Scalar> TapeOp<T> for PreluOp {
    fn backward(&self, g: &Tensor<T>, vals: &[Tensor<T>], sink: &mut GradSink<'_, T>) {
        let x = &vals[self.x.0];
        let a = vals[self.alpha.0].item();
        let mut dalpha = T::zero();
        {
            let dx = sink.accum(self.x, x.rows(), x.cols());
            for ((d, &xv), &gv) in dx.as_mut_slice().iter_mut().zip(x.iter()).zip(g.iter()) {
                if xv > T::zero() {
                    *d += gv;
                } else {
                    *d += gv * a;
                    dalpha += gv * xv;
                }
            }
        }
        sink.add_scalar(self.alpha, dalpha);
    }
}

struct ReluOp {
    x: NodeId,
}

impl<T: Scalar> TapeOp<T> for ReluOp {
    fn backward(&self, g: &Tensor<T>, vals: &[Tensor<T>], sink: &mut GradSink<'_, T>) {
        let x = &vals[self.x.0];
        let dx = sink.accum(self.x, x.rows(), x.cols());
        for ((d, &xv), &gv) in dx.as_mut_slice().iter_mut().zip(x.iter()).zip(g.iter()) {
            if xv > T::zero() {
                *d += gv;
            }
        }
    }
}

struct DropoutOp<T> {
    x: NodeId,
    mask: Arc<Vec<T>>,
}

impl<T: Scalar> TapeOp<T> for DropoutOp<T> {
    fn backward(&self, g: &Tensor<T>, vals: &[Tensor<T>], sink: &mut GradSink<'_, T>) {
        let x = &vals[self.x.0];
        let dx = sink.accum(self.x, x.rows(), x.cols());
        for ((d, &m), &gv) in dx.as_mut_slice().iter_mut().zip(self.mask.iter()).zip(g.iter()) {
            *d += gv * m;
        }
    }
}

// ---------------------------------------------------------------------------
// GAT attention
// ---------------------------------------------------------------------------

struct GatAttendOp<T> {
    adj: Arc<AdjList>,
    hw: NodeId,
    a_src: NodeId,
    a_dst: NodeId,
    heads: usize,
    head_dim: usize,
    reduce: HeadReduce,
    /// pre-activation scores per (position, head)
    z: Vec<T>,
    /// post-softmax attention per (position, head), before dropout
    alpha: Vec<T>,
    attn_mask: Option<Arc<Vec<T>>>,
}

impl<T: Scalar> GatAttendOp<T> {
    fn alpha_eff(&self, p: usize, h: usize) -> T {
        let a = self.alpha[p * self.heads + h];
        match &self.attn_mask {
            Some(m) => a * m[p * self.heads + h],
            None => a,
        }
    }
}

impl<T: Scalar> TapeOp<T> for GatAttendOp<T> {
    fn backward(&self, g: &Tensor<T>, vals: &[Tensor<T>], sink: &mut GradSink<'_, T>) {
        let hw = &vals[self.hw.0];
        let a_src = &vals[self.a_src.0];
        let a_dst = &vals[self.a_dst.0];
        let n = self.adj.n;
        let heads = self.heads;
        let dh = self.head_dim;
        let slope = T::from_f64(ATTN_LEAKY_SLOPE);
        let inv_heads = T::one() / T::from_f64(heads as f64);

        // head-h slice of the incoming gradient for node v
        let g_head = |v: usize, h: usize| -> &[T] {
            match self.reduce {
                HeadReduce::Concat => &g.row(v)[h * dh..(h + 1) * dh],
                HeadReduce::Mean => g.row(v),
            }
        };
        let g_scale = match self.reduce {
            HeadReduce::Concat => T::one(),
            HeadReduce::Mean => inv_heads,
        };

        // Pass 1+2: per destination row, softmax backward -> dz, dsdst.
        // Serial: rows are short and this is O(nnz·heads·dh), small next to
        // the GEMMs.
        let nnz = self.adj.nnz();
        let mut dz = vec![T::zero(); nnz * heads];
        let mut dsdst = vec![T::zero(); n * heads];
        for v in 0..n {
            let lo = self.adj.row_ptr[v];
            let hi = self.adj.row_ptr[v + 1];
            for h in 0..heads {
                let gv = g_head(v, h);
                // dalpha for every position, then softmax backward
                let mut s_dot = T::zero();
                let mut dalphas: Vec<T> = Vec::with_capacity(hi - lo);
                for p in lo..hi {
                    let j = self.adj.col_idx[p] as usize;
                    let uj = &hw.row(j)[h * dh..(h + 1) * dh];
                    let mut da = T::zero();
                    for (a, b) in gv.iter().zip(uj) {
                        da += *a * *b;
                    }
                    da *= g_scale;
                    if let Some(m) = &self.attn_mask {
                        da *= m[p * heads + h];
                    }
                    let al = self.alpha[p * heads + h];
                    s_dot += al * da;
                    dalphas.push(da);
                }
                for (idx, p) in (lo..hi).enumerate() {
                    let al = self.alpha[p * heads + h];
                    let mut d = al * (dalphas[idx] - s_dot);
                    let zv = self.z[p * heads + h];
                    if zv <= T::zero() {
                        d *= slope;
                    }
                    dz[p * heads + h] = d;
                    dsdst[v * heads + h] += d;
                }
            }
        }

        // Pass 3: per source row (via mirror): dHW and dssrc.
        let mut dssrc = vec![T::zero(); n * heads];
        {
            let dhw = sink.accum(self.hw, n, heads * dh);
            let adj = &self.adj;
            let dz_ref = &dz;
            let dsdst_ref = &dsdst;
            let a_src_row = a_src.row(0);
            let a_dst_row = a_dst.row(0);
            dhw.as_mut_slice()
                .par_chunks_mut(heads * dh)
                .zip(dssrc.par_chunks_mut(heads))
                .enumerate()
                .for_each(|(j, (dhw_row, dssrc_row))| {
                    let lo = adj.row_ptr[j];
                    let hi = adj.row_ptr[j + 1];
                    for q in lo..hi {
                        let v = adj.col_idx[q] as usize;
                        let p = adj.mirror[q] as usize; // position of (v -> j)
                        for h in 0..heads {
                            // aggregation term: alpha_eff(v->j) * g_v
                            let ae = self.alpha_eff(p, h);
                            if ae != T::zero() {
                                let gv = match self.reduce {
                                    HeadReduce::Concat => &g.row(v)[h * dh..(h + 1) * dh],
                                    HeadReduce::Mean => g.row(v),
                                };
                                let dst = &mut dhw_row[h * dh..(h + 1) * dh];
                                let s = ae * g_scale;
                                for (d, &gvx) in dst.iter_mut().zip(gv) {
                                    *d += s * gvx;
                                }
                            }
                            dssrc_row[h] += dz_ref[p * heads + h];
                        }
                    }
                    // fold score gradients into dHW rows
                    for h in 0..heads {
                        let ds = dssrc_row[h];
                        let dd = dsdst_ref[j * heads + h];
                        let dst = &mut dhw_row[h * dh..(h + 1) * dh];
                        let asr = &a_src_row[h * dh..(h + 1) * dh];
                        let adr = &a_dst_row[h * dh..(h + 1) * dh];
                        for ((d, &a1), &a2) in dst.iter_mut().zip(asr).zip(adr) {
                            *d += ds * a1 + dd * a2;
                        }
                    }
                });
        }

        // da_src / da_dst
        {
            let da = sink.accum(self.a_src, 1, heads * dh);
            let das = da.as_mut_slice();
            for j in 0..n {
                for h in 0..heads {
                    let ds = dssrc[j * heads + h];
                    if ds != T::zero() {
                        let uj = &hw.row(j)[h * dh..(h + 1) * dh];
                        for (d, &u) in das[h * dh..(h + 1) * dh].iter_mut().zip(uj) {
                            *d += ds * u;
                        }
                    }
                }
            }
        }
        {
            let da = sink.accum(self.a_dst, 1, heads * dh);
            let das = da.as_mut_slice();
            for v in 0..n {
                for h in 0..heads {
                    let dd = dsdst[v * heads + h];
                    if dd != T::zero() {
                        let uv = &hw.row(v)[h * dh..(h + 1) * dh];
                        for (d, &u) in das[h * dh..(h + 1) * dh].iter_mut().zip(uv) {
                            *d += dd * u;
                        }
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// pooling / row selection / re-masking
// ---------------------------------------------------------------------------

struct MeanPoolOp {
    h: NodeId,
}

impl<T: Scalar> TapeOp<T> for MeanPoolOp {
    fn backward(&self, g: &Tensor<T>, vals: &[Tensor<T>], sink: &mut GradSink<'_, T>) {
        let h = &vals[self.h.0];
        let n = h.rows();
        let scale = T::one() / T::from_f64(n as f64);
        let dh = sink.accum(self.h, n, h.cols());
        let gr = g.row(0);
        for i in 0..n {
            for (d, &gv) in dh.row_mut(i).iter_mut().zip(gr) {
                *d += gv * scale;
            }
        }
    }
}

struct GatherRowsOp {
    h: NodeId,
    rows: Arc<Vec<u32>>,
}

impl<T: Scalar> TapeOp<T> for GatherRowsOp {
    fn backward(&self, g: &Tensor<T>, vals: &[Tensor<T>], sink: &mut GradSink<'_, T>) {
        let h = &vals[self.h.0];
        let dh = sink.accum(self.h, h.rows(), h.cols());
        for (r, &src) in self.rows.iter().enumerate() {
            for (d, &gv) in dh.row_mut(src as usize).iter_mut().zip(g.row(r)) {
                *d += gv;
            }
        }
    }
}

struct RemaskOp {
    h: NodeId,
    token: NodeId,
    masked: Arc<Vec<u32>>,
}

impl<T: Scalar> TapeOp<T> for RemaskOp {
    fn backward(&self, g: &Tensor<T>, vals: &[Tensor<T>], sink: &mut GradSink<'_, T>) {
        let h = &vals[self.h.0];
        let cols = h.cols();
        {
            let dt = sink.accum(self.token, 1, cols);
            let dts = dt.as_mut_slice();
            for &r in self.masked.iter() {
                for (d, &gv) in dts.iter_mut().zip(g.row(r as usize)) {
                    *d += gv;
                }
            }
        }
        // replacement severs the path into the overwritten rows
        let mut gh = g.clone();
        for &r in self.masked.iter() {
            for d in gh.row_mut(r as usize) {
                *d = T::zero();
            }
        }
        sink.add(self.h, gh);
    }
}

// ---------------------------------------------------------------------------
// edge scoring
// ---------------------------------------------------------------------------

struct EdgeScoresOp<T> {
    h: NodeId,
    edges: Arc<Vec<(u32, u32)>>,
    /// saved clamped probabilities, with a flag for clamped entries
    probs: Vec<T>,
    clamped: Vec<bool>,
}

impl<T: Scalar> TapeOp<T> for EdgeScoresOp<T> {
    fn backward(&self, g: &Tensor<T>, vals: &[Tensor<T>], sink: &mut GradSink<'_, T>) {
        let h = &vals[self.h.0];
        let dh = sink.accum(self.h, h.rows(), h.cols());
        for (e, &(u, v)) in self.edges.iter().enumerate() {
            if self.clamped[e] {
                continue;
            }
            let p = self.probs[e];
            let dscore = g.as_slice()[e] * p * (T::one() - p);
            if dscore == T::zero() {
                continue;
            }
            let (u, v) = (u as usize, v as usize);
            // borrow rows separately via split indexing
            for c in 0..h.cols() {
                let hu = h.get(u, c);
                let hv = h.get(v, c);
                let du = dh.get(u, c) + dscore * hv;
                dh.set(u, c, du);
                let dv = dh.get(v, c) + dscore * hu;
                dh.set(v, c, dv);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// scalar plumbing
// ---------------------------------------------------------------------------

struct SoftplusPlusOneOp {
    theta: NodeId,
}

impl<T: Scalar> TapeOp<T> for SoftplusPlusOneOp {
    fn backward(&self, g: &Tensor<T>, vals: &[Tensor<T>], sink: &mut GradSink<'_, T>) {
        let th = vals[self.theta.0].item();
        let sig = T::one() / (T::one() + (-th).exp());
        sink.add_scalar(self.theta, g.item() * sig);
    }
}

struct WeightedSumOp<T> {
    parts: Vec<(NodeId, T)>,
}

impl<T: Scalar> TapeOp<T> for WeightedSumOp<T> {
    fn backward(&self, g: &Tensor<T>, _vals: &[Tensor<T>], sink: &mut GradSink<'_, T>) {
        let gv = g.item();
        for &(n, w) in &self.parts {
            sink.add_scalar(n, gv * w);
        }
    }
}

struct SumOp {
    x: NodeId,
}

impl<T: Scalar> TapeOp<T> for SumOp {
    fn backward(&self, g: &Tensor<T>, vals: &[Tensor<T>], sink: &mut GradSink<'_, T>) {
        let x = &vals[self.x.0];
        let gv = g.item();
        let dx = sink.accum(self.x, x.rows(), x.cols());
        for d in dx.as_mut_slice() {
            *d += gv;
        }
    }
}

struct DotConstOp<T> {
    x: NodeId,
    c: Arc<Tensor<T>>,
}

impl<T: Scalar> TapeOp<T> for DotConstOp<T> {
    fn backward(&self, g: &Tensor<T>, vals: &[Tensor<T>], sink: &mut GradSink<'_, T>) {
        let x = &vals[self.x.0];
        let gv = g.item();
        let dx = sink.accum(self.x, x.rows(), x.cols());
        for (d, &cv) in dx.as_mut_slice().iter_mut().zip(self.c.iter()) {
            *d += gv * cv;
        }
    }
}

// ---------------------------------------------------------------------------
// builders
// ---------------------------------------------------------------------------

impl<T: Scalar> Tape<T> {
    /// Dense product `A·B`.
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let av = self.value(a);
        let bv = self.value(b);
        assert_eq!(av.cols(), bv.rows(), "matmul inner dimension mismatch");
        let out = gemm(av, Trans::No, bv, Trans::No);
        self.push(out, Box::new(MatMulOp { a, b }))
    }

    /// First-layer product of (possibly masked) node features with `W`.
    /// Masked rows use the learnable token; unmasked rows read the original
    /// sparse feature rows through `sel.node_map`.
    pub fn feature_matmul(
        &mut self,
        feats: Arc<SparseFeatures<T>>,
        sel: Arc<RowSelect>,
        token: NodeId,
        w: NodeId,
    ) -> NodeId {
        let wv = self.value(w);
        assert_eq!(wv.rows(), feats.dim, "feature/W dimension mismatch");
        assert_eq!(self.value(token).cols(), feats.dim, "token dimension mismatch");
        let d_out = wv.cols();
        let n_view = sel.len();

        let token_row = gemm(self.value(token), Trans::No, wv, Trans::No);
        let mut out = Tensor::zeros(n_view, d_out);
        {
            let wv = self.value(w);
            let tr = token_row.row(0);
            out.as_mut_slice()
                .par_chunks_mut(d_out)
                .enumerate()
                .for_each(|(i, out_row)| {
                    if sel.masked[i] {
                        out_row.copy_from_slice(tr);
                    } else {
                        let orig = sel.node_map[i] as usize;
                        for p in feats.row_ptr[orig]..feats.row_ptr[orig + 1] {
                            let j = feats.row_col[p] as usize;
                            let x = feats.row_val[p];
                            for (o, &wj) in out_row.iter_mut().zip(wv.row(j)) {
                                *o += x * wj;
                            }
                        }
                    }
                });
        }

        let mut inv_map = vec![u32::MAX; feats.num_rows];
        for (vi, &orig) in sel.node_map.iter().enumerate() {
            inv_map[orig as usize] = vi as u32;
        }
        self.push(
            out,
            Box::new(FeatureMatmulOp {
                feats,
                sel,
                inv_map,
                token,
                w,
            }),
        )
    }

    /// `S·H` for a symmetric sparse matrix (normalized adjacency).
    pub fn spmm(&mut self, adj: Arc<SparseMatrix<T>>, h: NodeId) -> NodeId {
        let out = adj.matmul(self.value(h));
        self.push(out, Box::new(SpmmOp { adj, h }))
    }

    /// Adds a 1×d bias row to every row of `h`.
    pub fn add_bias(&mut self, h: NodeId, bias: NodeId) -> NodeId {
        let hv = self.value(h);
        let bv = self.value(bias);
        assert_eq!(bv.rows(), 1, "bias must be a row vector");
        assert_eq!(hv.cols(), bv.cols(), "bias width mismatch");
        let mut out = hv.clone();
        for i in 0..out.rows() {
            for (o, &b) in out.row_mut(i).iter_mut().zip(bv.row(0)) {
                *o += b;
            }
        }
        self.push(out, Box::new(AddBiasOp { h, bias }))
    }

    /// PReLU with a single learnable slope.
    pub fn prelu(&mut self, x: NodeId, alpha: NodeId) -> NodeId {
        let xv = self.value(x);
        let a = self.value(alpha).item();
        let mut out = xv.clone();
        for o in out.as_mut_slice() {
            if *o <= T::zero() {
                *o *= a;
            }
        }
        self.push(out, Box::new(PreluOp { x, alpha }))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let mut out = self.value(x).clone();
        for o in out.as_mut_slice() {
            if *o < T::zero() {
                *o = T::zero();
            }
        }
        self.push(out, Box::new(ReluOp { x }))
    }

    /// Elementwise dropout with a precomputed mask of 0 / 1/(1-p) entries.
    pub fn dropout(&mut self, x: NodeId, mask: Arc<Vec<T>>) -> NodeId {
        let xv = self.value(x);
        assert_eq!(xv.len(), mask.len(), "dropout mask length mismatch");
        let mut out = xv.clone();
        for (o, &m) in out.as_mut_slice().iter_mut().zip(mask.iter()) {
            *o *= m;
        }
        self.push(out, Box::new(DropoutOp { x, mask }))
    }

    /// Multi-head attention aggregation over `adj` (which carries self-loops).
    /// `hw` is the pre-projected input `H·W` of shape (n, heads·head_dim).
    pub fn gat_attend(
        &mut self,
        adj: Arc<AdjList>,
        hw: NodeId,
        a_src: NodeId,
        a_dst: NodeId,
        heads: usize,
        reduce: HeadReduce,
        attn_mask: Option<Arc<Vec<T>>>,
    ) -> NodeId {
        let hwv = self.value(hw);
        let n = adj.n;
        assert_eq!(hwv.rows(), n, "node count mismatch");
        assert!(heads >= 1 && hwv.cols() % heads == 0, "heads must divide width");
        let dh = hwv.cols() / heads;
        assert_eq!(self.value(a_src).shape(), (1, heads * dh));
        assert_eq!(self.value(a_dst).shape(), (1, heads * dh));
        if let Some(m) = &attn_mask {
            assert_eq!(m.len(), adj.nnz() * heads, "attention mask length mismatch");
        }
        let slope = T::from_f64(ATTN_LEAKY_SLOPE);

        // per-node score halves
        let a_src_v = self.value(a_src).row(0).to_vec();
        let a_dst_v = self.value(a_dst).row(0).to_vec();
        let mut ssrc = vec![T::zero(); n * heads];
        let mut sdst = vec![T::zero(); n * heads];
        for i in 0..n {
            let row = hwv.row(i);
            for h in 0..heads {
                let u = &row[h * dh..(h + 1) * dh];
                let mut s1 = T::zero();
                let mut s2 = T::zero();
                for ((&x, &a1), &a2) in u
                    .iter()
                    .zip(&a_src_v[h * dh..(h + 1) * dh])
                    .zip(&a_dst_v[h * dh..(h + 1) * dh])
                {
                    s1 += x * a1;
                    s2 += x * a2;
                }
                ssrc[i * heads + h] = s1;
                sdst[i * heads + h] = s2;
            }
        }

        let nnz = adj.nnz();
        let mut z = vec![T::zero(); nnz * heads];
        let mut alpha = vec![T::zero(); nnz * heads];
        for v in 0..n {
            let lo = adj.row_ptr[v];
            let hi = adj.row_ptr[v + 1];
            for h in 0..heads {
                let mut zmax = T::neg_infinity();
                for p in lo..hi {
                    let j = adj.col_idx[p] as usize;
                    let raw = ssrc[j * heads + h] + sdst[v * heads + h];
                    let e = if raw > T::zero() { raw } else { raw * slope };
                    z[p * heads + h] = raw;
                    alpha[p * heads + h] = e;
                    if e > zmax {
                        zmax = e;
                    }
                }
                let mut denom = T::zero();
                for p in lo..hi {
                    let e = (alpha[p * heads + h] - zmax).exp();
                    alpha[p * heads + h] = e;
                    denom += e;
                }
                for p in lo..hi {
                    alpha[p * heads + h] /= denom;
                }
            }
        }

        let out_cols = match reduce {
            HeadReduce::Concat => heads * dh,
            HeadReduce::Mean => dh,
        };
        let mut out = Tensor::zeros(n, out_cols);
        let inv_heads = T::one() / T::from_f64(heads as f64);
        {
            let alpha_ref = &alpha;
            let mask_ref = &attn_mask;
            out.as_mut_slice()
                .par_chunks_mut(out_cols)
                .enumerate()
                .for_each(|(v, out_row)| {
                    let lo = adj.row_ptr[v];
                    let hi = adj.row_ptr[v + 1];
                    for h in 0..heads {
                        for p in lo..hi {
                            let mut a = alpha_ref[p * heads + h];
                            if let Some(m) = mask_ref {
                                a *= m[p * heads + h];
                            }
                            if a == T::zero() {
                                continue;
                            }
                            let j = adj.col_idx[p] as usize;
                            let u = &hwv.row(j)[h * dh..(h + 1) * dh];
                            match reduce {
                                HeadReduce::Concat => {
                                    for (o, &x) in
                                        out_row[h * dh..(h + 1) * dh].iter_mut().zip(u)
                                    {
                                        *o += a * x;
                                    }
                                }
                                HeadReduce::Mean => {
                                    let s = a * inv_heads;
                                    for (o, &x) in out_row.iter_mut().zip(u) {
                                        *o += s * x;
                                    }
                                }
                            }
                        }
                    }
                });
        }

        self.push(
            out,
            Box::new(GatAttendOp {
                adj,
                hw,
                a_src,
                a_dst,
                heads,
                head_dim: dh,
                reduce,
                z,
                alpha,
                attn_mask,
            }),
        )
    }

    /// Column-wise mean over rows -> 1×d.
    pub fn mean_pool(&mut self, h: NodeId) -> NodeId {
        let hv = self.value(h);
        assert!(hv.rows() >= 1, "mean_pool requires at least one row");
        let n = hv.rows();
        let mut out = Tensor::zeros(1, hv.cols());
        for i in 0..n {
            for (o, &x) in out.row_mut(0).iter_mut().zip(hv.row(i)) {
                *o += x;
            }
        }
        let scale = T::one() / T::from_f64(n as f64);
        for o in out.as_mut_slice() {
            *o *= scale;
        }
        self.push(out, Box::new(MeanPoolOp { h }))
    }

    /// Selects rows of `h` in the given order.
    pub fn gather_rows(&mut self, h: NodeId, rows: Arc<Vec<u32>>) -> NodeId {
        let hv = self.value(h);
        let mut out = Tensor::zeros(rows.len(), hv.cols());
        for (r, &src) in rows.iter().enumerate() {
            out.row_mut(r).copy_from_slice(hv.row(src as usize));
        }
        self.push(out, Box::new(GatherRowsOp { h, rows }))
    }

    /// Overwrites the given rows of `h` with a learnable token row.
    /// Gradient flows into the token; the overwritten rows are severed.
    pub fn remask(&mut self, h: NodeId, masked: Arc<Vec<u32>>, token: NodeId) -> NodeId {
        let hv = self.value(h);
        let tv = self.value(token);
        assert_eq!(tv.shape(), (1, hv.cols()), "token width mismatch");
        let mut out = hv.clone();
        for &r in masked.iter() {
            assert!((r as usize) < out.rows(), "masked row id out of range");
            out.row_mut(r as usize).copy_from_slice(tv.row(0));
        }
        self.push(out, Box::new(RemaskOp { h, token, masked }))
    }

    /// Inner-product edge probabilities σ(h_u·h_v), clamped away from {0,1}.
    pub fn edge_scores(&mut self, h: NodeId, edges: Arc<Vec<(u32, u32)>>) -> NodeId {
        let hv = self.value(h);
        let n = hv.rows();
        for &(u, v) in edges.iter() {
            assert!((u as usize) < n && (v as usize) < n, "edge endpoint out of range");
        }
        let eps = T::from_f64(PROB_EPS);
        let hi_clamp = T::one() - eps;
        let mut probs = vec![T::zero(); edges.len()];
        let mut clamped = vec![false; edges.len()];
        for (e, &(u, v)) in edges.iter().enumerate() {
            let mut dot = T::zero();
            for (a, b) in hv.row(u as usize).iter().zip(hv.row(v as usize)) {
                dot += *a * *b;
            }
            let p = T::one() / (T::one() + (-dot).exp());
            if p < eps {
                probs[e] = eps;
                clamped[e] = true;
            } else if p > hi_clamp {
                probs[e] = hi_clamp;
                clamped[e] = true;
            } else {
                probs[e] = p;
            }
        }
        let out = Tensor::from_vec(1, edges.len(), probs.clone());
        self.push(
            out,
            Box::new(EdgeScoresOp {
                h,
                edges,
                probs,
                clamped,
            }),
        )
    }

    /// γ = 1 + softplus(θ), keeping the loss exponents ≥ 1.
    pub fn softplus_plus_one(&mut self, theta: NodeId) -> NodeId {
        let th = self.value(theta).item();
        // stable softplus
        let sp = th.max(T::zero()) + (-(th.abs())).exp().ln_1p();
        self.push(
            Tensor::scalar(T::one() + sp),
            Box::new(SoftplusPlusOneOp { theta }),
        )
    }

    /// Weighted sum of scalar nodes.
    pub fn weighted_sum(&mut self, parts: &[(NodeId, T)]) -> NodeId {
        let mut total = T::zero();
        for &(n, w) in parts {
            total += self.value(n).item() * w;
        }
        self.push(
            Tensor::scalar(total),
            Box::new(WeightedSumOp {
                parts: parts.to_vec(),
            }),
        )
    }

    /// Sum of all entries -> scalar.
    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let total = self.value(x).iter().copied().sum();
        self.push(Tensor::scalar(total), Box::new(SumOp { x }))
    }

    /// Fixed linear functional ⟨x, c⟩ -> scalar; used to reduce tensor
    /// outputs to scalars in gradient checks.
    pub fn dot_const(&mut self, x: NodeId, c: Arc<Tensor<T>>) -> NodeId {
        let xv = self.value(x);
        assert_eq!(xv.shape(), c.shape(), "dot_const shape mismatch");
        let mut total = T::zero();
        for (a, b) in xv.iter().zip(c.iter()) {
            total += *a * *b;
        }
        self.push(Tensor::scalar(total), Box::new(DotConstOp { x, c }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_forward_and_backward() {
        let mut tape: Tape<f64> = Tape::new();
        let a = tape.leaf(Tensor::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]));
        let b = tape.leaf(Tensor::from_vec(2, 1, vec![5.0, 6.0]));
        let c = tape.matmul(a, b);
        assert_eq!(tape.value(c).as_slice(), &[17.0, 39.0]);
        let s = tape.sum(c);
        let grads = tape.backward(s);
        // d(sum)/dA = g·Bᵀ with g = [1,1]ᵀ
        assert_eq!(grads.get(a).unwrap().as_slice(), &[5.0, 6.0, 5.0, 6.0]);
        assert_eq!(grads.get(b).unwrap().as_slice(), &[4.0, 6.0]);
    }

    #[test]
    fn remask_blocks_gradient_to_overwritten_rows() {
        let mut tape: Tape<f64> = Tape::new();
        let h = tape.leaf(Tensor::from_vec(3, 2, vec![1.0; 6]));
        let token = tape.leaf(Tensor::from_vec(1, 2, vec![0.5, -0.5]));
        let masked = Arc::new(vec![1u32]);
        let out = tape.remask(h, masked, token);
        assert_eq!(tape.value(out).row(1), &[0.5, -0.5]);
        let s = tape.sum(out);
        let grads = tape.backward(s);
        let gh = grads.get(h).unwrap();
        assert_eq!(gh.row(0), &[1.0, 1.0]);
        assert_eq!(gh.row(1), &[0.0, 0.0]);
        assert_eq!(gh.row(2), &[1.0, 1.0]);
        assert_eq!(grads.get(token).unwrap().as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn mean_pool_gradient_is_uniform() {
        let mut tape: Tape<f64> = Tape::new();
        let h = tape.leaf(Tensor::from_vec(4, 2, vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0]));
        let p = tape.mean_pool(h);
        assert_eq!(tape.value(p).as_slice(), &[0.5, 0.5]);
        let s = tape.sum(p);
        let grads = tape.backward(s);
        for v in grads.get(h).unwrap().iter() {
            assert!((v - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn per_op_gradient_checks() {
        use crate::tensornet::grad_check;
        use rand::Rng;
        let mut rng = crate::seeds::rng(41);
        let rand_t = |rng: &mut rand_chacha::ChaCha12Rng, r: usize, c: usize| {
            Tensor::from_vec(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect())
        };

        // adjacency: path 0-1-2-3 plus chord (0,2), with self loops
        static N0: [u32; 2] = [1, 2];
        static N1: [u32; 2] = [0, 2];
        static N2: [u32; 3] = [0, 1, 3];
        static N3: [u32; 1] = [2];
        let adj = Arc::new(AdjList::from_sorted_neighbors(4, |v| match v {
            0 => &N0[..],
            1 => &N1[..],
            2 => &N2[..],
            _ => &N3[..],
        }));

        // gat_attend: concat and mean, 2 heads, with a dropout mask
        for reduce in [HeadReduce::Concat, HeadReduce::Mean] {
            let hw = rand_t(&mut rng, 4, 6);
            let a_src = rand_t(&mut rng, 1, 6);
            let a_dst = rand_t(&mut rng, 1, 6);
            let probe_cols = match reduce {
                HeadReduce::Concat => 6,
                HeadReduce::Mean => 3,
            };
            let probe = Arc::new(rand_t(&mut rng, 4, probe_cols));
            let mask: Arc<Vec<f64>> = Arc::new(
                (0..adj.nnz() * 2)
                    .map(|i| if i % 5 == 0 { 0.0 } else { 1.0 / 0.9 })
                    .collect(),
            );
            let adj2 = adj.clone();
            let err = grad_check(
                &[hw, a_src, a_dst],
                {
                    let (adj2, probe, mask) = (adj2.clone(), probe.clone(), mask.clone());
                    move |tape, ids| {
                        let out = tape.gat_attend(
                            adj2.clone(),
                            ids[0],
                            ids[1],
                            ids[2],
                            2,
                            reduce,
                            Some(mask.clone()),
                        );
                        tape.dot_const(out, probe.clone())
                    }
                },
                1e-6,
                64,
                7,
            );
            assert!(err < 1e-7, "gat_attend {reduce:?} gradcheck err {err}");
        }

        // feature_matmul with masked rows and a partial node map
        let feats = Arc::new(SparseFeatures::from_dense_rows(
            5,
            4,
            &[
                1.0, 0.0, 0.5, 0.0, //
                0.0, 2.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, 3.0, //
                0.25, 0.0, 0.0, 1.0, //
                0.0, 1.5, 0.5, 0.0,
            ],
        ));
        let sel = Arc::new(RowSelect::new(vec![4, 0, 2, 1], vec![false, true, false, true]));
        let token = rand_t(&mut rng, 1, 4);
        let w = rand_t(&mut rng, 4, 3);
        let probe = Arc::new(rand_t(&mut rng, 4, 3));
        let err = grad_check(
            &[token, w],
            {
                let (feats, sel, probe) = (feats.clone(), sel.clone(), probe.clone());
                move |tape, ids| {
                    let out = tape.feature_matmul(feats.clone(), sel.clone(), ids[0], ids[1]);
                    tape.dot_const(out, probe.clone())
                }
            },
            1e-6,
            32,
            9,
        );
        assert!(err < 1e-7, "feature_matmul gradcheck err {err}");

        // spmm, bias, prelu, relu, dropout, gather, remask, softplus chain
        let sm = Arc::new(SparseMatrix {
            n: 3,
            row_ptr: vec![0, 2, 5, 7],
            col_idx: vec![0, 1, 0, 1, 2, 1, 2],
            values: vec![0.5, 0.4, 0.4, 0.3, 0.35, 0.35, 0.6],
        });
        let h = rand_t(&mut rng, 3, 2);
        let bias = rand_t(&mut rng, 1, 2);
        let alpha = Tensor::scalar(0.3);
        let theta = Tensor::scalar(0.4);
        let token2 = rand_t(&mut rng, 1, 2);
        let probe2 = Arc::new(rand_t(&mut rng, 2, 2));
        let dmask: Arc<Vec<f64>> = Arc::new(vec![1.25, 0.0, 1.25, 1.25, 0.0, 1.25]);
        let rows = Arc::new(vec![2u32, 0]);
        let masked = Arc::new(vec![1u32]);
        let err = grad_check(
            &[h, bias, alpha, theta, token2],
            {
                let (sm, probe2, dmask, rows, masked) = (
                    sm.clone(),
                    probe2.clone(),
                    dmask.clone(),
                    rows.clone(),
                    masked.clone(),
                );
                move |tape, ids| {
                    let a = tape.spmm(sm.clone(), ids[0]);
                    let b = tape.add_bias(a, ids[1]);
                    let c = tape.prelu(b, ids[2]);
                    let dd = tape.dropout(c, dmask.clone());
                    let e = tape.remask(dd, masked.clone(), ids[4]);
                    let f = tape.gather_rows(e, rows.clone());
                    let lin = tape.dot_const(f, probe2.clone());
                    let gamma = tape.softplus_plus_one(ids[3]);
                    tape.weighted_sum(&[(lin, 1.0), (gamma, 0.5)])
                }
            },
            1e-6,
            32,
            13,
        );
        assert!(err < 1e-7, "plumbing chain gradcheck err {err}");
    }

    #[test]
    fn edge_scores_match_sigmoid_of_inner_product() {
        let mut tape: Tape<f64> = Tape::new();
        // unit vectors: parallel, orthogonal, antiparallel
        let h = tape.leaf(Tensor::from_vec(
            3,
            2,
            vec![1.0, 0.0, 0.0, 1.0, -1.0, 0.0],
        ));
        let edges = Arc::new(vec![(0u32, 0u32), (0, 1), (0, 2)]);
        let s = tape.edge_scores(h, edges);
        let v = tape.value(s).as_slice().to_vec();
        assert!((v[0] - 0.731058578).abs() < 1e-8);
        assert!((v[1] - 0.5).abs() < 1e-12);
        assert!((v[2] - 0.268941421).abs() < 1e-8);
        for p in v {
            assert!(p > 0.0 && p < 1.0);
        }
    }
}
