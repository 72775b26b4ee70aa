//! Dense/sparse tensor kernels, GNN layers, reverse-mode autodiff, Adam.
//!
//! Everything is generic over [`Scalar`] so the same forward/backward code
//! runs in 32-bit mode for training and in 64-bit mode for finite-difference
//! gradient checking.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod ops;
pub mod params;
pub mod tape;

pub use adam::{adam_step, Adam, AdamConfig};
pub use gradcheck::grad_check;
pub use layers::{gat_layer, gcn_layer, mlp, Activation, GatLayerParams};
pub use params::{ArchConfig, LayerType, ModelParams};
pub use tape::{GradSink, Gradients, NodeId, Tape, TapeOp};

use rayon::prelude::*;

/// Floating-point element type for all kernels: `f32` in training, `f64`
/// for gradient checks.
pub trait Scalar:
    num_traits::Float
    + num_traits::NumAssign
    + std::fmt::Debug
    + std::fmt::Display
    + std::iter::Sum
    + Send
    + Sync
    + 'static
{
    fn from_f64(x: f64) -> Self;
    fn from_f32(x: f32) -> Self;
    fn as_f64(self) -> f64;

    /// C ← alpha·A·B + beta·C with explicit strides (column/row agnostic).
    ///
    /// # Safety
    /// Pointers must reference buffers valid for the given dims/strides.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );
}

impl Scalar for f32 {
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn from_f32(x: f32) -> Self {
        x
    }
    fn as_f64(self) -> f64 {
        f64::from(self)
    }
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn from_f32(x: f32) -> Self {
        f64::from(x)
    }
    fn as_f64(self) -> f64 {
        self
    }
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

/// Dense row-major matrix. Scalars are 1×1, row vectors 1×d.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "payload length must match shape");
        Tensor { rows, cols, data }
    }

    pub fn scalar(v: T) -> Self {
        Tensor {
            rows: 1,
            cols: 1,
            data: vec![v],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn item(&self) -> T {
        assert_eq!(self.data.len(), 1, "item() requires a 1x1 tensor");
        self.data[0]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.data.iter()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Elementwise `self += other`.
    pub fn add_assign(&mut self, other: &Tensor<T>) {
        assert_eq!(self.shape(), other.shape(), "shape mismatch in add_assign");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
    }

    /// Casts every element; used to move parameters between 32/64-bit modes.
    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| U::from_f64(v.as_f64())).collect(),
        }
    }
}

/// Whether either gemm operand is transposed.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Trans {
    No,
    Yes,
}

/// out += A(op) · B(op), parallelized over output row blocks so results are
/// independent of thread count.
pub fn gemm_acc<T: Scalar>(
    out: &mut Tensor<T>,
    a: &Tensor<T>,
    ta: Trans,
    b: &Tensor<T>,
    tb: Trans,
) {
    let (m, k1) = match ta {
        Trans::No => (a.rows, a.cols),
        Trans::Yes => (a.cols, a.rows),
    };
    let (k2, n) = match tb {
        Trans::No => (b.rows, b.cols),
        Trans::Yes => (b.cols, b.rows),
    };
    assert_eq!(k1, k2, "inner dimensions must agree");
    assert_eq!(out.shape(), (m, n), "output shape mismatch");
    let k = k1;
    if m == 0 || n == 0 {
        return;
    }

    // Strides of A/B as (row, col) in their op-applied orientation.
    let (rsa, csa) = match ta {
        Trans::No => (a.cols as isize, 1),
        Trans::Yes => (1, a.cols as isize),
    };
    let (rsb, csb) = match tb {
        Trans::No => (b.cols as isize, 1),
        Trans::Yes => (1, b.cols as isize),
    };

    let threads = rayon::current_num_threads().max(1);
    let flops = m * n * k;
    let want_blocks = if flops < (1 << 22) { 1 } else { threads * 2 };
    let block = m.div_ceil(want_blocks).max(1);

    let a_ptr = SendPtr(a.data.as_ptr());
    let b_ptr = SendPtr(b.data.as_ptr());
    out.data
        .par_chunks_mut(block * n)
        .enumerate()
        .for_each(|(bi, chunk)| {
            // capture the Send wrappers whole (field capture would leak the
            // raw pointers out of them)
            let a_ptr = a_ptr;
            let b_ptr = b_ptr;
            let row0 = bi * block;
            let rows_here = chunk.len() / n;
            // A block start: rows offset by row0 along the op-applied row stride.
            unsafe {
                let a_block = a_ptr.get().offset(row0 as isize * rsa);
                T::gemm(
                    rows_here,
                    k,
                    n,
                    T::one(),
                    a_block,
                    rsa,
                    csa,
                    b_ptr.get(),
                    rsb,
                    csb,
                    T::one(),
                    chunk.as_mut_ptr(),
                    n as isize,
                    1,
                );
            }
        });
}

/// Fresh `A(op)·B(op)`.
pub fn gemm<T: Scalar>(a: &Tensor<T>, ta: Trans, b: &Tensor<T>, tb: Trans) -> Tensor<T> {
    let m = match ta {
        Trans::No => a.rows,
        Trans::Yes => a.cols,
    };
    let n = match tb {
        Trans::No => b.cols,
        Trans::Yes => b.rows,
    };
    let mut out = Tensor::zeros(m, n);
    gemm_acc(&mut out, a, ta, b, tb);
    out
}

#[derive(Copy, Clone)]
struct SendPtr<T>(*const T);
unsafe impl<T> Send for SendPtr<T> {}
unsafe impl<T> Sync for SendPtr<T> {}

impl<T> SendPtr<T> {
    fn get(self) -> *const T {
        self.0
    }
}

/// CSR sparse matrix with values (used for the normalized adjacency).
#[derive(Clone, Debug)]
pub struct SparseMatrix<T> {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<u32>,
    pub values: Vec<T>,
}

impl<T: Scalar> SparseMatrix<T> {
    /// out = S · H (dense), parallel over output rows.
    pub fn matmul(&self, h: &Tensor<T>) -> Tensor<T> {
        assert_eq!(self.n, h.rows(), "spmm dimension mismatch");
        let cols = h.cols();
        let mut out = Tensor::zeros(self.n, cols);
        let row_ptr = &self.row_ptr;
        let col_idx = &self.col_idx;
        let values = &self.values;
        out.data
            .par_chunks_mut(cols)
            .enumerate()
            .for_each(|(v, out_row)| {
                for p in row_ptr[v]..row_ptr[v + 1] {
                    let j = col_idx[p] as usize;
                    let w = values[p];
                    let hj = h.row(j);
                    for (o, x) in out_row.iter_mut().zip(hj) {
                        *o += w * *x;
                    }
                }
            });
        out
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        match self.col_idx[lo..hi].binary_search(&(j as u32)) {
            Ok(p) => self.values[lo + p],
            Err(_) => T::zero(),
        }
    }
}

/// Unweighted adjacency in CSR form with self-loops, plus the position of
/// each edge's mirror so backward passes can scatter without contention.
#[derive(Clone, Debug)]
pub struct AdjList {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<u32>,
    /// mirror[p] = position q of the reverse edge: if p holds (v→j) in row v,
    /// q holds (j→v) in row j. Self-loops mirror to themselves.
    pub mirror: Vec<u32>,
}

impl AdjList {
    /// Builds from per-node sorted neighbor lists (self-loops are inserted
    /// here, one per node).
    pub fn from_sorted_neighbors<'a, F>(n: usize, neigh: F) -> Self
    where
        F: Fn(usize) -> &'a [u32],
    {
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0usize);
        let mut col_idx: Vec<u32> = Vec::new();
        for v in 0..n {
            let ns = neigh(v);
            // merge self-loop into the sorted neighbor run
            let vpos = ns.partition_point(|&x| (x as usize) < v);
            col_idx.extend_from_slice(&ns[..vpos]);
            col_idx.push(v as u32);
            col_idx.extend_from_slice(&ns[vpos..]);
            row_ptr.push(col_idx.len());
        }
        let mut mirror = vec![0u32; col_idx.len()];
        for v in 0..n {
            for p in row_ptr[v]..row_ptr[v + 1] {
                let j = col_idx[p] as usize;
                let lo = row_ptr[j];
                let hi = row_ptr[j + 1];
                let q = lo + col_idx[lo..hi]
                    .binary_search(&(v as u32))
                    .expect("adjacency must be symmetric");
                mirror[p] = q as u32;
            }
        }
        AdjList {
            n,
            row_ptr,
            col_idx,
            mirror,
        }
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.row_ptr[v + 1] - self.row_ptr[v]
    }
}

/// Sparse view of a node feature matrix (CSR by node and CSC by feature).
/// Benchmark feature matrices are typically sparse bag-of-words; the first
/// encoder layer exploits this.
#[derive(Clone, Debug)]
pub struct SparseFeatures<T> {
    pub num_rows: usize,
    pub dim: usize,
    pub row_ptr: Vec<usize>,
    pub row_col: Vec<u32>,
    pub row_val: Vec<T>,
    pub col_ptr: Vec<usize>,
    pub col_row: Vec<u32>,
    pub col_val: Vec<T>,
}

impl<T: Scalar> SparseFeatures<T> {
    pub fn from_dense_rows(num_rows: usize, dim: usize, data: &[f32]) -> Self {
        assert_eq!(data.len(), num_rows * dim);
        let mut row_ptr = Vec::with_capacity(num_rows + 1);
        row_ptr.push(0usize);
        let mut row_col = Vec::new();
        let mut row_val = Vec::new();
        let mut col_counts = vec![0usize; dim];
        for i in 0..num_rows {
            for (j, &x) in data[i * dim..(i + 1) * dim].iter().enumerate() {
                if x != 0.0 {
                    row_col.push(j as u32);
                    row_val.push(T::from_f32(x));
                    col_counts[j] += 1;
                }
            }
            row_ptr.push(row_col.len());
        }
        let mut col_ptr = Vec::with_capacity(dim + 1);
        col_ptr.push(0usize);
        for c in &col_counts {
            col_ptr.push(col_ptr.last().unwrap() + c);
        }
        let mut cursor = col_ptr[..dim].to_vec();
        let mut col_row = vec![0u32; row_col.len()];
        let mut col_val = vec![T::zero(); row_col.len()];
        for i in 0..num_rows {
            for p in row_ptr[i]..row_ptr[i + 1] {
                let j = row_col[p] as usize;
                col_row[cursor[j]] = i as u32;
                col_val[cursor[j]] = row_val[p];
                cursor[j] += 1;
            }
        }
        SparseFeatures {
            num_rows,
            dim,
            row_ptr,
            row_col,
            row_val,
            col_ptr,
            col_row,
            col_val,
        }
    }

    pub fn nnz(&self) -> usize {
        self.row_col.len()
    }
}
