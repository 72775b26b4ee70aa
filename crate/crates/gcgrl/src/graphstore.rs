//! Graph container, on-disk dataset format, text import, and edge splits.
//!
//! Dataset directory layout (all integers little-endian):
//!   meta.json     num_nodes, num_edges (undirected), feature_dim,
//!                 num_classes, has_labels, has_splits
//!   edges.bin     num_edges × (u32, u32) with u < v
//!   features.bin  num_nodes × feature_dim × f32, row-major
//!   labels.bin    optional, num_nodes × u32
//!   splits.bin    optional, num_nodes × u8 (0=train, 1=val, 2=test)

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::seeds;
use crate::tensornet::{Scalar, SparseMatrix};
use crate::Result;

/// Per-node evaluation split tag.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum SplitTag {
    Train,
    Val,
    Test,
}

impl SplitTag {
    pub fn to_u8(self) -> u8 {
        match self {
            SplitTag::Train => 0,
            SplitTag::Val => 1,
            SplitTag::Test => 2,
        }
    }

    pub fn from_u8(v: u8) -> Result<Self> {
        match v {
            0 => Ok(SplitTag::Train),
            1 => Ok(SplitTag::Val),
            2 => Ok(SplitTag::Test),
            other => Err(Error::Format(format!("invalid split tag {other}"))),
        }
    }
}

/// Immutable undirected graph with dense node features.
///
/// Stored edges are deduplicated, self-loop free, and canonical (u < v);
/// the CSR index covers both directions with sorted neighbor lists.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    edges: Vec<(u32, u32)>,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    features: Vec<f32>,
    feature_dim: usize,
    labels: Option<Vec<u32>>,
    num_classes: usize,
    split_masks: Option<Vec<SplitTag>>,
}

impl Graph {
    /// Normalizing constructor: symmetrizes, deduplicates, strips self-loops,
    /// then validates every invariant.
    pub fn build(
        num_nodes: usize,
        raw_edges: impl IntoIterator<Item = (u32, u32)>,
        features: Vec<f32>,
        feature_dim: usize,
        labels: Option<Vec<u32>>,
        split_masks: Option<Vec<SplitTag>>,
    ) -> Result<Graph> {
        if features.len() != num_nodes * feature_dim {
            return Err(Error::Validation(format!(
                "feature matrix has {} values, expected {} ({} nodes x {} dims)",
                features.len(),
                num_nodes * feature_dim,
                num_nodes,
                feature_dim
            )));
        }
        for (i, v) in features.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Validation(format!(
                    "non-finite feature value at row {}, column {}",
                    i / feature_dim.max(1),
                    i % feature_dim.max(1)
                )));
            }
        }

        let mut edges: Vec<(u32, u32)> = Vec::new();
        for (u, v) in raw_edges {
            if (u as usize) >= num_nodes || (v as usize) >= num_nodes {
                return Err(Error::Validation(format!(
                    "edge ({u}, {v}) endpoint out of range for {num_nodes} nodes"
                )));
            }
            if u == v {
                continue; // strip self-loops
            }
            edges.push(if u < v { (u, v) } else { (v, u) });
        }
        edges.sort_unstable();
        edges.dedup();

        let num_classes = match &labels {
            Some(ls) => {
                if ls.len() != num_nodes {
                    return Err(Error::Validation(format!(
                        "label vector has {} entries, expected {num_nodes}",
                        ls.len()
                    )));
                }
                ls.iter().max().map_or(0, |m| *m as usize + 1)
            }
            None => 0,
        };
        if let Some(sm) = &split_masks {
            if sm.len() != num_nodes {
                return Err(Error::Validation(format!(
                    "split mask has {} entries, expected {num_nodes}",
                    sm.len()
                )));
            }
        }

        // CSR over both directions, sorted per row
        let mut deg = vec![0usize; num_nodes];
        for &(u, v) in &edges {
            deg[u as usize] += 1;
            deg[v as usize] += 1;
        }
        let mut row_ptr = Vec::with_capacity(num_nodes + 1);
        row_ptr.push(0usize);
        for d in &deg {
            row_ptr.push(row_ptr.last().unwrap() + d);
        }
        let mut cursor = row_ptr[..num_nodes].to_vec();
        let mut col_idx = vec![0u32; edges.len() * 2];
        for &(u, v) in &edges {
            col_idx[cursor[u as usize]] = v;
            cursor[u as usize] += 1;
            col_idx[cursor[v as usize]] = u;
            cursor[v as usize] += 1;
        }
        for v in 0..num_nodes {
            col_idx[row_ptr[v]..row_ptr[v + 1]].sort_unstable();
        }

        Ok(Graph {
            num_nodes,
            edges,
            row_ptr,
            col_idx,
            features,
            feature_dim,
            labels,
            num_classes,
            split_masks,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Undirected edges, stored once.
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.col_idx[self.row_ptr[v]..self.row_ptr[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.row_ptr[v + 1] - self.row_ptr[v]
    }

    pub fn has_edge(&self, u: u32, v: u32) -> bool {
        let (u, v) = if u < v { (u, v) } else { (v, u) };
        self.edges.binary_search(&(u, v)).is_ok()
    }

    pub fn features(&self) -> &[f32] {
        &self.features
    }

    pub fn feature_row(&self, i: usize) -> &[f32] {
        &self.features[i * self.feature_dim..(i + 1) * self.feature_dim]
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    pub fn split_masks(&self) -> Option<&[SplitTag]> {
        self.split_masks.as_deref()
    }

    /// Same nodes/features/labels, topology replaced by the given edge list
    /// (link-prediction pretraining uses the train edges only).
    pub fn restrict_edges(&self, edges: &[(u32, u32)]) -> Result<Graph> {
        Graph::build(
            self.num_nodes,
            edges.iter().copied(),
            self.features.clone(),
            self.feature_dim,
            self.labels.clone(),
            self.split_masks.clone(),
        )
    }

    /// Divides every feature row by its L1 norm (rows of all zeros are left
    /// unchanged). Controlled by the `data.row_normalize` config flag.
    pub fn row_normalize_features(&mut self) {
        for i in 0..self.num_nodes {
            let row = &mut self.features[i * self.feature_dim..(i + 1) * self.feature_dim];
            let s: f32 = row.iter().map(|v| v.abs()).sum();
            if s > 0.0 {
                for v in row {
                    *v /= s;
                }
            }
        }
    }
}

/// Â = D̃^{-1/2}(A+I)D̃^{-1/2}; every stored entry lies in (0, 1] and the
/// matrix is symmetric. Isolated nodes keep a unit self-loop.
pub fn normalized_adjacency<T: Scalar>(g: &Graph) -> SparseMatrix<T> {
    let n = g.num_nodes();
    let inv_sqrt: Vec<f64> = (0..n).map(|v| 1.0 / ((g.degree(v) as f64 + 1.0).sqrt())).collect();
    let mut row_ptr = Vec::with_capacity(n + 1);
    row_ptr.push(0usize);
    let mut col_idx = Vec::with_capacity(g.num_edges() * 2 + n);
    let mut values = Vec::with_capacity(g.num_edges() * 2 + n);
    for v in 0..n {
        let ns = g.neighbors(v);
        let vpos = ns.partition_point(|&x| (x as usize) < v);
        for &j in &ns[..vpos] {
            col_idx.push(j);
            values.push(T::from_f64(inv_sqrt[v] * inv_sqrt[j as usize]));
        }
        col_idx.push(v as u32);
        values.push(T::from_f64(inv_sqrt[v] * inv_sqrt[v]));
        for &j in &ns[vpos..] {
            col_idx.push(j);
            values.push(T::from_f64(inv_sqrt[v] * inv_sqrt[j as usize]));
        }
        row_ptr.push(col_idx.len());
    }
    SparseMatrix {
        n,
        row_ptr,
        col_idx,
        values,
    }
}

// ---------------------------------------------------------------------------
// dataset directory IO
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct Meta {
    num_nodes: usize,
    num_edges: usize,
    feature_dim: usize,
    num_classes: usize,
    has_labels: bool,
    has_splits: bool,
}

/// Loads and validates a dataset directory.
pub fn load_graph(dir: &Path) -> Result<Graph> {
    let meta_path = dir.join("meta.json");
    let meta_text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: Meta =
        serde_json::from_str(&meta_text).map_err(|e| Error::Format(format!("meta.json: {e}")))?;

    let edges_path = dir.join("edges.bin");
    let edge_bytes = std::fs::read(&edges_path).map_err(|e| Error::io(&edges_path, e))?;
    if edge_bytes.len() != meta.num_edges * 8 {
        return Err(Error::Format(format!(
            "edges.bin holds {} bytes but meta declares {} edges ({} bytes)",
            edge_bytes.len(),
            meta.num_edges,
            meta.num_edges * 8
        )));
    }
    let mut edges = Vec::with_capacity(meta.num_edges);
    for rec in edge_bytes.chunks_exact(8) {
        let u = u32::from_le_bytes([rec[0], rec[1], rec[2], rec[3]]);
        let v = u32::from_le_bytes([rec[4], rec[5], rec[6], rec[7]]);
        edges.push((u, v));
    }

    let feat_path = dir.join("features.bin");
    let feat_bytes = std::fs::read(&feat_path).map_err(|e| Error::io(&feat_path, e))?;
    if feat_bytes.len() != meta.num_nodes * meta.feature_dim * 4 {
        return Err(Error::Format(format!(
            "features.bin holds {} bytes but meta declares {}x{} floats",
            feat_bytes.len(),
            meta.num_nodes,
            meta.feature_dim
        )));
    }
    let features: Vec<f32> = feat_bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();

    let labels = if meta.has_labels {
        let path = dir.join("labels.bin");
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        if bytes.len() != meta.num_nodes * 4 {
            return Err(Error::Format(format!(
                "labels.bin holds {} bytes, expected {}",
                bytes.len(),
                meta.num_nodes * 4
            )));
        }
        Some(
            bytes
                .chunks_exact(4)
                .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect::<Vec<u32>>(),
        )
    } else {
        None
    };

    let split_masks = if meta.has_splits {
        let path = dir.join("splits.bin");
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        if bytes.len() != meta.num_nodes {
            return Err(Error::Format(format!(
                "splits.bin holds {} bytes, expected {}",
                bytes.len(),
                meta.num_nodes
            )));
        }
        Some(bytes.iter().map(|&b| SplitTag::from_u8(b)).collect::<Result<Vec<_>>>()?)
    } else {
        None
    };

    let g = Graph::build(
        meta.num_nodes,
        edges,
        features,
        meta.feature_dim,
        labels,
        split_masks,
    )?;
    if meta.has_labels && g.num_classes() > meta.num_classes {
        return Err(Error::Format(format!(
            "labels.bin references class {} but meta declares {} classes",
            g.num_classes() - 1,
            meta.num_classes
        )));
    }
    Ok(g)
}

/// Writes the canonical dataset directory; `load_graph` of the result is
/// identity on graph contents.
pub fn save_dataset(g: &Graph, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = Meta {
        num_nodes: g.num_nodes(),
        num_edges: g.num_edges(),
        feature_dim: g.feature_dim(),
        num_classes: g.num_classes(),
        has_labels: g.labels().is_some(),
        has_splits: g.split_masks().is_some(),
    };
    let meta_path = dir.join("meta.json");
    let meta_json = serde_json::to_string_pretty(&meta)
        .map_err(|e| Error::Format(format!("meta serialization: {e}")))?;
    std::fs::write(&meta_path, meta_json).map_err(|e| Error::io(&meta_path, e))?;

    let edges_path = dir.join("edges.bin");
    {
        let file = std::fs::File::create(&edges_path).map_err(|e| Error::io(&edges_path, e))?;
        let mut w = std::io::BufWriter::new(file);
        for &(u, v) in g.edges() {
            w.write_all(&u.to_le_bytes())
                .and_then(|_| w.write_all(&v.to_le_bytes()))
                .map_err(|e| Error::io(&edges_path, e))?;
        }
        w.flush().map_err(|e| Error::io(&edges_path, e))?;
    }

    let feat_path = dir.join("features.bin");
    {
        let file = std::fs::File::create(&feat_path).map_err(|e| Error::io(&feat_path, e))?;
        let mut w = std::io::BufWriter::new(file);
        for v in g.features() {
            w.write_all(&v.to_le_bytes()).map_err(|e| Error::io(&feat_path, e))?;
        }
        w.flush().map_err(|e| Error::io(&feat_path, e))?;
    }

    if let Some(labels) = g.labels() {
        let path = dir.join("labels.bin");
        let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = std::io::BufWriter::new(file);
        for l in labels {
            w.write_all(&l.to_le_bytes()).map_err(|e| Error::io(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    if let Some(masks) = g.split_masks() {
        let path = dir.join("splits.bin");
        let bytes: Vec<u8> = masks.iter().map(|m| m.to_u8()).collect();
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// text import
// ---------------------------------------------------------------------------

/// Converts a whitespace-separated edge list plus feature/label CSVs into
/// the binary dataset directory. Node count is the feature CSV row count;
/// edge endpoints must reference ids 0..n-1 (no remapping).
pub fn import_text(
    edge_list: &Path,
    feature_csv: &Path,
    labels_csv: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let feat_text =
        std::fs::read_to_string(feature_csv).map_err(|e| Error::io(feature_csv, e))?;
    let mut features: Vec<f32> = Vec::new();
    let mut feature_dim = 0usize;
    let mut num_rows = 0usize;
    for (idx, line) in feat_text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Vec<&str> = line.split(',').collect();
        if num_rows == 0 {
            feature_dim = row.len();
        } else if row.len() != feature_dim {
            return Err(Error::Format(format!(
                "ragged feature row {idx}: {} values, expected {feature_dim}",
                row.len()
            )));
        }
        for cell in row {
            let v: f32 = cell.trim().parse().map_err(|_| {
                Error::Format(format!(
                    "non-numeric value '{}' in feature row {idx}",
                    cell.trim()
                ))
            })?;
            features.push(v);
        }
        num_rows += 1;
    }
    if num_rows == 0 {
        return Err(Error::Format("feature CSV is empty".into()));
    }

    let edge_text = std::fs::read_to_string(edge_list).map_err(|e| Error::io(edge_list, e))?;
    let mut edges: Vec<(u32, u32)> = Vec::new();
    for (idx, line) in edge_text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let (Some(a), Some(b)) = (it.next(), it.next()) else {
            return Err(Error::Format(format!("edge line {idx} needs two node ids")));
        };
        if it.next().is_some() {
            return Err(Error::Format(format!("edge line {idx} has trailing fields")));
        }
        let u: u32 = a
            .parse()
            .map_err(|_| Error::Format(format!("non-integer node id '{a}' on edge line {idx}")))?;
        let v: u32 = b
            .parse()
            .map_err(|_| Error::Format(format!("non-integer node id '{b}' on edge line {idx}")))?;
        edges.push((u, v));
    }

    let labels = match labels_csv {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let mut ls = Vec::new();
            for (idx, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() {
                    continue;
                }
                let l: u32 = line.parse().map_err(|_| {
                    Error::Format(format!("non-integer label '{line}' at row {idx}"))
                })?;
                ls.push(l);
            }
            if ls.len() != num_rows {
                return Err(Error::Format(format!(
                    "labels CSV has {} rows but features have {num_rows}",
                    ls.len()
                )));
            }
            Some(ls)
        }
        None => None,
    };

    let g = Graph::build(num_rows, edges, features, feature_dim, labels, None)?;
    save_dataset(&g, out)
}

// ---------------------------------------------------------------------------
// edge splitting
// ---------------------------------------------------------------------------

/// Disjoint train/val/test edges plus sampled non-edges for val/test.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeSplit {
    pub train_edges: Vec<(u32, u32)>,
    pub val_edges: Vec<(u32, u32)>,
    pub test_edges: Vec<(u32, u32)>,
    pub val_neg: Vec<(u32, u32)>,
    pub test_neg: Vec<(u32, u32)>,
}

/// Splits edges by shuffling: train gets ⌊train_frac·m⌋, val ⌊val_frac·m⌋,
/// test the remainder. Negatives are rejection-sampled without replacement
/// against the full edge set. Deterministic per seed.
pub fn split_edges(g: &Graph, train_frac: f64, val_frac: f64, seed: u64) -> Result<EdgeSplit> {
    if !(0.0..1.0).contains(&train_frac)
        || !(0.0..1.0).contains(&val_frac)
        || train_frac <= 0.0
        || val_frac <= 0.0
        || train_frac + val_frac > 1.0
    {
        return Err(Error::InvalidArgument(format!(
            "split fractions must lie in (0,1) and sum to at most 1 (got {train_frac}, {val_frac})"
        )));
    }
    let m = g.num_edges();
    if m < 10 {
        return Err(Error::InvalidArgument(format!(
            "graph has {m} edges; at least 10 are required to split"
        )));
    }
    let n_train = (train_frac * m as f64).floor() as usize;
    let n_val = (val_frac * m as f64).floor() as usize;
    let n_test = m - n_train - n_val;
    if n_train == 0 || n_val == 0 || n_test == 0 {
        return Err(Error::InvalidArgument(format!(
            "split would leave an empty part (train {n_train}, val {n_val}, test {n_test})"
        )));
    }

    let mut rng = seeds::rng(seed);
    let mut shuffled = g.edges().to_vec();
    shuffled.shuffle(&mut rng);
    let train_edges = shuffled[..n_train].to_vec();
    let val_edges = shuffled[n_train..n_train + n_val].to_vec();
    let test_edges = shuffled[n_train + n_val..].to_vec();

    let negs = sample_non_edges(g.num_nodes(), g.edges(), n_val + n_test, &mut rng)?;
    let (val_neg, test_neg) = negs.split_at(n_val);

    Ok(EdgeSplit {
        train_edges,
        val_edges,
        test_edges,
        val_neg: val_neg.to_vec(),
        test_neg: test_neg.to_vec(),
    })
}

/// Uniform non-edges (canonical order, no self-loops), sampled without
/// replacement. Fails loudly when the non-edge space is too small.
pub fn sample_non_edges(
    num_nodes: usize,
    edges: &[(u32, u32)],
    count: usize,
    rng: &mut impl Rng,
) -> Result<Vec<(u32, u32)>> {
    let n = num_nodes;
    let total_pairs = n.saturating_mul(n.saturating_sub(1)) / 2;
    let non_edges = total_pairs.saturating_sub(edges.len());
    if count > non_edges {
        return Err(Error::InvalidArgument(format!(
            "cannot sample {count} negative edges: only {non_edges} non-edges exist"
        )));
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    let edge_set: HashSet<(u32, u32)> = edges.iter().copied().collect();

    // Dense graphs or large requests: enumerate and partially shuffle.
    if non_edges <= 4 * count || non_edges <= 10_000 {
        let mut pool: Vec<(u32, u32)> = Vec::with_capacity(non_edges);
        for u in 0..n as u32 {
            for v in (u + 1)..n as u32 {
                if !edge_set.contains(&(u, v)) {
                    pool.push((u, v));
                }
            }
        }
        // partial Fisher-Yates
        for i in 0..count {
            let j = rng.random_range(i..pool.len());
            pool.swap(i, j);
        }
        pool.truncate(count);
        return Ok(pool);
    }

    let mut picked: HashSet<(u32, u32)> = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let u = rng.random_range(0..n as u32);
        let v = rng.random_range(0..n as u32);
        if u == v {
            continue;
        }
        let e = if u < v { (u, v) } else { (v, u) };
        if edge_set.contains(&e) || !picked.insert(e) {
            continue;
        }
        out.push(e);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// edge split file
// ---------------------------------------------------------------------------

const SPLIT_MAGIC: &[u8; 8] = b"GCGRLSPL";

/// Persists an edge split next to the training outputs so evaluation can
/// reuse exactly the same partition.
pub fn save_edge_split(split: &EdgeSplit, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let werr = |e: std::io::Error| Error::io(path, e);
    w.write_all(SPLIT_MAGIC).map_err(werr)?;
    for part in [
        &split.train_edges,
        &split.val_edges,
        &split.test_edges,
        &split.val_neg,
        &split.test_neg,
    ] {
        w.write_all(&(part.len() as u64).to_le_bytes()).map_err(werr)?;
        for &(u, v) in part.iter() {
            w.write_all(&u.to_le_bytes()).map_err(werr)?;
            w.write_all(&v.to_le_bytes()).map_err(werr)?;
        }
    }
    w.flush().map_err(werr)
}

pub fn load_edge_split(path: &Path) -> Result<EdgeSplit> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = std::io::BufReader::new(file);
    let rerr = |e: std::io::Error| Error::io(path, e);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(rerr)?;
    if &magic != SPLIT_MAGIC {
        return Err(Error::Format(format!(
            "{} is not an edge split file",
            path.display()
        )));
    }
    let mut parts: Vec<Vec<(u32, u32)>> = Vec::with_capacity(5);
    for _ in 0..5 {
        let mut lb = [0u8; 8];
        r.read_exact(&mut lb).map_err(rerr)?;
        let len = u64::from_le_bytes(lb) as usize;
        let mut buf = vec![0u8; len * 8];
        r.read_exact(&mut buf).map_err(rerr)?;
        parts.push(
            buf.chunks_exact(8)
                .map(|b| {
                    (
                        u32::from_le_bytes([b[0], b[1], b[2], b[3]]),
                        u32::from_le_bytes([b[4], b[5], b[6], b[7]]),
                    )
                })
                .collect(),
        );
    }
    let mut it = parts.into_iter();
    Ok(EdgeSplit {
        train_edges: it.next().unwrap(),
        val_edges: it.next().unwrap(),
        test_edges: it.next().unwrap(),
        val_neg: it.next().unwrap(),
        test_neg: it.next().unwrap(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_graph(n: usize) -> Graph {
        let edges: Vec<(u32, u32)> = (0..n as u32 - 1).map(|i| (i, i + 1)).collect();
        Graph::build(n, edges, vec![1.0; n], 1, None, None).unwrap()
    }

    #[test]
    fn minimal_two_node_dataset_round_trips() {
        let g = Graph::build(2, vec![(0, 1)], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 3, None, None)
            .unwrap();
        assert_eq!(g.num_nodes(), 2);
        assert_eq!(g.num_edges(), 1);
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&g, dir.path()).unwrap();
        let back = load_graph(dir.path()).unwrap();
        assert_eq!(g, back);
        for (a, b) in g.features().iter().zip(back.features()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn out_of_range_endpoint_is_an_error() {
        let err = Graph::build(3, vec![(5, 1)], vec![0.0; 3], 1, None, None).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
        assert!(err.to_string().contains("out of range"));
    }

    #[test]
    fn duplicate_and_reversed_edges_collapse() {
        let g = Graph::build(3, vec![(0, 1), (1, 0), (0, 1), (2, 2)], vec![0.0; 3], 1, None, None)
            .unwrap();
        assert_eq!(g.num_edges(), 1);
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.neighbors(1), &[0]);
        assert_eq!(g.neighbors(2), &[] as &[u32]);
    }

    #[test]
    fn non_finite_feature_is_an_error() {
        let err = Graph::build(2, vec![(0, 1)], vec![1.0, f32::NAN], 1, None, None).unwrap_err();
        assert!(err.to_string().contains("non-finite"));
    }

    #[test]
    fn normalized_adjacency_single_node() {
        let g = Graph::build(1, Vec::<(u32, u32)>::new(), vec![0.5], 1, None, None).unwrap();
        let a = normalized_adjacency::<f64>(&g);
        assert_eq!(a.row_ptr, vec![0, 1]);
        assert_eq!(a.get(0, 0), 1.0);
    }

    #[test]
    fn normalized_adjacency_two_nodes_all_half() {
        let g = Graph::build(2, vec![(0, 1)], vec![0.0; 2], 1, None, None).unwrap();
        let a = normalized_adjacency::<f64>(&g);
        for i in 0..2 {
            for j in 0..2 {
                assert!((a.get(i, j) - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn normalized_adjacency_path_graph_value() {
        // derived by hand: deg~ = (2, 3, 2); entry (0,1) = 1/sqrt(2*3)
        let g = Graph::build(3, vec![(0, 1), (1, 2)], vec![0.0; 3], 1, None, None).unwrap();
        let a = normalized_adjacency::<f64>(&g);
        assert!((a.get(0, 1) - 1.0 / 6.0f64.sqrt()).abs() < 1e-9);
        assert!((a.get(0, 1) - 0.40825).abs() < 1e-5);
    }

    #[test]
    fn split_fractions_give_exact_counts() {
        let g = line_graph(101); // 100 edges
        let s = split_edges(&g, 0.85, 0.05, 1).unwrap();
        assert_eq!(s.train_edges.len(), 85);
        assert_eq!(s.val_edges.len(), 5);
        assert_eq!(s.test_edges.len(), 10);
        assert_eq!(s.val_neg.len(), 5);
        assert_eq!(s.test_neg.len(), 10);
    }

    #[test]
    fn split_is_seed_deterministic() {
        let g = line_graph(60);
        assert_eq!(split_edges(&g, 0.8, 0.1, 9).unwrap(), split_edges(&g, 0.8, 0.1, 9).unwrap());
        assert_ne!(split_edges(&g, 0.8, 0.1, 9).unwrap(), split_edges(&g, 0.8, 0.1, 10).unwrap());
    }

    #[test]
    fn complete_graph_cannot_sample_negatives() {
        // K5: 10 edges, zero non-edges
        let mut edges = Vec::new();
        for u in 0..5u32 {
            for v in (u + 1)..5 {
                edges.push((u, v));
            }
        }
        let g = Graph::build(5, edges, vec![0.0; 5], 1, None, None).unwrap();
        let err = split_edges(&g, 0.5, 0.2, 0).unwrap_err();
        assert!(err.to_string().contains("non-edges"), "{err}");
    }

    #[test]
    fn import_rejects_header_row_with_row_index() {
        let dir = tempfile::tempdir().unwrap();
        let edges = dir.path().join("e.txt");
        let feats = dir.path().join("f.csv");
        std::fs::write(&edges, "0 1\n").unwrap();
        std::fs::write(&feats, "f0,f1\n1.0,2.0\n0.5,0.25\n").unwrap();
        let err = import_text(&edges, &feats, None, &dir.path().join("out")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("non-numeric") && msg.contains("row 0"), "{msg}");
    }

    #[test]
    fn import_dedups_directed_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let edges = dir.path().join("e.txt");
        let feats = dir.path().join("f.csv");
        std::fs::write(&edges, "0 1\n1 0\n1 2\n").unwrap();
        std::fs::write(&feats, "1.0\n2.0\n3.0\n").unwrap();
        let out = dir.path().join("out");
        import_text(&edges, &feats, None, &out).unwrap();
        let g = load_graph(&out).unwrap();
        assert_eq!(g.num_edges(), 2);
    }

    #[test]
    fn import_three_line_edge_file() {
        let dir = tempfile::tempdir().unwrap();
        let edges = dir.path().join("e.txt");
        let feats = dir.path().join("f.csv");
        std::fs::write(&edges, "0 1\n1 2\n0 2\n").unwrap();
        std::fs::write(&feats, "1.0\n2.0\n3.0\n").unwrap();
        let out = dir.path().join("out");
        import_text(&edges, &feats, None, &out).unwrap();
        assert_eq!(load_graph(&out).unwrap().num_edges(), 3);
    }

    #[test]
    fn ragged_feature_rows_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let edges = dir.path().join("e.txt");
        let feats = dir.path().join("f.csv");
        std::fs::write(&edges, "0 1\n").unwrap();
        std::fs::write(&feats, "1.0,2.0\n3.0\n").unwrap();
        let err = import_text(&edges, &feats, None, &dir.path().join("out")).unwrap_err();
        assert!(err.to_string().contains("ragged"));
    }

    #[test]
    fn edge_split_file_round_trips() {
        let g = line_graph(40);
        let s = split_edges(&g, 0.7, 0.1, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("split.bin");
        save_edge_split(&s, &path).unwrap();
        assert_eq!(load_edge_split(&path).unwrap(), s);
    }
}
