//! Synthetic graph generators and small fixtures for tests, demos, and
//! benchmarking without external data.

use rand::Rng;

use crate::graphstore::Graph;
use crate::seeds;

/// Stochastic block model with class-correlated binary features.
///
/// Feature dimensions are assigned round-robin to blocks; a node switches
/// its own block's dimensions on with probability `feature_on` and foreign
/// dimensions with probability `feature_off`, giving a sparse bag-of-words
/// style matrix. Labels are the block ids.
#[derive(Clone, Debug)]
pub struct SbmSpec {
    pub block_sizes: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    pub feature_on: f64,
    pub feature_off: f64,
}

impl SbmSpec {
    pub fn balanced(num_blocks: usize, block_size: usize, feature_dim: usize) -> Self {
        SbmSpec {
            block_sizes: vec![block_size; num_blocks],
            p_in: 0.15,
            p_out: 0.01,
            feature_dim,
            feature_on: 0.35,
            feature_off: 0.03,
        }
    }
}

pub fn attributed_sbm(spec: &SbmSpec, seed: u64) -> Graph {
    let n: usize = spec.block_sizes.iter().sum();
    let k = spec.block_sizes.len();
    let mut labels = Vec::with_capacity(n);
    for (b, &size) in spec.block_sizes.iter().enumerate() {
        labels.extend(std::iter::repeat_n(b as u32, size));
    }

    let mut rng = seeds::rng(seeds::stream(seed, "sbm.edges"));
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if labels[u] == labels[v] { spec.p_in } else { spec.p_out };
            if rng.random_range(0.0..1.0) < p {
                edges.push((u as u32, v as u32));
            }
        }
    }

    let mut frng = seeds::rng(seeds::stream(seed, "sbm.features"));
    let mut features = vec![0.0f32; n * spec.feature_dim];
    for (i, &lab) in labels.iter().enumerate() {
        for d in 0..spec.feature_dim {
            let own = d % k == lab as usize;
            let p = if own { spec.feature_on } else { spec.feature_off };
            if frng.random_range(0.0..1.0) < p {
                features[i * spec.feature_dim + d] = 1.0;
            }
        }
    }

    Graph::build(n, edges, features, spec.feature_dim, Some(labels), None)
        .expect("generated SBM must validate")
}

/// Random dot-product graph: each node draws a latent vector and edges
/// appear with probability σ(bias + z_u·z_v). Features are uninformative
/// sparse noise, so link structure is only recoverable from the topology —
/// the regime where edge reconstruction earns its keep.
pub fn dot_product_graph(
    n: usize,
    latent_dim: usize,
    bias: f64,
    feature_dim: usize,
    seed: u64,
) -> Graph {
    let mut zrng = seeds::rng(seeds::stream(seed, "rdpg.latent"));
    let scale = (2.0 / latent_dim as f64).sqrt();
    let z: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..latent_dim).map(|_| zrng.random_range(-1.0..1.0) * scale * 1.7320508).collect())
        .collect();
    let mut erng = seeds::rng(seeds::stream(seed, "rdpg.edges"));
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let dot: f64 = z[u].iter().zip(&z[v]).map(|(a, b)| a * b).sum();
            let p = 1.0 / (1.0 + (-(bias + 4.0 * dot)).exp());
            if erng.random_range(0.0..1.0) < p {
                edges.push((u as u32, v as u32));
            }
        }
    }
    let mut frng = seeds::rng(seeds::stream(seed, "rdpg.features"));
    let mut features = vec![0.0f32; n * feature_dim];
    for f in features.iter_mut() {
        if frng.random_range(0.0..1.0) < 0.05 {
            *f = 1.0;
        }
    }
    Graph::build(n, edges, features, feature_dim, None, None).expect("generated graph must validate")
}

/// Random connected graph: a random spanning tree plus `extra_edges`
/// uniformly sampled additional edges (deduplicated).
pub fn random_connected_graph(n: usize, extra_edges: usize, seed: u64) -> Graph {
    assert!(n >= 2);
    let mut rng = seeds::rng(seed);
    let mut edges: Vec<(u32, u32)> = Vec::new();
    for v in 1..n as u32 {
        let u = rng.random_range(0..v);
        edges.push((u, v));
    }
    for _ in 0..extra_edges {
        let u = rng.random_range(0..n as u32);
        let v = rng.random_range(0..n as u32);
        if u != v {
            edges.push((u, v));
        }
    }
    Graph::build(n, edges, vec![1.0; n], 1, None, None).unwrap()
}

/// Two k-cliques joined by a single bridge edge.
pub fn two_cliques_with_bridge(k: usize) -> Graph {
    let mut edges = Vec::new();
    for base in [0u32, k as u32] {
        for i in 0..k as u32 {
            for j in (i + 1)..k as u32 {
                edges.push((base + i, base + j));
            }
        }
    }
    edges.push((k as u32 - 1, k as u32));
    Graph::build(2 * k, edges, vec![1.0; 2 * k], 1, None, None).unwrap()
}

/// Zachary's karate club (34 nodes, 78 edges) with the standard two-faction
/// labels and one-hot features.
pub fn karate_club() -> Graph {
    const EDGES: [(u32, u32); 78] = [
        (0, 1), (0, 2), (0, 3), (0, 4), (0, 5), (0, 6), (0, 7), (0, 8), (0, 10), (0, 11),
        (0, 12), (0, 13), (0, 17), (0, 19), (0, 21), (0, 31), (1, 2), (1, 3), (1, 7), (1, 13),
        (1, 17), (1, 19), (1, 21), (1, 30), (2, 3), (2, 7), (2, 8), (2, 9), (2, 13), (2, 27),
        (2, 28), (2, 32), (3, 7), (3, 12), (3, 13), (4, 6), (4, 10), (5, 6), (5, 10), (5, 16),
        (6, 16), (8, 30), (8, 32), (8, 33), (9, 33), (13, 33), (14, 32), (14, 33), (15, 32),
        (15, 33), (18, 32), (18, 33), (19, 33), (20, 32), (20, 33), (22, 32), (22, 33),
        (23, 25), (23, 27), (23, 29), (23, 32), (23, 33), (24, 25), (24, 27), (24, 31),
        (25, 31), (26, 29), (26, 33), (27, 33), (28, 31), (28, 33), (29, 32), (29, 33),
        (30, 32), (30, 33), (31, 32), (31, 33), (32, 33),
    ];
    const MR_HI: [usize; 17] = [0, 1, 2, 3, 4, 5, 6, 7, 8, 10, 11, 12, 13, 16, 17, 19, 21];
    let n = 34;
    let mut labels = vec![1u32; n];
    for &v in &MR_HI {
        labels[v] = 0;
    }
    let mut features = vec![0.0f32; n * n];
    for i in 0..n {
        features[i * n + i] = 1.0;
    }
    Graph::build(n, EDGES.to_vec(), features, n, Some(labels), None).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn karate_has_expected_size() {
        let g = karate_club();
        assert_eq!(g.num_nodes(), 34);
        assert_eq!(g.num_edges(), 78);
        assert_eq!(g.num_classes(), 2);
    }

    #[test]
    fn sbm_is_deterministic_and_labeled() {
        let spec = SbmSpec::balanced(3, 20, 12);
        let a = attributed_sbm(&spec, 5);
        let b = attributed_sbm(&spec, 5);
        assert_eq!(a, b);
        assert_eq!(a.num_nodes(), 60);
        assert_eq!(a.num_classes(), 3);
    }

    #[test]
    fn random_connected_graph_is_connected() {
        let g = random_connected_graph(17, 5, 9);
        // BFS from 0
        let mut seen = vec![false; 17];
        let mut queue = vec![0usize];
        seen[0] = true;
        while let Some(v) = queue.pop() {
            for &u in g.neighbors(v) {
                if !seen[u as usize] {
                    seen[u as usize] = true;
                    queue.push(u as usize);
                }
            }
        }
        assert!(seen.iter().all(|&s| s));
    }
}
