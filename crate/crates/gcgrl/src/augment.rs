//! Anchor and augmented view construction.
//!
//! Views never mutate feature matrices: masked nodes are recorded and the
//! trainer substitutes the learnable mask token during its forward pass so
//! gradients reach the token. Augmentations compose in a fixed order —
//! node dropping, then edge dropping, then feature-mask selection — because
//! node dropping renumbers the index space.

use rand::Rng;

use crate::error::Error;
use crate::graphstore::Graph;
use crate::seeds;
use crate::Result;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ViewKind {
    Anchor,
    Augmented,
}

/// A derived graph with its masked-node set (view coordinates) and the
/// mapping back to original node ids.
#[derive(Clone, Debug)]
pub struct View {
    pub graph: Graph,
    pub masked_nodes: Vec<u32>,
    pub node_map: Vec<u32>,
    pub kind: ViewKind,
}

impl View {
    /// Masked flags indexed by view node id.
    pub fn masked_flags(&self) -> Vec<bool> {
        let mut flags = vec![false; self.graph.num_nodes()];
        for &m in &self.masked_nodes {
            flags[m as usize] = true;
        }
        flags
    }
}

/// Per-view corruption rates for augmented views.
#[derive(Copy, Clone, Debug)]
pub struct AugmentConfig {
    pub k: usize,
    pub p_node: f64,
    pub p_edge: f64,
    pub r_feat: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            k: 2,
            p_node: 0.1,
            p_edge: 0.2,
            r_feat: 0.5,
        }
    }
}

/// Selects ⌈mask_ratio·n⌉ nodes to mask; topology and features untouched.
pub fn make_anchor(g: &Graph, mask_ratio: f64, seed: u64) -> Result<View> {
    if !(0.0..1.0).contains(&mask_ratio) || mask_ratio <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "anchor mask ratio must lie in (0,1), got {mask_ratio}"
        )));
    }
    let n = g.num_nodes();
    let count = (mask_ratio * n as f64).ceil() as usize;
    if count == 0 || count >= n {
        return Err(Error::InvalidArgument(format!(
            "anchor mask would cover {count} of {n} nodes; need at least one masked and one visible"
        )));
    }
    let mut rng = seeds::rng(seed);
    let masked = sample_mask(n, count, &mut rng);
    Ok(View {
        graph: g.clone(),
        masked_nodes: masked,
        node_map: (0..n as u32).collect(),
        kind: ViewKind::Anchor,
    })
}

/// Keeps each undirected edge independently with probability 1−p_drop.
pub fn drop_edges(g: &Graph, p_drop: f64, seed: u64) -> Result<Graph> {
    if !(0.0..1.0).contains(&p_drop) {
        return Err(Error::InvalidArgument(format!(
            "edge drop probability must lie in [0,1), got {p_drop}"
        )));
    }
    let mut rng = seeds::rng(seed);
    let kept: Vec<(u32, u32)> = g
        .edges()
        .iter()
        .copied()
        .filter(|_| rng.random_range(0.0..1.0) >= p_drop)
        .collect();
    Graph::build(
        g.num_nodes(),
        kept,
        g.features().to_vec(),
        g.feature_dim(),
        g.labels().map(|l| l.to_vec()),
        g.split_masks().map(|m| m.to_vec()),
    )
}

/// Drops each node independently with probability p_drop, removing incident
/// edges and densely renumbering survivors. Returns the survivor→original
/// id map.
pub fn drop_nodes(g: &Graph, p_drop: f64, seed: u64) -> Result<(Graph, Vec<u32>)> {
    if !(0.0..1.0).contains(&p_drop) {
        return Err(Error::InvalidArgument(format!(
            "node drop probability must lie in [0,1), got {p_drop}"
        )));
    }
    let n = g.num_nodes();
    let mut rng = seeds::rng(seed);
    let survives: Vec<bool> = (0..n).map(|_| rng.random_range(0.0..1.0) >= p_drop).collect();
    let node_map: Vec<u32> = (0..n as u32).filter(|&v| survives[v as usize]).collect();
    if node_map.is_empty() {
        return Err(Error::InvalidArgument("node dropping removed every node".into()));
    }
    let mut old_to_new = vec![u32::MAX; n];
    for (new, &old) in node_map.iter().enumerate() {
        old_to_new[old as usize] = new as u32;
    }
    let edges: Vec<(u32, u32)> = g
        .edges()
        .iter()
        .filter(|&&(u, v)| survives[u as usize] && survives[v as usize])
        .map(|&(u, v)| (old_to_new[u as usize], old_to_new[v as usize]))
        .collect();

    let d = g.feature_dim();
    let mut features = Vec::with_capacity(node_map.len() * d);
    for &old in &node_map {
        features.extend_from_slice(g.feature_row(old as usize));
    }
    let labels = g
        .labels()
        .map(|ls| node_map.iter().map(|&old| ls[old as usize]).collect());
    let splits = g
        .split_masks()
        .map(|ms| node_map.iter().map(|&old| ms[old as usize]).collect());
    let graph = Graph::build(node_map.len(), edges, features, d, labels, splits)?;
    Ok((graph, node_map))
}

/// Builds k augmented views, each applying node dropping, edge dropping,
/// and feature-mask selection with seeds derived from (seed, view index).
pub fn make_augmented_views(g: &Graph, cfg: &AugmentConfig, seed: u64) -> Result<Vec<View>> {
    if cfg.k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&cfg.r_feat) && cfg.r_feat != 0.0 {
        return Err(Error::InvalidArgument(format!(
            "feature mask ratio must lie in [0,1), got {}",
            cfg.r_feat
        )));
    }
    let mut views = Vec::with_capacity(cfg.k);
    for i in 0..cfg.k {
        let view_seed = seeds::substream(seed, i as u64);
        let (graph, node_map) = if cfg.p_node > 0.0 {
            drop_nodes(g, cfg.p_node, seeds::substream(view_seed, 0))?
        } else {
            (g.clone(), (0..g.num_nodes() as u32).collect())
        };
        let graph = if cfg.p_edge > 0.0 {
            drop_edges(&graph, cfg.p_edge, seeds::substream(view_seed, 1))?
        } else {
            graph
        };
        let n_view = graph.num_nodes();
        let count = (cfg.r_feat * n_view as f64).ceil() as usize;
        let masked = if count == 0 {
            Vec::new()
        } else {
            let mut rng = seeds::rng(seeds::substream(view_seed, 2));
            sample_mask(n_view, count.min(n_view), &mut rng)
        };
        views.push(View {
            graph,
            masked_nodes: masked,
            node_map,
            kind: ViewKind::Augmented,
        });
    }
    Ok(views)
}

fn sample_mask(n: usize, count: usize, rng: &mut impl Rng) -> Vec<u32> {
    let mut ids: Vec<u32> = (0..n as u32).collect();
    for i in 0..count {
        let j = rng.random_range(i..n);
        ids.swap(i, j);
    }
    ids.truncate(count);
    ids.sort_unstable();
    ids
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_graph(n: usize) -> Graph {
        let edges: Vec<(u32, u32)> = (0..n as u32 - 1).map(|i| (i, i + 1)).collect();
        let features: Vec<f32> = (0..n * 2).map(|i| i as f32).collect();
        Graph::build(n, edges, features, 2, None, None).unwrap()
    }

    #[test]
    fn anchor_masks_exact_count() {
        let g = grid_graph(10);
        let v = make_anchor(&g, 0.5, 1).unwrap();
        assert_eq!(v.masked_nodes.len(), 5);
        assert_eq!(v.kind, ViewKind::Anchor);
        assert_eq!(v.node_map, (0..10).collect::<Vec<u32>>());
        // features are untouched (substitution is deferred to the trainer)
        for (a, b) in g.features().iter().zip(v.graph.features()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn anchor_rejects_full_mask() {
        let g = grid_graph(2);
        assert!(make_anchor(&g, 0.99, 0).is_err());
    }

    #[test]
    fn anchor_is_seed_deterministic() {
        let g = grid_graph(20);
        assert_eq!(
            make_anchor(&g, 0.3, 9).unwrap().masked_nodes,
            make_anchor(&g, 0.3, 9).unwrap().masked_nodes
        );
        assert_ne!(
            make_anchor(&g, 0.3, 9).unwrap().masked_nodes,
            make_anchor(&g, 0.3, 10).unwrap().masked_nodes
        );
    }

    #[test]
    fn drop_edges_zero_is_identity() {
        let g = grid_graph(8);
        let d = drop_edges(&g, 0.0, 3).unwrap();
        assert_eq!(g.edges(), d.edges());
    }

    #[test]
    fn drop_all_but_guaranteed_valid_on_one_edge() {
        let g = grid_graph(2);
        // some seed will drop the single edge; graph must stay valid
        for seed in 0..20 {
            let d = drop_edges(&g, 0.9, seed).unwrap();
            assert_eq!(d.num_nodes(), 2);
            assert!(d.num_edges() <= 1);
        }
    }

    #[test]
    fn drop_nodes_zero_is_identity_mapping() {
        let g = grid_graph(6);
        let (d, map) = drop_nodes(&g, 0.0, 1).unwrap();
        assert_eq!(map, (0..6).collect::<Vec<u32>>());
        assert_eq!(d.num_edges(), g.num_edges());
    }

    #[test]
    fn drop_node_from_triangle() {
        let g = Graph::build(
            3,
            vec![(0, 1), (1, 2), (0, 2)],
            vec![0.0, 1.0, 2.0],
            1,
            None,
            None,
        )
        .unwrap();
        // find a seed that drops exactly node 2
        for seed in 0..200 {
            let (d, map) = drop_nodes(&g, 0.3, seed).unwrap();
            if map == vec![0, 1] {
                assert_eq!(d.num_nodes(), 2);
                assert_eq!(d.num_edges(), 1);
                assert_eq!(d.feature_row(0), &[0.0]);
                assert_eq!(d.feature_row(1), &[1.0]);
                return;
            }
        }
        panic!("no seed dropped exactly node 2");
    }

    #[test]
    fn star_without_center_is_isolated() {
        let g = Graph::build(
            6,
            vec![(0, 1), (0, 2), (0, 3), (0, 4), (0, 5)],
            vec![0.0; 6],
            1,
            None,
            None,
        )
        .unwrap();
        for seed in 0..500 {
            let (d, map) = drop_nodes(&g, 0.2, seed).unwrap();
            if !map.contains(&0) && map.len() == 5 {
                assert_eq!(d.num_edges(), 0);
                return;
            }
        }
        panic!("no seed dropped exactly the hub");
    }

    #[test]
    fn identity_config_reproduces_graph() {
        let g = grid_graph(12);
        let cfg = AugmentConfig {
            k: 3,
            p_node: 0.0,
            p_edge: 0.0,
            r_feat: 0.0,
        };
        let views = make_augmented_views(&g, &cfg, 5).unwrap();
        assert_eq!(views.len(), 3);
        for v in views {
            assert_eq!(v.graph, g);
            assert!(v.masked_nodes.is_empty());
            assert_eq!(v.kind, ViewKind::Augmented);
        }
    }

    #[test]
    fn views_are_deterministic_and_mapped() {
        let g = grid_graph(30);
        let cfg = AugmentConfig::default();
        let a = make_augmented_views(&g, &cfg, 11).unwrap();
        let b = make_augmented_views(&g, &cfg, 11).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.graph, y.graph);
            assert_eq!(x.masked_nodes, y.masked_nodes);
            assert_eq!(x.node_map, y.node_map);
        }
        // node_map composition: view features equal original features
        for v in &a {
            for (vi, &orig) in v.node_map.iter().enumerate() {
                assert_eq!(v.graph.feature_row(vi), g.feature_row(orig as usize));
            }
        }
    }
}
