//! Louvain modularity maximization and community-aware contrastive pair
//! sampling.
//!
//! Louvain runs greedy local moves to a modularity optimum, aggregates the
//! graph, and repeats until no move improves. Node visit order is shuffled
//! per pass from the seed; candidate communities are scanned in ascending id
//! so ties resolve to the lowest id. Every accepted move strictly increases
//! (resolution-scaled) modularity, which bounds the run.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::Error;
use crate::graphstore::Graph;
use crate::seeds;
use crate::Result;

/// Node→community assignment with its (resolution-1) modularity.
#[derive(Clone, Debug)]
pub struct Partition {
    pub assignment: Vec<u32>,
    pub num_communities: usize,
    pub modularity: f64,
}

impl Partition {
    /// Members of each community, ids ascending.
    pub fn communities(&self) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); self.num_communities];
        for (node, &c) in self.assignment.iter().enumerate() {
            out[c as usize].push(node as u32);
        }
        out
    }
}

/// Anchors with their sampled positive and negative partners.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairSet {
    pub anchors: Vec<u32>,
    pub positives: Vec<Vec<u32>>,
    pub negatives: Vec<Vec<u32>>,
}

impl PairSet {
    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }
}

/// Q = Σ_c [ e_c/m − (deg_c/2m)² ] over the given assignment.
pub fn modularity(g: &Graph, assignment: &[u32]) -> Result<f64> {
    if g.num_edges() == 0 {
        return Err(Error::InvalidArgument(
            "modularity is undefined on a graph with zero edges".into(),
        ));
    }
    if assignment.len() != g.num_nodes() {
        return Err(Error::InvalidArgument(format!(
            "assignment covers {} nodes, graph has {}",
            assignment.len(),
            g.num_nodes()
        )));
    }
    Ok(modularity_resolution(g, assignment, 1.0))
}

fn modularity_resolution(g: &Graph, assignment: &[u32], resolution: f64) -> f64 {
    let m = g.num_edges() as f64;
    let max_c = assignment.iter().copied().max().unwrap_or(0) as usize + 1;
    let mut intra = vec![0.0f64; max_c];
    let mut deg = vec![0.0f64; max_c];
    for &(u, v) in g.edges() {
        if assignment[u as usize] == assignment[v as usize] {
            intra[assignment[u as usize] as usize] += 1.0;
        }
    }
    for v in 0..g.num_nodes() {
        deg[assignment[v] as usize] += g.degree(v) as f64;
    }
    let mut q = 0.0;
    for c in 0..max_c {
        q += intra[c] / m - resolution * (deg[c] / (2.0 * m)).powi(2);
    }
    q
}

/// Weighted multigraph for one aggregation level. `self_loop[u]` holds the
/// collapsed intra-community weight (edges counted once); a node's degree is
/// the sum of incident weights plus twice its self-loop.
struct LevelGraph {
    n: usize,
    adj: Vec<Vec<(u32, f64)>>,
    self_loop: Vec<f64>,
    total_weight: f64,
}

impl LevelGraph {
    fn from_graph(g: &Graph) -> Self {
        let n = g.num_nodes();
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in g.edges() {
            adj[u as usize].push((v, 1.0));
            adj[v as usize].push((u, 1.0));
        }
        for a in &mut adj {
            a.sort_unstable_by_key(|&(j, _)| j);
        }
        LevelGraph {
            n,
            adj,
            self_loop: vec![0.0; n],
            total_weight: g.num_edges() as f64,
        }
    }

    fn degree(&self, u: usize) -> f64 {
        self.adj[u].iter().map(|&(_, w)| w).sum::<f64>() + 2.0 * self.self_loop[u]
    }

    fn aggregate(&self, comm: &[u32]) -> (LevelGraph, Vec<u32>) {
        // dense renumbering in ascending community-id order
        let mut ids: Vec<u32> = comm.to_vec();
        ids.sort_unstable();
        ids.dedup();
        let mut renumber = vec![u32::MAX; *ids.last().unwrap() as usize + 1];
        for (new, &old) in ids.iter().enumerate() {
            renumber[old as usize] = new as u32;
        }
        let nc = ids.len();

        let mut self_loop = vec![0.0f64; nc];
        let mut pair_weight: std::collections::BTreeMap<(u32, u32), f64> =
            std::collections::BTreeMap::new();
        for u in 0..self.n {
            let cu = renumber[comm[u] as usize];
            self_loop[cu as usize] += self.self_loop[u];
            for &(v, w) in &self.adj[u] {
                let cv = renumber[comm[v as usize] as usize];
                if cu == cv {
                    if u <= v as usize {
                        self_loop[cu as usize] += w;
                    }
                } else if cu < cv {
                    *pair_weight.entry((cu, cv)).or_insert(0.0) += w;
                }
            }
        }
        let mut adj = vec![Vec::new(); nc];
        for (&(a, b), &w) in &pair_weight {
            adj[a as usize].push((b, w));
            adj[b as usize].push((a, w));
        }
        for a in &mut adj {
            a.sort_unstable_by_key(|&(j, _)| j);
        }
        (
            LevelGraph {
                n: nc,
                adj,
                self_loop,
                total_weight: self.total_weight,
            },
            comm.iter().map(|&c| renumber[c as usize]).collect(),
        )
    }
}

/// One sweep of local moves until a pass makes no move. Returns whether any
/// move happened; invokes `after_pass` with the assignment after each pass.
fn local_moves(
    level: &LevelGraph,
    comm: &mut [u32],
    resolution: f64,
    rng: &mut impl Rng,
    mut after_pass: impl FnMut(&[u32]),
) -> bool {
    let m = level.total_weight;
    let two_m_sq = 2.0 * m * m;
    let mut comm_tot = vec![0.0f64; level.n];
    let mut comm_size = vec![0usize; level.n];
    for u in 0..level.n {
        comm_tot[comm[u] as usize] += level.degree(u);
        comm_size[comm[u] as usize] += 1;
    }
    let mut order: Vec<usize> = (0..level.n).collect();
    let mut moved_any = false;
    loop {
        order.shuffle(rng);
        let mut moves = 0usize;
        for &u in &order {
            let k_u = level.degree(u);
            let cur = comm[u];
            // weight from u into each neighboring community, ascending id
            let mut links: Vec<(u32, f64)> = Vec::with_capacity(level.adj[u].len());
            for &(v, w) in &level.adj[u] {
                let c = comm[v as usize];
                match links.binary_search_by_key(&c, |&(ci, _)| ci) {
                    Ok(i) => links[i].1 += w,
                    Err(i) => links.insert(i, (c, w)),
                }
            }
            comm_tot[cur as usize] -= k_u;
            let w_cur = links
                .binary_search_by_key(&cur, |&(ci, _)| ci)
                .map(|i| links[i].1)
                .unwrap_or(0.0);
            let gain_stay = w_cur / m - resolution * comm_tot[cur as usize] * k_u / two_m_sq;
            let mut best = cur;
            let mut best_gain = gain_stay;
            // escaping into a fresh singleton community has gain 0; a free
            // id exists whenever u's community is not already a singleton
            if comm_size[cur as usize] > 1 && 0.0 > best_gain + 1e-12 {
                if let Some(free) = comm_size.iter().position(|&s| s == 0) {
                    best = free as u32;
                    best_gain = 0.0;
                }
            }
            for &(c, w) in &links {
                if c == cur {
                    continue;
                }
                let gain = w / m - resolution * comm_tot[c as usize] * k_u / two_m_sq;
                // strict improvement; ascending scan makes ties resolve to
                // the lowest community id
                if gain > best_gain + 1e-12 {
                    best_gain = gain;
                    best = c;
                }
            }
            comm_tot[best as usize] += k_u;
            if best != cur {
                comm[u] = best;
                comm_size[cur as usize] -= 1;
                comm_size[best as usize] += 1;
                moves += 1;
                moved_any = true;
            }
        }
        after_pass(comm);
        if moves == 0 {
            break;
        }
    }
    moved_any
}

/// Greedy moves are order-dependent; each invocation runs this many
/// shuffled starts and keeps the best-modularity result.
const LOUVAIN_STARTS: usize = 12;

/// Louvain community detection. Deterministic for a fixed seed.
pub fn louvain(g: &Graph, resolution: f64, seed: u64) -> Result<Partition> {
    Ok(louvain_multi(g, resolution, seed, false)?.0)
}

/// As [`louvain`], additionally returning the (resolution-scaled) modularity
/// of the induced original-graph partition after every local-move pass of
/// the winning start.
pub fn louvain_with_trace(g: &Graph, resolution: f64, seed: u64) -> Result<(Partition, Vec<f64>)> {
    let (p, trace) = louvain_multi(g, resolution, seed, true)?;
    Ok((p, trace.unwrap_or_default()))
}

fn louvain_multi(
    g: &Graph,
    resolution: f64,
    seed: u64,
    want_trace: bool,
) -> Result<(Partition, Option<Vec<f64>>)> {
    if g.num_edges() == 0 {
        return Err(Error::InvalidArgument(
            "louvain requires at least one edge".into(),
        ));
    }
    if resolution <= 0.0 {
        return Err(Error::InvalidArgument("resolution must be positive".into()));
    }
    let mut best: Option<(Partition, Option<Vec<f64>>)> = None;
    for s in 0..LOUVAIN_STARTS {
        let mut trace = if want_trace { Some(Vec::new()) } else { None };
        let p = louvain_single(g, resolution, seeds::substream(seed, s as u64), trace.as_mut())?;
        if best
            .as_ref()
            .is_none_or(|(b, _)| p.modularity > b.modularity + 1e-12)
        {
            best = Some((p, trace));
        }
    }
    Ok(best.expect("at least one start"))
}

fn louvain_single(
    g: &Graph,
    resolution: f64,
    seed: u64,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<Partition> {
    let mut rng = seeds::rng(seed);
    let mut level = LevelGraph::from_graph(g);
    // original node -> current level node
    let mut orig_to_level: Vec<u32> = (0..g.num_nodes() as u32).collect();

    loop {
        let mut comm: Vec<u32> = (0..level.n as u32).collect();
        let moved = {
            let orig_to_level_ref = &orig_to_level;
            let trace_ref = &mut trace;
            local_moves(&level, &mut comm, resolution, &mut rng, |assign| {
                if let Some(t) = trace_ref {
                    let induced: Vec<u32> = orig_to_level_ref
                        .iter()
                        .map(|&ln| assign[ln as usize])
                        .collect();
                    t.push(modularity_resolution(g, &induced, resolution));
                }
            })
        };
        if !moved {
            break;
        }
        let (next, renumbered) = level.aggregate(&comm);
        for ln in orig_to_level.iter_mut() {
            *ln = renumbered[*ln as usize];
        }
        if next.n == level.n {
            break;
        }
        level = next;
    }

    // refinement sweep at the finest level: aggregation can leave profitable
    // single-node moves on the original graph, so run local moves once more
    // from the found partition until none improves
    let mut assignment = orig_to_level;
    {
        let base = LevelGraph::from_graph(g);
        let trace_ref = &mut trace;
        local_moves(&base, &mut assignment, resolution, &mut rng, |assign| {
            if let Some(t) = trace_ref {
                t.push(modularity_resolution(g, assign, resolution));
            }
        });
        // re-densify community ids
        let mut ids: Vec<u32> = assignment.clone();
        ids.sort_unstable();
        ids.dedup();
        let mut renumber = vec![u32::MAX; *ids.last().unwrap() as usize + 1];
        for (new, &old) in ids.iter().enumerate() {
            renumber[old as usize] = new as u32;
        }
        for a in assignment.iter_mut() {
            *a = renumber[*a as usize];
        }
    }

    let num_communities = assignment.iter().copied().max().unwrap_or(0) as usize + 1;
    let q = modularity(g, &assignment)?;
    Ok(Partition {
        assignment,
        num_communities,
        modularity: q,
    })
}

/// Samples anchors and their positive/negative partners from a partition.
///
/// Anchors are ⌈rho·n⌉ nodes drawn without replacement from nodes whose
/// community has at least two members (fewer if the eligible pool is
/// smaller). Positives come from the anchor's community (anchor excluded),
/// negatives from everything else; either list falls back to sampling with
/// replacement only when its pool is smaller than requested.
pub fn sample_pairs(
    p: &Partition,
    rho: f64,
    n_pos: usize,
    n_neg: usize,
    seed: u64,
) -> Result<PairSet> {
    if p.num_communities < 2 {
        return Err(Error::InvalidArgument(
            "pair sampling needs at least two communities (no negatives exist)".into(),
        ));
    }
    if !(0.0..=1.0).contains(&rho) || rho <= 0.0 {
        return Err(Error::InvalidArgument(format!("rho must lie in (0,1], got {rho}")));
    }
    if n_pos == 0 {
        return Err(Error::InvalidArgument("n_pos must be positive (empty positive set)".into()));
    }
    if n_neg == 0 {
        return Err(Error::InvalidArgument("n_neg must be positive (empty negative set)".into()));
    }
    let n = p.assignment.len();
    let members = p.communities();
    let mut rng = seeds::rng(seed);

    let mut eligible: Vec<u32> = (0..n as u32)
        .filter(|&v| members[p.assignment[v as usize] as usize].len() >= 2)
        .collect();
    if eligible.is_empty() {
        return Err(Error::InvalidArgument(
            "no community has two members; cannot sample positive pairs".into(),
        ));
    }
    let target = ((rho * n as f64).ceil() as usize).max(1).min(eligible.len());
    for i in 0..target {
        let j = rng.random_range(i..eligible.len());
        eligible.swap(i, j);
    }
    let anchors: Vec<u32> = eligible[..target].to_vec();

    let mut positives = Vec::with_capacity(anchors.len());
    let mut negatives = Vec::with_capacity(anchors.len());
    for &a in &anchors {
        let ca = p.assignment[a as usize] as usize;
        let pos_pool: Vec<u32> = members[ca].iter().copied().filter(|&v| v != a).collect();
        positives.push(draw(&pos_pool, n_pos, &mut rng));
        let neg_pool: Vec<u32> = (0..n as u32)
            .filter(|&v| p.assignment[v as usize] as usize != ca)
            .collect();
        negatives.push(draw(&neg_pool, n_neg, &mut rng));
    }
    Ok(PairSet {
        anchors,
        positives,
        negatives,
    })
}

/// k draws from the pool: without replacement when it is large enough,
/// with replacement otherwise.
fn draw(pool: &[u32], k: usize, rng: &mut impl Rng) -> Vec<u32> {
    if pool.len() >= k {
        if k * 2 < pool.len() {
            let mut seen = HashSet::with_capacity(k);
            let mut out = Vec::with_capacity(k);
            while out.len() < k {
                let v = pool[rng.random_range(0..pool.len())];
                if seen.insert(v) {
                    out.push(v);
                }
            }
            out
        } else {
            let mut copy = pool.to_vec();
            for i in 0..k {
                let j = rng.random_range(i..copy.len());
                copy.swap(i, j);
            }
            copy.truncate(k);
            copy
        }
    } else {
        (0..k).map(|_| pool[rng.random_range(0..pool.len())]).collect()
    }
}
