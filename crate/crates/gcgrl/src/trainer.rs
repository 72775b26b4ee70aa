//! Pretraining loop: view construction, forward passes with mask
//! substitution and re-masking, loss assembly, optimization, checkpointing,
//! and embedding export.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::augment::{make_anchor, make_augmented_views, View};
use crate::community::{self, Partition};
use crate::config::TrainConfig;
use crate::error::Error;
use crate::graphstore::{self, Graph};
use crate::objective;
use crate::seeds;
use crate::tensornet::checkpoint as ckpt_io;
use crate::tensornet::ops::{HeadReduce, RowSelect};
use crate::tensornet::{
    adam_step, gat_layer, gcn_layer, mlp, Activation, ArchConfig, GatLayerParams, LayerType,
    ModelParams, NodeId, Scalar, SparseFeatures, SparseMatrix, Tape,
};
use crate::tensornet::{AdjList, Gradients};
use crate::Result;

/// One row of the loss history CSV.
#[derive(Copy, Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossRow {
    pub epoch: usize,
    pub node_frl: f64,
    pub node_cl: f64,
    pub graph_rl: f64,
    pub edge_rl: f64,
    pub total: f64,
}

/// Trained model snapshot plus everything needed to reuse it.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub params: ModelParams<f32>,
    pub config: TrainConfig,
    pub epoch: usize,
    pub final_losses: LossRow,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct CheckpointExtra {
    config: TrainConfig,
    epoch: usize,
    final_losses: LossRow,
    adam_t: u64,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let extra = serde_json::to_string(&CheckpointExtra {
            config: self.config.clone(),
            epoch: self.epoch,
            final_losses: self.final_losses,
            adam_t: self.params.adam_t,
        })
        .map_err(|e| Error::Format(format!("checkpoint header: {e}")))?;
        let p = &self.params;
        let blobs = (0..p.len()).flat_map(move |i| {
            let (m, v) = p.moments_at(i);
            [
                (p.name(i).to_string(), p.tensor_at(i).clone()),
                (format!("adam.m.{}", p.name(i)), m.clone()),
                (format!("adam.v.{}", p.name(i)), v.clone()),
            ]
        });
        ckpt_io::write_checkpoint(path, &p.arch, &extra, blobs, p.len() * 3)
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let file = ckpt_io::read_checkpoint(path)?;
        let extra: CheckpointExtra = serde_json::from_str(&file.extra_json)
            .map_err(|e| Error::Format(format!("checkpoint header: {e}")))?;
        let mut params: ModelParams<f32> = ModelParams::init(&file.arch, 0);
        let mut by_name: HashMap<String, crate::tensornet::Tensor<f32>> =
            file.blobs.into_iter().collect();
        for i in 0..params.len() {
            let name = params.name(i).to_string();
            let t = by_name
                .remove(&name)
                .ok_or_else(|| Error::Format(format!("checkpoint is missing tensor '{name}'")))?;
            if t.shape() != params.tensor_at(i).shape() {
                return Err(Error::Format(format!(
                    "checkpoint tensor '{name}' has shape {:?}, expected {:?}",
                    t.shape(),
                    params.tensor_at(i).shape()
                )));
            }
            params.set_tensor(&name, t);
            let m = by_name.remove(&format!("adam.m.{name}"));
            let v = by_name.remove(&format!("adam.v.{name}"));
            if let (Some(m), Some(v)) = (m, v) {
                params.set_moments(i, m, v);
            }
        }
        params.adam_t = extra.adam_t;
        Ok(Checkpoint {
            params,
            config: extra.config,
            epoch: extra.epoch,
            final_losses: extra.final_losses,
        })
    }
}

pub struct TrainOutput {
    pub checkpoint: Checkpoint,
    pub history: Vec<LossRow>,
}

/// Uniform non-edges with no collisions against existing edges and no
/// self-loops; deterministic per seed.
pub fn sample_negative_edges(g: &Graph, count: usize, seed: u64) -> Result<Vec<(u32, u32)>> {
    let mut rng = seeds::rng(seed);
    graphstore::sample_non_edges(g.num_nodes(), g.edges(), count, &mut rng)
}

/// Writes the loss history CSV (epoch, nodeFRL, nodeCL, graphRL, edgeRL,
/// total).
pub fn write_loss_csv(rows: &[LossRow], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let werr = |e: std::io::Error| Error::io(path, e);
    writeln!(w, "epoch,nodeFRL,nodeCL,graphRL,edgeRL,total").map_err(werr)?;
    for r in rows {
        writeln!(
            w,
            "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            r.epoch, r.node_frl, r.node_cl, r.graph_rl, r.edge_rl, r.total
        )
        .map_err(werr)?;
    }
    w.flush().map_err(werr)
}

// ---------------------------------------------------------------------------
// network assembly
// ---------------------------------------------------------------------------

/// Parameter leaves on the current tape, looked up by name.
struct Net {
    by_name: HashMap<String, NodeId>,
    ids: Vec<NodeId>,
}

impl Net {
    fn place<T: Scalar>(tape: &mut Tape<T>, params: &ModelParams<T>) -> Net {
        let mut by_name = HashMap::with_capacity(params.len());
        let mut ids = Vec::with_capacity(params.len());
        for i in 0..params.len() {
            let id = tape.leaf(params.tensor_at(i).clone());
            by_name.insert(params.name(i).to_string(), id);
            ids.push(id);
        }
        Net { by_name, ids }
    }

    fn from_ids<T: Scalar>(params: &ModelParams<T>, ids: &[NodeId]) -> Net {
        assert_eq!(ids.len(), params.len(), "leaf ids must match parameter order");
        let by_name = (0..params.len())
            .map(|i| (params.name(i).to_string(), ids[i]))
            .collect();
        Net {
            by_name,
            ids: ids.to_vec(),
        }
    }

    fn node(&self, name: &str) -> NodeId {
        *self
            .by_name
            .get(name)
            .unwrap_or_else(|| panic!("no parameter node '{name}'"))
    }
}

/// Per-view topology in the representation the layer type needs.
enum Topology<T> {
    Gat(Arc<AdjList>),
    Gcn(Arc<SparseMatrix<T>>),
    Mlp,
}

impl<T: Scalar> Topology<T> {
    fn for_graph(g: &Graph, kind: LayerType) -> Topology<T> {
        match kind {
            LayerType::Gat => Topology::Gat(Arc::new(AdjList::from_sorted_neighbors(
                g.num_nodes(),
                |v| g.neighbors(v),
            ))),
            LayerType::Gcn => Topology::Gcn(Arc::new(graphstore::normalized_adjacency(g))),
            LayerType::Mlp => Topology::Mlp,
        }
    }
}

/// Dropout masks drawn lazily from a dedicated stream; `None` in eval mode.
struct DropoutState<'r> {
    rng: Option<&'r mut ChaCha12Rng>,
    dropout: f64,
    attn_dropout: f64,
}

impl<'r> DropoutState<'r> {
    fn disabled() -> DropoutState<'static> {
        DropoutState {
            rng: None,
            dropout: 0.0,
            attn_dropout: 0.0,
        }
    }

    fn feature_mask<T: Scalar>(&mut self, len: usize) -> Option<Arc<Vec<T>>> {
        let rng = self.rng.as_deref_mut()?;
        if self.dropout <= 0.0 {
            return None;
        }
        let keep = 1.0 / (1.0 - self.dropout);
        Some(Arc::new(
            (0..len)
                .map(|_| {
                    if rng.random_range(0.0..1.0) < self.dropout {
                        T::zero()
                    } else {
                        T::from_f64(keep)
                    }
                })
                .collect(),
        ))
    }

    fn attn_mask<T: Scalar>(&mut self, len: usize) -> Option<Arc<Vec<T>>> {
        let rng = self.rng.as_deref_mut()?;
        if self.attn_dropout <= 0.0 {
            return None;
        }
        let keep = 1.0 / (1.0 - self.attn_dropout);
        Some(Arc::new(
            (0..len)
                .map(|_| {
                    if rng.random_range(0.0..1.0) < self.attn_dropout {
                        T::zero()
                    } else {
                        T::from_f64(keep)
                    }
                })
                .collect(),
        ))
    }
}

/// Shared encoder: first layer substitutes the learnable x-token into masked
/// feature rows, later layers run on the dense hidden state.
#[allow(clippy::too_many_arguments)]
fn encode<T: Scalar>(
    tape: &mut Tape<T>,
    net: &Net,
    arch: &ArchConfig,
    feats: &Arc<SparseFeatures<T>>,
    sel: Arc<RowSelect>,
    topo: &Topology<T>,
    drop: &mut DropoutState<'_>,
) -> Result<NodeId> {
    let heads = arch.effective_heads();
    let mut h: Option<NodeId> = None;
    for l in 0..arch.num_layers {
        let prefix = format!("enc.{l}");
        let act = Activation::Prelu(net.node(&format!("{prefix}.prelu")));
        let w = net.node(&format!("{prefix}.w"));
        let bias = net.node(&format!("{prefix}.bias"));
        let next = if l == 0 {
            let hw = tape.feature_matmul(feats.clone(), sel.clone(), net.node("mask.x"), w);
            match topo {
                Topology::Gat(adj) => {
                    let mask = drop.attn_mask(adj.nnz() * heads);
                    let att = tape.gat_attend(
                        adj.clone(),
                        hw,
                        net.node(&format!("{prefix}.a_src")),
                        net.node(&format!("{prefix}.a_dst")),
                        heads,
                        HeadReduce::Concat,
                        mask,
                    );
                    let b = tape.add_bias(att, bias);
                    crate::tensornet::layers::apply_activation(tape, b, act)
                }
                Topology::Gcn(adj) => {
                    let agg = tape.spmm(adj.clone(), hw);
                    let b = tape.add_bias(agg, bias);
                    crate::tensornet::layers::apply_activation(tape, b, act)
                }
                Topology::Mlp => {
                    let b = tape.add_bias(hw, bias);
                    crate::tensornet::layers::apply_activation(tape, b, act)
                }
            }
        } else {
            let mut input = h.unwrap();
            if let Some(mask) = drop.feature_mask(tape.value(input).len()) {
                input = tape.dropout(input, mask);
            }
            match topo {
                Topology::Gat(adj) => {
                    let p = GatLayerParams {
                        w,
                        a_src: net.node(&format!("{prefix}.a_src")),
                        a_dst: net.node(&format!("{prefix}.a_dst")),
                        bias,
                    };
                    let mask = drop.attn_mask(adj.nnz() * heads);
                    gat_layer(tape, adj, input, &p, heads, HeadReduce::Concat, act, mask)?
                }
                Topology::Gcn(adj) => gcn_layer(tape, adj, input, w, bias, act)?,
                Topology::Mlp => mlp(tape, input, &[(w, bias, act)])?,
            }
        };
        h = Some(next);
    }
    Ok(h.expect("at least one encoder layer"))
}

/// Feature decoder without the projector; its output is both the projector
/// input (anchor) and the pooling input (graph embeddings).
fn decode<T: Scalar>(
    tape: &mut Tape<T>,
    net: &Net,
    arch: &ArchConfig,
    h: NodeId,
    topo: &Topology<T>,
    drop: &mut DropoutState<'_>,
) -> Result<NodeId> {
    let heads = arch.effective_heads();
    let act = Activation::Prelu(net.node("dec.prelu"));
    let w = net.node("dec.w");
    let bias = net.node("dec.bias");
    let mut input = h;
    if let Some(mask) = drop.feature_mask(tape.value(input).len()) {
        input = tape.dropout(input, mask);
    }
    match topo {
        Topology::Gat(adj) => {
            let p = GatLayerParams {
                w,
                a_src: net.node("dec.a_src"),
                a_dst: net.node("dec.a_dst"),
                bias,
            };
            let mask = drop.attn_mask(adj.nnz() * heads);
            gat_layer(tape, adj, input, &p, heads, HeadReduce::Concat, act, mask)
        }
        Topology::Gcn(adj) => gcn_layer(tape, adj, input, w, bias, act),
        Topology::Mlp => mlp(tape, input, &[(w, bias, act)]),
    }
}

fn view_select(view: &View) -> Arc<RowSelect> {
    Arc::new(RowSelect::new(view.node_map.clone(), view.masked_flags()))
}

fn masked_target_rows<T: Scalar>(g: &Graph, view: &View) -> Arc<crate::tensornet::Tensor<T>> {
    let d = g.feature_dim();
    let mut data = Vec::with_capacity(view.masked_nodes.len() * d);
    for &m in &view.masked_nodes {
        let orig = view.node_map[m as usize] as usize;
        data.extend(g.feature_row(orig).iter().map(|&x| T::from_f32(x)));
    }
    Arc::new(crate::tensornet::Tensor::from_vec(
        view.masked_nodes.len(),
        d,
        data,
    ))
}

struct EpochLosses {
    node_frl: NodeId,
    node_cl: Option<NodeId>,
    graph_rl: Option<NodeId>,
    edge_rl: Option<NodeId>,
    total: NodeId,
}

/// Builds the single-epoch objective graph on `tape` from the network's
/// parameter leaves.
fn build_epoch_losses<T: Scalar>(
    tape: &mut Tape<T>,
    net: &Net,
    arch: &ArchConfig,
    g: &Graph,
    feats: &Arc<SparseFeatures<T>>,
    partition: Option<&Partition>,
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<EpochLosses> {
    let weights = cfg.loss_weights();
    let anchor_seed = seeds::substream(seeds::stream(cfg.seed, "augment.anchor"), epoch as u64);
    let views_seed = seeds::substream(seeds::stream(cfg.seed, "augment.views"), epoch as u64);
    let pairs_seed = seeds::substream(seeds::stream(cfg.seed, "pairs"), epoch as u64);
    let negedge_seed = seeds::substream(seeds::stream(cfg.seed, "negedges"), epoch as u64);
    let mut dropout_rng =
        seeds::rng(seeds::substream(seeds::stream(cfg.seed, "dropout"), epoch as u64));
    let mut drop = DropoutState {
        rng: Some(&mut dropout_rng),
        dropout: arch.dropout,
        attn_dropout: arch.attn_dropout,
    };

    // anchor view: encoder -> (contrastive) -> remask -> decoder
    let anchor = make_anchor(g, cfg.anchor.mask_ratio, anchor_seed)?;
    let topo_anchor = Topology::for_graph(&anchor.graph, arch.layer_type);
    let h1 = encode(
        tape,
        net,
        arch,
        feats,
        view_select(&anchor),
        &topo_anchor,
        &mut drop,
    )?;

    let node_cl = if weights.alpha1 > 0.0 {
        let partition = partition.ok_or_else(|| {
            Error::InvalidArgument("node contrastive loss enabled but no partition given".into())
        })?;
        let pairs = Arc::new(community::sample_pairs(
            partition,
            cfg.pairs.rho,
            cfg.pairs.n_pos,
            cfg.pairs.n_neg,
            pairs_seed,
        )?);
        Some(objective::node_contrastive_loss(
            tape,
            h1,
            pairs,
            cfg.loss.temperature,
        )?)
    } else {
        None
    };

    let anchor_masked = Arc::new(anchor.masked_nodes.clone());
    let hm1 = tape.remask(h1, anchor_masked.clone(), net.node("mask.h"));
    let dec1 = decode(tape, net, arch, hm1, &topo_anchor, &mut drop)?;

    // feature reconstruction on the anchor's masked rows
    let zm = tape.gather_rows(dec1, anchor_masked.clone());
    let z = mlp(
        tape,
        zm,
        &[(net.node("proj.w"), net.node("proj.bias"), Activation::None)],
    )?;
    let gamma1 = tape.softplus_plus_one(net.node("gamma1.theta"));
    let targets = masked_target_rows::<T>(g, &anchor);
    let node_frl = objective::feature_reconstruction_loss(tape, z, targets, gamma1)?;

    // edge reconstruction from the re-masked anchor embedding
    let edge_rl = if weights.alpha3 > 0.0 {
        let pos = Arc::new(g.edges().to_vec());
        let neg_count = ((cfg.loss.neg_edge_ratio * g.num_edges() as f64).ceil() as usize).max(1);
        let neg = Arc::new(sample_negative_edges(g, neg_count, negedge_seed)?);
        let sp = tape.edge_scores(h1, pos); // DEBUG: bypass remask
        let sn = tape.edge_scores(h1, neg);
        Some(objective::edge_reconstruction_loss(tape, sp, sn)?)
    } else {
        None
    };

    // graph-level contrast across augmented views
    let graph_rl = if weights.alpha2 > 0.0 {
        let views = make_augmented_views(g, &cfg.augment_config(), views_seed)?;
        let w1 = tape.mean_pool(dec1);
        let mut ws = Vec::with_capacity(views.len());
        for view in &views {
            let topo = Topology::for_graph(&view.graph, arch.layer_type);
            let h = encode(
                tape,
                net,
                arch,
                feats,
                view_select(view),
                &topo,
                &mut drop,
            )?;
            let hm = if view.masked_nodes.is_empty() {
                h
            } else {
                tape.remask(h, Arc::new(view.masked_nodes.clone()), net.node("mask.h"))
            };
            let d = decode(tape, net, arch, hm, &topo, &mut drop)?;
            ws.push(tape.mean_pool(d));
        }
        let gamma2 = tape.softplus_plus_one(net.node("gamma2.theta"));
        Some(objective::graph_representation_loss(
            tape, w1, &ws, gamma2,
        )?)
    } else {
        None
    };

    let total = objective::total_loss(tape, node_frl, node_cl, graph_rl, edge_rl, &weights)?;
    Ok(EpochLosses {
        node_frl,
        node_cl,
        graph_rl,
        edge_rl,
        total,
    })
}

/// Forward + backward for one epoch. Returns per-term loss values and the
/// gradients aligned with the parameter order.
pub(crate) fn epoch_gradients<T: Scalar>(
    g: &Graph,
    feats: &Arc<SparseFeatures<T>>,
    partition: Option<&Partition>,
    params: &ModelParams<T>,
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<(LossRow, Vec<Option<crate::tensornet::Tensor<T>>>)> {
    let mut tape: Tape<T> = Tape::new();
    let net = Net::place(&mut tape, params);
    let losses = build_epoch_losses(&mut tape, &net, &params.arch, g, feats, partition, cfg, epoch)?;
    let row = LossRow {
        epoch,
        node_frl: tape.value(losses.node_frl).item().as_f64(),
        node_cl: losses.node_cl.map_or(0.0, |n| tape.value(n).item().as_f64()),
        graph_rl: losses.graph_rl.map_or(0.0, |n| tape.value(n).item().as_f64()),
        edge_rl: losses.edge_rl.map_or(0.0, |n| tape.value(n).item().as_f64()),
        total: tape.value(losses.total).item().as_f64(),
    };
    if !row.total.is_finite() {
        return Err(Error::Numerical(format!(
            "training diverged: non-finite loss at epoch {epoch}"
        )));
    }

    let mut grads: Gradients<T> = tape.backward(losses.total);
    let out = net.ids.iter().map(|&id| grads.take(id)).collect();
    Ok((row, out))
}

/// Rebuilds the complete single-epoch objective from existing parameter
/// leaves. This is the hook gradient verification uses: `grad_check` owns
/// the leaves and re-evaluates the loss under coordinate perturbations.
/// `leaf_ids` must follow `params`' parameter order.
pub fn epoch_loss<T: Scalar>(
    tape: &mut Tape<T>,
    params: &ModelParams<T>,
    leaf_ids: &[NodeId],
    g: &Graph,
    feats: &Arc<SparseFeatures<T>>,
    partition: Option<&Partition>,
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<NodeId> {
    let net = Net::from_ids(params, leaf_ids);
    build_epoch_losses(tape, &net, &params.arch, g, feats, partition, cfg, epoch)
        .map(|l| l.total)
}

/// Pretrains on `g` (or on its topology restricted to `train_edges` in
/// link-prediction mode). Deterministic for a fixed config seed.
pub fn pretrain(
    g: &Graph,
    cfg: &TrainConfig,
    train_edges: Option<&[(u32, u32)]>,
) -> Result<TrainOutput> {
    pretrain_with_checkpoints(g, cfg, train_edges, None)
}

pub fn pretrain_with_checkpoints(
    g: &Graph,
    cfg: &TrainConfig,
    train_edges: Option<&[(u32, u32)]>,
    ckpt_dir: Option<&Path>,
) -> Result<TrainOutput> {
    cfg.validate()?;
    let mut g_train = match train_edges {
        Some(edges) => g.restrict_edges(edges)?,
        None => g.clone(),
    };
    if cfg.data.row_normalize {
        g_train.row_normalize_features();
    }
    if g_train.num_edges() == 0 {
        return Err(Error::InvalidArgument("cannot pretrain on an edgeless graph".into()));
    }

    let partition = if cfg.loss.alpha1 > 0.0 {
        Some(community::louvain(
            &g_train,
            cfg.louvain.resolution,
            seeds::stream(cfg.seed, "louvain"),
        )?)
    } else {
        None
    };

    let arch = cfg.arch_for(g_train.feature_dim());
    arch.validate().map_err(Error::Config)?;
    let mut params: ModelParams<f32> = ModelParams::init(&arch, seeds::stream(cfg.seed, "init"));
    let feats: Arc<SparseFeatures<f32>> = Arc::new(SparseFeatures::from_dense_rows(
        g_train.num_nodes(),
        g_train.feature_dim(),
        g_train.features(),
    ));
    let adam_cfg = cfg.adam_config();

    let mut history = Vec::with_capacity(cfg.train.epochs);
    for epoch in 0..cfg.train.epochs {
        let (row, grads) =
            epoch_gradients(&g_train, &feats, partition.as_ref(), &params, cfg, epoch)?;
        adam_step(&mut params, &grads, &adam_cfg)
            .map_err(|e| Error::Numerical(format!("epoch {epoch}: {e}")))?;
        history.push(row);
        if let Some(dir) = ckpt_dir {
            let every = cfg.train.checkpoint_every;
            if every > 0 && (epoch + 1) % every == 0 && epoch + 1 < cfg.train.epochs {
                let snapshot = Checkpoint {
                    params: params.clone(),
                    config: cfg.clone(),
                    epoch: epoch + 1,
                    final_losses: row,
                };
                snapshot.save(&dir.join(format!("checkpoint_epoch_{}.bin", epoch + 1)))?;
            }
        }
    }

    let final_losses = *history.last().expect("at least one epoch");
    Ok(TrainOutput {
        checkpoint: Checkpoint {
            params,
            config: cfg.clone(),
            epoch: cfg.train.epochs,
            final_losses,
        },
        history,
    })
}

/// Encoder-only forward on the clean graph: no masking, no augmentation,
/// no dropout. Two calls with the same inputs are bit-identical.
pub fn embed(ckpt: &Checkpoint, g: &Graph) -> Result<crate::tensornet::Tensor<f32>> {
    let arch = &ckpt.params.arch;
    if g.feature_dim() != arch.input_dim {
        return Err(Error::InvalidArgument(format!(
            "checkpoint expects {}-dimensional features, dataset has {}",
            arch.input_dim,
            g.feature_dim()
        )));
    }
    let mut g_eval = g.clone();
    if ckpt.config.data.row_normalize {
        g_eval.row_normalize_features();
    }
    let feats: Arc<SparseFeatures<f32>> = Arc::new(SparseFeatures::from_dense_rows(
        g_eval.num_nodes(),
        g_eval.feature_dim(),
        g_eval.features(),
    ));
    let mut tape: Tape<f32> = Tape::new();
    let net = Net::place(&mut tape, &ckpt.params);
    let topo = Topology::for_graph(&g_eval, arch.layer_type);
    let mut drop = DropoutState::disabled();
    let sel = Arc::new(RowSelect::identity(g_eval.num_nodes()));
    let h = encode(&mut tape, &net, arch, &feats, sel, &topo, &mut drop)?;
    Ok(tape.value(h).clone())
}
