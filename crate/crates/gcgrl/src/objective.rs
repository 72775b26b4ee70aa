//! The four training objectives and their weighted combination.
//!
//! All four are tape ops, so reverse-mode gradients flow through them like
//! any layer. Cosine denominators are floored at 1e-8 and probabilities are
//! clamped to [1e-7, 1-1e-7] before logs.

use std::sync::Arc;

use crate::community::PairSet;
use crate::error::Error;
use crate::tensornet::ops::{NORM_EPS, PROB_EPS};
use crate::tensornet::{GradSink, NodeId, Scalar, Tape, TapeOp, Tensor};
use crate::Result;

/// Term weights of the combined loss; a weight of 0 disables its term,
/// which is how the ablation configurations are expressed.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct LossWeights {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            alpha1: 1.0,
            alpha2: 1.0,
            alpha3: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("alpha3", self.alpha3),
        ] {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "loss weight {name} must be finite and non-negative, got {w}"
                )));
            }
        }
        Ok(())
    }
}

fn norm<T: Scalar>(a: &[T]) -> T {
    let mut s = T::zero();
    for &x in a {
        s += x * x;
    }
    s.sqrt().max(T::from_f64(NORM_EPS))
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut s = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

/// Adds `scale · d cos(a,b)/d a` into `out`, with the eps-guarded norm
/// treated as constant when the guard is active.
fn add_dcos_da<T: Scalar>(out: &mut [T], a: &[T], b: &[T], na: T, nb: T, cos: T, scale: T) {
    let guard_active = na <= T::from_f64(NORM_EPS);
    let inv = T::one() / (na * nb);
    let self_term = if guard_active { T::zero() } else { cos / (na * na) };
    for ((o, &av), &bv) in out.iter_mut().zip(a).zip(b) {
        *o += scale * (bv * inv - self_term * av);
    }
}

// ---------------------------------------------------------------------------
// node contrastive loss
// ---------------------------------------------------------------------------

struct NodeContrastiveOp<T> {
    h: NodeId,
    pairs: Arc<PairSet>,
    inv_temp: T,
    /// row norms of h, indexed by node id
    norms: Vec<T>,
    /// per anchor: cosines of its positives then negatives (already / τ)
    sims: Vec<Vec<T>>,
    /// per anchor: (sum of e^s over positives, over negatives)
    sums: Vec<(T, T)>,
}

impl<T: Scalar> TapeOp<T> for NodeContrastiveOp<T> {
    fn backward(&self, g: &Tensor<T>, vals: &[Tensor<T>], sink: &mut GradSink<'_, T>) {
        let h = &vals[self.h.0];
        let gv = g.item();
        let a_count = T::from_f64(self.pairs.anchors.len() as f64);
        let outer = gv / (T::from_f64(2.0) * a_count);
        let dh = sink.accum(self.h, h.rows(), h.cols());
        for (i, &u) in self.pairs.anchors.iter().enumerate() {
            let (sp, sn) = self.sums[i];
            let total = sp + sn;
            let hu = h.row(u as usize);
            let nu = self.norms[u as usize];
            let np = self.pairs.positives[i].len();
            for (k, &v) in self.pairs.positives[i]
                .iter()
                .chain(self.pairs.negatives[i].iter())
                .enumerate()
            {
                let s = self.sims[i][k];
                let es = s.exp();
                // d loss_u / d s: positives get -e^s/SP + e^s/(SP+SN),
                // negatives just e^s/(SP+SN)
                let dls = if k < np {
                    es / total - es / sp
                } else {
                    es / total
                };
                let ds = outer * dls * self.inv_temp;
                if ds == T::zero() {
                    continue;
                }
                let hv = h.row(v as usize);
                let nv = self.norms[v as usize];
                let cos = s / self.inv_temp;
                // split borrows: accumulate into temporary rows
                let mut du = vec![T::zero(); h.cols()];
                let mut dvv = vec![T::zero(); h.cols()];
                add_dcos_da(&mut du, hu, hv, nu, nv, cos, ds);
                add_dcos_da(&mut dvv, hv, hu, nv, nu, cos, ds);
                for (o, x) in dh.row_mut(u as usize).iter_mut().zip(&du) {
                    *o += *x;
                }
                for (o, x) in dh.row_mut(v as usize).iter_mut().zip(&dvv) {
                    *o += *x;
                }
            }
        }
    }
}

/// Eq-style community contrastive loss over anchor-view embeddings:
/// mean over anchors of −log(Σ₊e^s / (Σ₊e^s + Σ₋e^s)), halved.
pub fn node_contrastive_loss<T: Scalar>(
    tape: &mut Tape<T>,
    h: NodeId,
    pairs: Arc<PairSet>,
    temperature: f64,
) -> Result<NodeId> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("pair set has no anchors".into()));
    }
    if temperature <= 0.0 || !temperature.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let hv = tape.value(h);
    let n = hv.rows();
    for (i, &u) in pairs.anchors.iter().enumerate() {
        if (u as usize) >= n {
            return Err(Error::InvalidArgument(format!("anchor {u} out of range")));
        }
        if pairs.positives[i].is_empty() {
            return Err(Error::InvalidArgument(format!(
                "anchor {u} has an empty positive list"
            )));
        }
        if pairs.negatives[i].is_empty() {
            return Err(Error::InvalidArgument(format!(
                "anchor {u} has an empty negative list"
            )));
        }
        for &v in pairs.positives[i].iter().chain(pairs.negatives[i].iter()) {
            if (v as usize) >= n {
                return Err(Error::InvalidArgument(format!("pair node {v} out of range")));
            }
        }
    }

    let inv_temp = T::from_f64(1.0 / temperature);
    let norms: Vec<T> = (0..n).map(|i| norm(hv.row(i))).collect();
    let mut sims = Vec::with_capacity(pairs.anchors.len());
    let mut sums = Vec::with_capacity(pairs.anchors.len());
    let mut loss = T::zero();
    for (i, &u) in pairs.anchors.iter().enumerate() {
        let hu = hv.row(u as usize);
        let nu = norms[u as usize];
        let mut row_sims = Vec::with_capacity(pairs.positives[i].len() + pairs.negatives[i].len());
        let mut sp = T::zero();
        let mut sn = T::zero();
        for (k, &v) in pairs.positives[i]
            .iter()
            .chain(pairs.negatives[i].iter())
            .enumerate()
        {
            let hvv = hv.row(v as usize);
            let s = dot(hu, hvv) / (nu * norms[v as usize]) * inv_temp;
            row_sims.push(s);
            if k < pairs.positives[i].len() {
                sp += s.exp();
            } else {
                sn += s.exp();
            }
        }
        loss += -(sp / (sp + sn)).ln();
        sims.push(row_sims);
        sums.push((sp, sn));
    }
    loss /= T::from_f64(2.0 * pairs.anchors.len() as f64);

    Ok(tape.push(
        Tensor::scalar(loss),
        Box::new(NodeContrastiveOp {
            h,
            pairs,
            inv_temp,
            norms,
            sims,
            sums,
        }),
    ))
}

// ---------------------------------------------------------------------------
// scaled cosine error (shared by feature and graph representation losses)
// ---------------------------------------------------------------------------

/// Per-row (1 − cos)^γ against fixed targets, averaged. Also used row-wise
/// by the graph representation loss via a target of node values.
struct SceAgainstConstOp<T> {
    z: NodeId,
    gamma: NodeId,
    targets: Arc<Tensor<T>>,
    /// per row: (1-cos clamped at 0, norm_z, norm_x, cos)
    saved: Vec<(T, T, T, T)>,
}

impl<T: Scalar> TapeOp<T> for SceAgainstConstOp<T> {
    fn backward(&self, g: &Tensor<T>, vals: &[Tensor<T>], sink: &mut GradSink<'_, T>) {
        let z = &vals[self.z.0];
        let gamma = vals[self.gamma.0].item();
        let gv = g.item();
        let m = T::from_f64(z.rows() as f64);
        let tiny = T::from_f64(1e-15);
        let mut dgamma = T::zero();
        {
            let dz = sink.accum(self.z, z.rows(), z.cols());
            for i in 0..z.rows() {
                let (b, nz, nx, cos) = self.saved[i];
                if b <= tiny {
                    continue;
                }
                let term = b.powf(gamma);
                dgamma += term * b.ln();
                // d term/d z = γ b^{γ-1} · (−dcos/dz)
                let scale = -(gv / m) * gamma * b.powf(gamma - T::one());
                add_dcos_da(dz.row_mut(i), z.row(i), self.targets.row(i), nz, nx, cos, scale);
            }
        }
        sink.add_scalar(self.gamma, gv * dgamma / m);
    }
}

/// SCE feature reconstruction: mean over masked rows of (1 − cos(x, z))^γ.
/// `z` carries only the masked rows; `targets` holds the matching original
/// feature rows.
pub fn feature_reconstruction_loss<T: Scalar>(
    tape: &mut Tape<T>,
    z: NodeId,
    targets: Arc<Tensor<T>>,
    gamma: NodeId,
) -> Result<NodeId> {
    let zv = tape.value(z);
    if zv.rows() == 0 {
        return Err(Error::InvalidArgument(
            "feature reconstruction needs a non-empty masked set".into(),
        ));
    }
    if zv.shape() != targets.shape() {
        return Err(Error::InvalidArgument(format!(
            "reconstruction shape {:?} does not match targets {:?}",
            zv.shape(),
            targets.shape()
        )));
    }
    let gamma_v = tape.value(gamma).item();
    if gamma_v < T::one() {
        return Err(Error::InvalidArgument(format!(
            "gamma must be at least 1, got {gamma_v}"
        )));
    }

    let mut saved = Vec::with_capacity(zv.rows());
    let mut loss = T::zero();
    for i in 0..zv.rows() {
        let zr = zv.row(i);
        let xr = targets.row(i);
        let nz = norm(zr);
        let nx = norm(xr);
        let cos = dot(zr, xr) / (nz * nx);
        let b = (T::one() - cos).max(T::zero());
        loss += b.powf(gamma_v);
        saved.push((b, nz, nx, cos));
    }
    loss /= T::from_f64(zv.rows() as f64);

    Ok(tape.push(
        Tensor::scalar(loss),
        Box::new(SceAgainstConstOp {
            z,
            gamma,
            targets,
            saved,
        }),
    ))
}

// ---------------------------------------------------------------------------
// graph representation loss
// ---------------------------------------------------------------------------

struct GraphReprOp<T> {
    anchor: NodeId,
    augmented: Vec<NodeId>,
    gamma: NodeId,
    /// per augmented view: (1-cos clamped, norm_aug, norm_anchor, cos)
    saved: Vec<(T, T, T, T)>,
}

impl<T: Scalar> TapeOp<T> for GraphReprOp<T> {
    fn backward(&self, g: &Tensor<T>, vals: &[Tensor<T>], sink: &mut GradSink<'_, T>) {
        let w1 = &vals[self.anchor.0];
        let gamma = vals[self.gamma.0].item();
        let gv = g.item();
        let k = T::from_f64(self.augmented.len() as f64);
        let tiny = T::from_f64(1e-15);
        let mut dgamma = T::zero();
        let cols = w1.cols();
        let mut danchor = vec![T::zero(); cols];
        for (i, &wi_id) in self.augmented.iter().enumerate() {
            let (b, nw, na, cos) = self.saved[i];
            if b <= tiny {
                continue;
            }
            dgamma += b.powf(gamma) * b.ln();
            let scale = -(gv / k) * gamma * b.powf(gamma - T::one());
            let wi = &vals[wi_id.0];
            {
                let dwi = sink.accum(wi_id, 1, cols);
                add_dcos_da(dwi.row_mut(0), wi.row(0), w1.row(0), nw, na, cos, scale);
            }
            add_dcos_da(&mut danchor, w1.row(0), wi.row(0), na, nw, cos, scale);
        }
        {
            let da = sink.accum(self.anchor, 1, cols);
            for (o, x) in da.row_mut(0).iter_mut().zip(&danchor) {
                *o += *x;
            }
        }
        sink.add_scalar(self.gamma, gv * dgamma / k);
    }
}

/// Mean over augmented views of (1 − cos(w_i, w_anchor))^γ.
pub fn graph_representation_loss<T: Scalar>(
    tape: &mut Tape<T>,
    anchor: NodeId,
    augmented: &[NodeId],
    gamma: NodeId,
) -> Result<NodeId> {
    if augmented.is_empty() {
        return Err(Error::InvalidArgument(
            "graph representation loss needs at least one augmented view".into(),
        ));
    }
    let cols = tape.value(anchor).cols();
    if tape.value(anchor).rows() != 1 {
        return Err(Error::InvalidArgument("graph embeddings must be row vectors".into()));
    }
    for &w in augmented {
        if tape.value(w).shape() != (1, cols) {
            return Err(Error::InvalidArgument("graph embedding shape mismatch".into()));
        }
    }
    let gamma_v = tape.value(gamma).item();
    if gamma_v < T::one() {
        return Err(Error::InvalidArgument(format!(
            "gamma must be at least 1, got {gamma_v}"
        )));
    }

    let mut saved = Vec::with_capacity(augmented.len());
    let mut loss = T::zero();
    {
        let w1 = tape.value(anchor);
        let na = norm(w1.row(0));
        for &wid in augmented {
            let wi = tape.value(wid);
            let nw = norm(wi.row(0));
            let cos = dot(wi.row(0), w1.row(0)) / (nw * na);
            let b = (T::one() - cos).max(T::zero());
            loss += b.powf(gamma_v);
            saved.push((b, nw, na, cos));
        }
    }
    loss /= T::from_f64(augmented.len() as f64);

    Ok(tape.push(
        Tensor::scalar(loss),
        Box::new(GraphReprOp {
            anchor,
            augmented: augmented.to_vec(),
            gamma,
            saved,
        }),
    ))
}

// ---------------------------------------------------------------------------
// edge reconstruction loss
// ---------------------------------------------------------------------------

struct EdgeReconOp<T> {
    pos: NodeId,
    neg: NodeId,
    eps: T,
}

impl<T: Scalar> TapeOp<T> for EdgeReconOp<T> {
    fn backward(&self, g: &Tensor<T>, vals: &[Tensor<T>], sink: &mut GradSink<'_, T>) {
        let gv = g.item();
        let lo = self.eps;
        let hi = T::one() - self.eps;
        {
            let pv = &vals[self.pos.0];
            let np = T::from_f64(pv.len() as f64);
            let dp = sink.accum(self.pos, pv.rows(), pv.cols());
            for (d, &p) in dp.as_mut_slice().iter_mut().zip(pv.iter()) {
                if p > lo && p < hi {
                    *d += -gv / (np * p);
                }
            }
        }
        {
            let nv = &vals[self.neg.0];
            let nn = T::from_f64(nv.len() as f64);
            let dn = sink.accum(self.neg, nv.rows(), nv.cols());
            for (d, &q) in dn.as_mut_slice().iter_mut().zip(nv.iter()) {
                if q > lo && q < hi {
                    *d += gv / (nn * (T::one() - q));
                }
            }
        }
    }
}

/// −[mean log p over positives + mean log(1−p) over negatives]; the sum of
/// two means, not a pooled mean.
pub fn edge_reconstruction_loss<T: Scalar>(
    tape: &mut Tape<T>,
    scores_pos: NodeId,
    scores_neg: NodeId,
) -> Result<NodeId> {
    let pv = tape.value(scores_pos);
    let nv = tape.value(scores_neg);
    if pv.is_empty() || nv.is_empty() {
        return Err(Error::InvalidArgument(
            "edge reconstruction needs non-empty positive and negative score sets".into(),
        ));
    }
    for &s in pv.iter().chain(nv.iter()) {
        if s <= T::zero() || s >= T::one() {
            return Err(Error::InvalidArgument(format!(
                "edge score {s} outside (0,1)"
            )));
        }
    }
    let eps = T::from_f64(PROB_EPS);
    let clamp = |x: T| x.max(eps).min(T::one() - eps);
    let mut lp = T::zero();
    for &p in pv.iter() {
        lp += clamp(p).ln();
    }
    lp /= T::from_f64(pv.len() as f64);
    let mut ln_ = T::zero();
    for &q in nv.iter() {
        ln_ += (T::one() - clamp(q)).ln();
    }
    ln_ /= T::from_f64(nv.len() as f64);
    let loss = -(lp + ln_);

    Ok(tape.push(
        Tensor::scalar(loss),
        Box::new(EdgeReconOp {
            pos: scores_pos,
            neg: scores_neg,
            eps,
        }),
    ))
}

// ---------------------------------------------------------------------------
// total loss
// ---------------------------------------------------------------------------

/// L = L_nodeFRL + α1·L_nodeCL + α2·L_graphRL + α3·L_edgeRL. Missing parts
/// (disabled terms) contribute nothing; present parts must be finite.
pub fn total_loss<T: Scalar>(
    tape: &mut Tape<T>,
    node_frl: NodeId,
    node_cl: Option<NodeId>,
    graph_rl: Option<NodeId>,
    edge_rl: Option<NodeId>,
    weights: &LossWeights,
) -> Result<NodeId> {
    weights.validate()?;
    let mut parts: Vec<(NodeId, T)> = vec![(node_frl, T::one())];
    let named = [
        ("nodeFRL", Some(node_frl), 1.0),
        ("nodeCL", node_cl, weights.alpha1),
        ("graphRL", graph_rl, weights.alpha2),
        ("edgeRL", edge_rl, weights.alpha3),
    ];
    for (name, id, w) in named {
        if let Some(id) = id {
            let v = tape.value(id).item();
            if !v.is_finite() {
                return Err(Error::Numerical(format!("loss component {name} is non-finite ({v})")));
            }
            if name != "nodeFRL" {
                parts.push((id, T::from_f64(w)));
            }
        }
    }
    Ok(tape.weighted_sum(&parts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensornet::grad_check;

    fn pairset(anchors: Vec<u32>, pos: Vec<Vec<u32>>, neg: Vec<Vec<u32>>) -> Arc<PairSet> {
        Arc::new(PairSet {
            anchors,
            positives: pos,
            negatives: neg,
        })
    }

    #[test]
    fn single_pair_fixed_point() {
        // cos(u,pos)=1, cos(u,neg)=-1 -> 0.5·ln(1+e^{-2})
        let mut tape: Tape<f64> = Tape::new();
        let h = tape.leaf(Tensor::from_vec(3, 1, vec![1.0, 2.0, -3.0]));
        let ps = pairset(vec![0], vec![vec![1]], vec![vec![2]]);
        let l = node_contrastive_loss(&mut tape, h, ps, 1.0).unwrap();
        let expected = 0.5 * (1.0 + (-2.0f64).exp()).ln();
        assert!((tape.value(l).item() - expected).abs() < 1e-9);
        assert!((expected - 0.063464).abs() < 1e-6);
    }

    #[test]
    fn equal_similarities_give_half_log_two() {
        // positive and negative at the same cosine -> ratio 1/2 per anchor
        let mut tape: Tape<f64> = Tape::new();
        let h = tape.leaf(Tensor::from_vec(3, 2, vec![1.0, 0.0, 0.0, 1.0, 0.0, 2.0]));
        let ps = pairset(vec![0], vec![vec![1]], vec![vec![2]]);
        let l = node_contrastive_loss(&mut tape, h, ps, 1.0).unwrap();
        assert!((tape.value(l).item() - 0.5 * 2.0f64.ln()).abs() < 1e-12);
        assert!((tape.value(l).item() - 0.34657 / 2.0 * 2.0).abs() < 1e-4);
    }

    #[test]
    fn vanishing_negative_similarity_drives_loss_to_zero() {
        // temperature 0.02 turns cos=±1 into s=±50
        let mut tape: Tape<f64> = Tape::new();
        let h = tape.leaf(Tensor::from_vec(3, 1, vec![1.0, 2.0, -3.0]));
        let ps = pairset(vec![0], vec![vec![1]], vec![vec![2]]);
        let l = node_contrastive_loss(&mut tape, h, ps, 0.02).unwrap();
        assert!(tape.value(l).item() < 1e-8);
        assert!(tape.value(l).item() >= 0.0);
    }

    #[test]
    fn contrastive_rejects_empty_lists() {
        let mut tape: Tape<f64> = Tape::new();
        let h = tape.leaf(Tensor::from_vec(2, 1, vec![1.0, 2.0]));
        let ps = pairset(vec![0], vec![vec![]], vec![vec![1]]);
        assert!(node_contrastive_loss(&mut tape, h, ps, 1.0).is_err());
    }

    #[test]
    fn sce_fixed_points() {
        let cases = [
            // (z, x, gamma, expected)
            (vec![1.0, 0.0], vec![1.0, 0.0], 2.0, 0.0),  // parallel
            (vec![0.0, 1.0], vec![1.0, 0.0], 2.0, 1.0),  // orthogonal
            (vec![-1.0, 0.0], vec![1.0, 0.0], 2.0, 4.0), // antiparallel
        ];
        for (z, x, gamma, expected) in cases {
            let mut tape: Tape<f64> = Tape::new();
            let zn = tape.leaf(Tensor::from_vec(1, 2, z));
            let gn = tape.leaf(Tensor::scalar(gamma));
            let t = Arc::new(Tensor::from_vec(1, 2, x));
            let l = feature_reconstruction_loss(&mut tape, zn, t, gn).unwrap();
            assert!(
                (tape.value(l).item() - expected).abs() < 1e-9,
                "expected {expected}, got {}",
                tape.value(l).item()
            );
        }
    }

    #[test]
    fn graph_repr_fixed_points() {
        // identical embeddings -> 0
        let mut tape: Tape<f64> = Tape::new();
        let w1 = tape.leaf(Tensor::from_vec(1, 2, vec![0.4, -0.3]));
        let w2 = tape.leaf(Tensor::from_vec(1, 2, vec![0.8, -0.6]));
        let gn = tape.leaf(Tensor::scalar(2.0));
        let l = graph_representation_loss(&mut tape, w1, &[w2], gn).unwrap();
        assert!(tape.value(l).item().abs() < 1e-9);

        // k=2 orthogonal at gamma=1 -> 1
        let mut tape: Tape<f64> = Tape::new();
        let w1 = tape.leaf(Tensor::from_vec(1, 2, vec![1.0, 0.0]));
        let a = tape.leaf(Tensor::from_vec(1, 2, vec![0.0, 1.0]));
        let b = tape.leaf(Tensor::from_vec(1, 2, vec![0.0, -2.0]));
        let g1 = tape.leaf(Tensor::scalar(1.0));
        let l = graph_representation_loss(&mut tape, w1, &[a, b], g1).unwrap();
        assert!((tape.value(l).item() - 1.0).abs() < 1e-9);

        // k=1 antiparallel at gamma=2 -> 4
        let mut tape: Tape<f64> = Tape::new();
        let w1 = tape.leaf(Tensor::from_vec(1, 2, vec![1.0, 1.0]));
        let w2 = tape.leaf(Tensor::from_vec(1, 2, vec![-2.0, -2.0]));
        let g2 = tape.leaf(Tensor::scalar(2.0));
        let l = graph_representation_loss(&mut tape, w1, &[w2], g2).unwrap();
        assert!((tape.value(l).item() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn edge_recon_fixed_points() {
        let mut tape: Tape<f64> = Tape::new();
        let p = tape.leaf(Tensor::from_vec(1, 2, vec![0.5, 0.5]));
        let q = tape.leaf(Tensor::from_vec(1, 2, vec![0.5, 0.5]));
        let l = edge_reconstruction_loss(&mut tape, p, q).unwrap();
        assert!((tape.value(l).item() - 2.0 * 2.0f64.ln()).abs() < 1e-9);
        assert!((tape.value(l).item() - 1.38629).abs() < 1e-5);

        let mut tape: Tape<f64> = Tape::new();
        let p = tape.leaf(Tensor::from_vec(1, 2, vec![0.99, 0.99]));
        let q = tape.leaf(Tensor::from_vec(1, 2, vec![0.01, 0.01]));
        let l = edge_reconstruction_loss(&mut tape, p, q).unwrap();
        assert!((tape.value(l).item() - 2.0 * -(0.99f64.ln())).abs() < 1e-9);
        assert!((tape.value(l).item() - 0.0201).abs() < 1e-4);

        // near-perfect scores at the clamp boundary -> ~0
        let mut tape: Tape<f64> = Tape::new();
        let e = 1e-7;
        let p = tape.leaf(Tensor::from_vec(1, 1, vec![1.0 - e]));
        let q = tape.leaf(Tensor::from_vec(1, 1, vec![e]));
        let l = edge_reconstruction_loss(&mut tape, p, q).unwrap();
        assert!(tape.value(l).item() < 1e-6);
    }

    #[test]
    fn edge_recon_rejects_out_of_range_scores() {
        let mut tape: Tape<f64> = Tape::new();
        let p = tape.leaf(Tensor::from_vec(1, 1, vec![1.0]));
        let q = tape.leaf(Tensor::from_vec(1, 1, vec![0.5]));
        assert!(edge_reconstruction_loss(&mut tape, p, q).is_err());
        let empty = tape.leaf(Tensor::zeros(1, 0));
        let q2 = tape.leaf(Tensor::from_vec(1, 1, vec![0.5]));
        assert!(edge_reconstruction_loss(&mut tape, empty, q2).is_err());
    }

    #[test]
    fn total_loss_arithmetic() {
        let w = LossWeights {
            alpha1: 1.0,
            alpha2: 1.0,
            alpha3: 1.0,
        };
        let mut tape: Tape<f64> = Tape::new();
        let parts: Vec<NodeId> = [1.0, 2.0, 3.0, 4.0]
            .iter()
            .map(|&v| tape.leaf(Tensor::scalar(v)))
            .collect();
        let t = total_loss(&mut tape, parts[0], Some(parts[1]), Some(parts[2]), Some(parts[3]), &w)
            .unwrap();
        assert!((tape.value(t).item() - 10.0).abs() < 1e-12);

        let w2 = LossWeights {
            alpha1: 0.5,
            alpha2: 0.0,
            alpha3: 2.0,
        };
        let t2 =
            total_loss(&mut tape, parts[0], Some(parts[1]), Some(parts[2]), Some(parts[3]), &w2)
                .unwrap();
        assert!((tape.value(t2).item() - 10.0).abs() < 1e-12);

        // all alphas zero: total equals nodeFRL exactly
        let w0 = LossWeights {
            alpha1: 0.0,
            alpha2: 0.0,
            alpha3: 0.0,
        };
        let t3 = total_loss(&mut tape, parts[0], None, None, None, &w0).unwrap();
        assert_eq!(tape.value(t3).item(), 1.0);
    }

    #[test]
    fn total_loss_reports_non_finite_component() {
        let mut tape: Tape<f64> = Tape::new();
        let a = tape.leaf(Tensor::scalar(1.0));
        let bad = tape.leaf(Tensor::scalar(f64::NAN));
        let err = total_loss(&mut tape, a, Some(bad), None, None, &LossWeights::default())
            .unwrap_err();
        assert!(err.to_string().contains("nodeCL"), "{err}");
    }

    // -- gradient checks ----------------------------------------------------

    #[test]
    fn contrastive_gradcheck() {
        let ps = pairset(vec![0, 3], vec![vec![1], vec![2, 4]], vec![vec![2, 4], vec![0]]);
        let h = Tensor::from_vec(
            5,
            3,
            vec![
                0.8, -0.3, 0.5, 0.2, 0.9, -0.1, -0.6, 0.4, 0.7, 0.1, -0.8, 0.3, 0.5, 0.5, -0.9,
            ],
        );
        let err = grad_check(
            &[h],
            move |tape, ids| node_contrastive_loss(tape, ids[0], ps.clone(), 0.7).unwrap(),
            1e-6,
            64,
            11,
        );
        assert!(err < 1e-7, "contrastive gradcheck err {err}");
    }

    #[test]
    fn sce_gradcheck_including_gamma() {
        let z = Tensor::from_vec(3, 4, vec![
            0.5, -0.2, 0.8, 0.1, -0.4, 0.9, 0.2, -0.7, 0.3, 0.3, -0.5, 0.6,
        ]);
        let targets = Arc::new(Tensor::from_vec(3, 4, vec![
            1.0, 0.0, 0.5, -0.5, 0.2, -0.8, 0.4, 0.9, -0.3, 0.7, 0.1, 0.2,
        ]));
        let gamma = Tensor::scalar(1.7);
        let err = grad_check(
            &[z, gamma],
            move |tape, ids| {
                feature_reconstruction_loss(tape, ids[0], targets.clone(), ids[1]).unwrap()
            },
            1e-6,
            64,
            4,
        );
        assert!(err < 1e-7, "sce gradcheck err {err}");
    }

    #[test]
    fn graph_repr_gradcheck_including_gamma() {
        let w1 = Tensor::from_vec(1, 4, vec![0.4, -0.6, 0.2, 0.9]);
        let w2 = Tensor::from_vec(1, 4, vec![-0.3, 0.8, 0.5, -0.1]);
        let w3 = Tensor::from_vec(1, 4, vec![0.7, 0.1, -0.8, 0.4]);
        let gamma = Tensor::scalar(2.3);
        let err = grad_check(
            &[w1, w2, w3, gamma],
            |tape, ids| {
                graph_representation_loss(tape, ids[0], &[ids[1], ids[2]], ids[3]).unwrap()
            },
            1e-6,
            64,
            5,
        );
        assert!(err < 1e-7, "graph repr gradcheck err {err}");
    }

    #[test]
    fn edge_recon_gradcheck() {
        let p = Tensor::from_vec(1, 3, vec![0.8, 0.6, 0.95]);
        let q = Tensor::from_vec(1, 2, vec![0.3, 0.15]);
        let err = grad_check(
            &[p, q],
            |tape, ids| edge_reconstruction_loss(tape, ids[0], ids[1]).unwrap(),
            1e-7,
            16,
            6,
        );
        assert!(err < 1e-7, "edge recon gradcheck err {err}");
    }

    #[test]
    fn contrastive_is_scale_invariant_and_monotone() {
        let ps = pairset(vec![0], vec![vec![1]], vec![vec![2]]);
        let base = vec![0.6, 0.3, 0.2, 0.9, -0.5, 0.4];
        let eval = |h: Vec<f64>| {
            let mut tape: Tape<f64> = Tape::new();
            let hn = tape.leaf(Tensor::from_vec(3, 2, h));
            let l = node_contrastive_loss(&mut tape, hn, ps.clone(), 1.0).unwrap();
            tape.value(l).item()
        };
        let l0 = eval(base.clone());
        // rescaling the positive row leaves the loss unchanged
        let mut scaled = base.clone();
        scaled[2] *= 7.5;
        scaled[3] *= 7.5;
        assert!((eval(scaled) - l0).abs() < 1e-12);
        // rotating the positive row toward the anchor strictly decreases it
        let mut better = base.clone();
        better[2] = 0.6;
        better[3] = 0.3;
        assert!(eval(better) < l0);
    }
}
