//! Downstream evaluation: linear classification, K-Means clustering with
//! NMI/ARI, link-prediction AUC, and multi-run aggregation with t-intervals.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::ContinuousCDF;

use crate::error::Error;
use crate::graphstore::SplitTag;
use crate::seeds;
use crate::tensornet::Tensor;
use crate::Result;

/// Metrics record over repeated runs with a 95% t-interval half-width.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub task: String,
    pub metric: String,
    pub checkpoint: String,
    pub seeds: Vec<u64>,
    pub runs: Vec<f64>,
    pub mean: f64,
    /// half-width of the 95% confidence interval; None for a single run
    pub ci95: Option<f64>,
}

impl EvalReport {
    pub fn csv_header() -> &'static str {
        "dataset,task,metric,mean,ci95,runs"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:.6},{},{}",
            self.dataset,
            self.task,
            self.metric,
            self.mean,
            self.ci95.map_or("n/a".to_string(), |c| format!("{c:.6}")),
            self.runs.len()
        )
    }
}

/// Mean and 95% t-interval over run values.
pub fn aggregate(
    dataset: &str,
    task: &str,
    metric: &str,
    checkpoint: &str,
    seeds: &[u64],
    runs: &[f64],
) -> Result<EvalReport> {
    if runs.is_empty() {
        return Err(Error::InvalidArgument("aggregate needs at least one run".into()));
    }
    let n = runs.len();
    let mean = runs.iter().sum::<f64>() / n as f64;
    let ci95 = if n >= 2 {
        let var = runs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let t = statrs::distribution::StudentsT::new(0.0, 1.0, (n - 1) as f64)
            .map_err(|e| Error::Numerical(format!("t-distribution: {e}")))?
            .inverse_cdf(0.975);
        Some(t * (var / n as f64).sqrt())
    } else {
        None
    };
    Ok(EvalReport {
        dataset: dataset.to_string(),
        task: task.to_string(),
        metric: metric.to_string(),
        checkpoint: checkpoint.to_string(),
        seeds: seeds.to_vec(),
        runs: runs.to_vec(),
        mean,
        ci95,
    })
}

/// Fallback classification split when the dataset ships none: 10% train,
/// 10% val, 80% test, seeded.
pub fn generate_splits(n: usize, seed: u64) -> Vec<SplitTag> {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = seeds::rng(seed);
    idx.shuffle(&mut rng);
    let n_train = (n / 10).max(1);
    let n_val = (n / 10).max(1);
    let mut out = vec![SplitTag::Test; n];
    for &i in &idx[..n_train] {
        out[i] = SplitTag::Train;
    }
    for &i in &idx[n_train..(n_train + n_val).min(n)] {
        out[i] = SplitTag::Val;
    }
    out
}

// ---------------------------------------------------------------------------
// linear probe
// ---------------------------------------------------------------------------

/// One-vs-rest L2-regularized hinge classifier on frozen embeddings,
/// trained by seeded Pegasos-style sub-gradient descent. Features are
/// standardized with train-split statistics. Returns test accuracy.
pub fn linear_probe(
    emb: &Tensor<f32>,
    labels: &[u32],
    masks: &[SplitTag],
    c: f64,
    epochs: usize,
    seed: u64,
) -> Result<f64> {
    let n = emb.rows();
    let d = emb.cols();
    if labels.len() != n || masks.len() != n {
        return Err(Error::InvalidArgument(
            "labels/masks must cover every embedding row".into(),
        ));
    }
    if c <= 0.0 || epochs == 0 {
        return Err(Error::InvalidArgument("probe needs c > 0 and epochs >= 1".into()));
    }
    let train_idx: Vec<usize> = (0..n).filter(|&i| masks[i] == SplitTag::Train).collect();
    let test_idx: Vec<usize> = (0..n).filter(|&i| masks[i] == SplitTag::Test).collect();
    if train_idx.is_empty() || test_idx.is_empty() {
        return Err(Error::InvalidArgument("train and test splits must be non-empty".into()));
    }
    let num_classes = labels.iter().max().map_or(0, |&m| m as usize + 1);
    let train_classes: std::collections::HashSet<u32> =
        train_idx.iter().map(|&i| labels[i]).collect();
    if train_classes.len() < 2 {
        return Err(Error::InvalidArgument(
            "training split contains a single class; cannot fit a classifier".into(),
        ));
    }

    // standardize with train statistics, add a bias column
    let mut mean = vec![0.0f64; d];
    for &i in &train_idx {
        for (m, &x) in mean.iter_mut().zip(emb.row(i)) {
            *m += x as f64;
        }
    }
    for m in &mut mean {
        *m /= train_idx.len() as f64;
    }
    let mut var = vec![0.0f64; d];
    for &i in &train_idx {
        for ((v, &x), m) in var.iter_mut().zip(emb.row(i)).zip(&mean) {
            *v += (x as f64 - m).powi(2);
        }
    }
    let std: Vec<f64> = var
        .iter()
        .map(|v| (v / train_idx.len() as f64).sqrt().max(1e-6))
        .collect();
    let feat = |i: usize, out: &mut [f64]| {
        for ((o, &x), (m, s)) in out[..d].iter_mut().zip(emb.row(i)).zip(mean.iter().zip(&std)) {
            *o = (x as f64 - m) / s;
        }
        out[d] = 1.0;
    };

    let dim = d + 1;
    let lambda = 1.0 / (c * train_idx.len() as f64);
    let mut weights = vec![vec![0.0f64; dim]; num_classes];
    let mut rng = seeds::rng(seed);
    let mut order = train_idx.clone();
    let mut x = vec![0.0f64; dim];
    let mut t = 0usize;
    for _epoch in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let shrink = 1.0 - eta * lambda;
            feat(i, &mut x);
            for (cls, w) in weights.iter_mut().enumerate() {
                let y = if labels[i] as usize == cls { 1.0 } else { -1.0 };
                let margin: f64 = w.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() * y;
                if margin < 1.0 {
                    for (wv, &xv) in w.iter_mut().zip(&x) {
                        *wv = shrink * *wv + eta * y * xv;
                    }
                } else {
                    for wv in w.iter_mut() {
                        *wv *= shrink;
                    }
                }
            }
        }
    }

    let mut correct = 0usize;
    for &i in &test_idx {
        feat(i, &mut x);
        let mut best = 0usize;
        let mut best_score = f64::NEG_INFINITY;
        for (cls, w) in weights.iter().enumerate() {
            let score: f64 = w.iter().zip(&x).map(|(a, b)| a * b).sum();
            if score > best_score {
                best_score = score;
                best = cls;
            }
        }
        if best == labels[i] as usize {
            correct += 1;
        }
    }
    Ok(correct as f64 / test_idx.len() as f64)
}

// ---------------------------------------------------------------------------
// K-Means
// ---------------------------------------------------------------------------

/// Lloyd's algorithm with k-means++ seeding, best of `n_init` restarts by
/// inertia. Deterministic per seed.
pub fn kmeans(emb: &Tensor<f32>, k: usize, seed: u64, n_init: usize) -> Result<Vec<u32>> {
    let n = emb.rows();
    let d = emb.cols();
    if k < 2 {
        return Err(Error::InvalidArgument("kmeans needs K >= 2".into()));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!(
            "kmeans needs K <= number of points ({k} > {n})"
        )));
    }
    if n_init == 0 {
        return Err(Error::InvalidArgument("kmeans needs n_init >= 1".into()));
    }

    let mut best: Option<(f64, Vec<u32>)> = None;
    for init in 0..n_init {
        let mut rng = seeds::rng(seeds::substream(seed, init as u64));
        let (inertia, assign) = kmeans_single(emb, k, n, d, &mut rng);
        if best.as_ref().is_none_or(|(bi, _)| inertia < *bi) {
            best = Some((inertia, assign));
        }
    }
    Ok(best.unwrap().1)
}

fn kmeans_single(
    emb: &Tensor<f32>,
    k: usize,
    n: usize,
    d: usize,
    rng: &mut impl Rng,
) -> (f64, Vec<u32>) {
    let sq_dist = |a: &[f64], i: usize| -> f64 {
        emb.row(i)
            .iter()
            .zip(a)
            .map(|(&x, &c)| (x as f64 - c).powi(2))
            .sum()
    };

    // k-means++ seeding
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    let first = rng.random_range(0..n);
    centers.push(emb.row(first).iter().map(|&x| x as f64).collect());
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(&centers[0], i)).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            rng.random_range(0..n)
        } else {
            let mut target = rng.random_range(0.0..total);
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        };
        let c: Vec<f64> = emb.row(next).iter().map(|&x| x as f64).collect();
        for i in 0..n {
            let dist = sq_dist(&c, i);
            if dist < d2[i] {
                d2[i] = dist;
            }
        }
        centers.push(c);
    }

    let mut assign = vec![0u32; n];
    let mut inertia = f64::INFINITY;
    for _iter in 0..300 {
        // assignment step
        let mut changed = false;
        let mut new_inertia = 0.0;
        for i in 0..n {
            let mut best_c = 0u32;
            let mut best_d = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let dist = sq_dist(center, i);
                if dist < best_d {
                    best_d = dist;
                    best_c = c as u32;
                }
            }
            if assign[i] != best_c {
                assign[i] = best_c;
                changed = true;
            }
            new_inertia += best_d;
        }
        inertia = new_inertia;
        if !changed && _iter > 0 {
            break;
        }
        // update step; empty clusters grab the point farthest from its center
        let mut counts = vec![0usize; k];
        let mut sums = vec![vec![0.0f64; d]; k];
        for i in 0..n {
            let c = assign[i] as usize;
            counts[c] += 1;
            for (s, &x) in sums[c].iter_mut().zip(emb.row(i)) {
                *s += x as f64;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .max_by(|&a, &b| {
                        sq_dist(&centers[assign[a] as usize], a)
                            .partial_cmp(&sq_dist(&centers[assign[b] as usize], b))
                            .unwrap()
                    })
                    .unwrap();
                centers[c] = emb.row(far).iter().map(|&x| x as f64).collect();
            } else {
                for (ct, s) in centers[c].iter_mut().zip(&sums[c]) {
                    *ct = s / counts[c] as f64;
                }
            }
        }
    }
    (inertia, assign)
}

// ---------------------------------------------------------------------------
// clustering agreement
// ---------------------------------------------------------------------------

fn contingency(a: &[u32], b: &[u32]) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let ka = a.iter().max().map_or(0, |&m| m as usize + 1);
    let kb = b.iter().max().map_or(0, |&m| m as usize + 1);
    let mut table = vec![vec![0.0f64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x as usize][y as usize] += 1.0;
    }
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..kb).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    (table, rows, cols)
}

/// Normalized mutual information with arithmetic-mean normalization:
/// I(a;b) / ((H(a)+H(b))/2).
pub fn nmi(a: &[u32], b: &[u32]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must cover the same items");
    assert!(!a.is_empty(), "labelings must be non-empty");
    let n = a.len() as f64;
    let (table, rows, cols) = contingency(a, b);
    let entropy = |margin: &[f64]| -> f64 {
        margin
            .iter()
            .filter(|&&c| c > 0.0)
            .map(|&c| {
                let p = c / n;
                -p * p.ln()
            })
            .sum()
    };
    let ha = entropy(&rows);
    let hb = entropy(&cols);
    if ha == 0.0 && hb == 0.0 {
        return 1.0; // both constant: perfectly aligned
    }
    if ha == 0.0 || hb == 0.0 {
        return 0.0;
    }
    let mut mi = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0.0 {
                mi += (c / n) * ((n * c) / (rows[i] * cols[j])).ln();
            }
        }
    }
    (mi / (0.5 * (ha + hb))).clamp(0.0, 1.0)
}

/// Adjusted Rand index: pair-counting with expected-index correction.
pub fn ari(a: &[u32], b: &[u32]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must cover the same items");
    assert!(!a.is_empty(), "labelings must be non-empty");
    let n = a.len() as f64;
    let (table, rows, cols) = contingency(a, b);
    let choose2 = |x: f64| x * (x - 1.0) / 2.0;
    let index: f64 = table.iter().flatten().map(|&c| choose2(c)).sum();
    let sum_a: f64 = rows.iter().map(|&c| choose2(c)).sum();
    let sum_b: f64 = cols.iter().map(|&c| choose2(c)).sum();
    let expected = sum_a * sum_b / choose2(n);
    let max_index = 0.5 * (sum_a + sum_b);
    if (max_index - expected).abs() < 1e-15 {
        return if (index - expected).abs() < 1e-15 { 1.0 } else { 0.0 };
    }
    (index - expected) / (max_index - expected)
}

// ---------------------------------------------------------------------------
// link prediction AUC
// ---------------------------------------------------------------------------

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Scores node pairs by σ(h_u·h_v) and ranks them.
pub fn link_auc(
    emb: &Tensor<f32>,
    pos_edges: &[(u32, u32)],
    neg_edges: &[(u32, u32)],
) -> Result<f64> {
    if pos_edges.is_empty() || neg_edges.is_empty() {
        return Err(Error::InvalidArgument(
            "link AUC needs non-empty positive and negative sets".into(),
        ));
    }
    let n = emb.rows();
    let score = |&(u, v): &(u32, u32)| -> Result<f64> {
        if (u as usize) >= n || (v as usize) >= n {
            return Err(Error::InvalidArgument(format!("edge ({u},{v}) out of range")));
        }
        let dot: f64 = emb
            .row(u as usize)
            .iter()
            .zip(emb.row(v as usize))
            .map(|(&a, &b)| a as f64 * b as f64)
            .sum();
        Ok(sigmoid(dot))
    };
    let pos: Vec<f64> = pos_edges.iter().map(score).collect::<Result<_>>()?;
    let neg: Vec<f64> = neg_edges.iter().map(score).collect::<Result<_>>()?;
    Ok(auc_from_scores(&pos, &neg))
}

/// Rank-statistic AUC with ties counted 0.5 (Mann-Whitney, average ranks).
pub fn auc_from_scores(pos: &[f64], neg: &[f64]) -> f64 {
    assert!(!pos.is_empty() && !neg.is_empty());
    let mut all: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0usize;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        // average rank of the tie group [i, j], 1-based ranks
        let avg_rank = (i + 1 + j + 1) as f64 / 2.0;
        for item in &all[i..=j] {
            if item.1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let np = pos.len() as f64;
    let nn = neg.len() as f64;
    (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_fixed_points() {
        assert_eq!(auc_from_scores(&[0.9, 0.8], &[0.2, 0.1]), 1.0);
        assert_eq!(auc_from_scores(&[0.5, 0.5], &[0.5, 0.5]), 0.5);
        assert!((auc_from_scores(&[0.9, 0.4], &[0.6, 0.1]) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn auc_is_monotone_transform_invariant() {
        let pos = [0.93, 0.41, 0.66, 0.12];
        let neg = [0.55, 0.08, 0.71];
        let base = auc_from_scores(&pos, &neg);
        let tp: Vec<f64> = pos.iter().map(|&x| (3.0 * x).exp()).collect();
        let tn: Vec<f64> = neg.iter().map(|&x| (3.0 * x).exp()).collect();
        assert!((auc_from_scores(&tp, &tn) - base).abs() < 1e-12);
    }

    #[test]
    fn nmi_fixed_points() {
        assert_eq!(nmi(&[0, 0, 1, 1], &[0, 0, 1, 1]), 1.0);
        assert_eq!(nmi(&[0, 0, 1, 1], &[1, 1, 0, 0]), 1.0); // label permutation
        assert_eq!(nmi(&[0, 0, 0, 0], &[0, 1, 2, 3]), 0.0); // constant labeling
        assert!(nmi(&[0, 0, 1, 1], &[0, 1, 0, 1]).abs() < 1e-12); // independent
    }

    #[test]
    fn ari_fixed_points() {
        assert_eq!(ari(&[0, 0, 1, 1], &[0, 0, 1, 1]), 1.0);
        assert!((ari(&[0, 0, 1, 1], &[0, 1, 0, 1]) + 0.5).abs() < 1e-12);
        // invariance to label-id permutation
        assert_eq!(ari(&[0, 0, 1, 1], &[1, 1, 0, 0]), 1.0);
    }

    #[test]
    fn nmi_ari_are_symmetric() {
        let a = [0u32, 1, 1, 2, 0, 2, 1];
        let b = [1u32, 1, 0, 2, 2, 0, 0];
        assert!((nmi(&a, &b) - nmi(&b, &a)).abs() < 1e-12);
        assert!((ari(&a, &b) - ari(&b, &a)).abs() < 1e-12);
    }

    #[test]
    fn aggregate_fixed_points() {
        let runs: Vec<f64> = (1..=10).map(|v| v as f64).collect();
        let r = aggregate("d", "t", "m", "c", &[0], &runs).unwrap();
        assert!((r.mean - 5.5).abs() < 1e-12);
        // t(9, 0.975) = 2.2621..., s = 3.0276..., half = t*s/sqrt(10)
        let half = r.ci95.unwrap();
        assert!((half - 2.17).abs() < 0.01, "half-width {half}");

        let same = vec![0.8; 10];
        let r2 = aggregate("d", "t", "m", "c", &[0], &same).unwrap();
        assert!(r2.ci95.unwrap().abs() < 1e-12);

        let single = aggregate("d", "t", "m", "c", &[0], &[0.5]).unwrap();
        assert!(single.ci95.is_none());
        assert!(single.csv_row().contains("n/a"));
    }

    #[test]
    fn kmeans_separates_blobs() {
        // two tight blobs far apart
        let mut data = Vec::new();
        for i in 0..20 {
            let off = (i % 5) as f32 * 0.01;
            if i < 10 {
                data.extend_from_slice(&[off, 0.0]);
            } else {
                data.extend_from_slice(&[10.0 + off, 10.0]);
            }
        }
        let emb = Tensor::from_vec(20, 2, data);
        let assign = kmeans(&emb, 2, 0, 4).unwrap();
        let first = assign[0];
        assert!(assign[..10].iter().all(|&c| c == first));
        assert!(assign[10..].iter().all(|&c| c != first));
    }

    #[test]
    fn kmeans_is_deterministic_and_validates() {
        let emb = Tensor::from_vec(6, 1, vec![0.0, 0.1, 0.2, 5.0, 5.1, 5.2]);
        assert_eq!(kmeans(&emb, 2, 3, 5).unwrap(), kmeans(&emb, 2, 3, 5).unwrap());
        assert!(kmeans(&emb, 1, 0, 1).is_err());
        assert!(kmeans(&emb, 7, 0, 1).is_err());
    }

    #[test]
    fn identical_points_collapse_to_one_cluster() {
        let emb = Tensor::from_vec(5, 2, vec![1.0; 10]);
        let assign = kmeans(&emb, 2, 0, 2).unwrap();
        // degenerate: every point sits at distance 0 of some center
        let first = assign[0];
        assert!(assign.iter().all(|&c| c == first));
    }

    #[test]
    fn probe_separates_linear_clusters() {
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for i in 0..40 {
            if i < 20 {
                data.extend_from_slice(&[1.0 + (i % 7) as f32 * 0.01, 1.0]);
                labels.push(0u32);
            } else {
                data.extend_from_slice(&[-1.0 - (i % 7) as f32 * 0.01, -1.0]);
                labels.push(1u32);
            }
        }
        let emb = Tensor::from_vec(40, 2, data);
        let mut masks = vec![SplitTag::Test; 40];
        for i in (0..40).step_by(2) {
            masks[i] = SplitTag::Train;
        }
        let acc = linear_probe(&emb, &labels, &masks, 1.0, 100, 0).unwrap();
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn probe_on_noise_is_chance_level() {
        use rand::Rng;
        let mut rng = crate::seeds::rng(123);
        let n = 600;
        let data: Vec<f32> = (0..n * 8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let labels: Vec<u32> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let emb = Tensor::from_vec(n, 8, data);
        let mut masks = vec![SplitTag::Test; n];
        for i in 0..n / 5 {
            masks[i * 5] = SplitTag::Train;
        }
        let acc = linear_probe(&emb, &labels, &masks, 1.0, 50, 1).unwrap();
        assert!((acc - 0.5).abs() < 0.08, "noise accuracy {acc}");
    }

    #[test]
    fn probe_rejects_single_class_train() {
        let emb = Tensor::from_vec(4, 2, vec![1.0; 8]);
        let labels = vec![0u32, 0, 1, 1];
        let masks = vec![SplitTag::Train, SplitTag::Train, SplitTag::Test, SplitTag::Test];
        assert!(linear_probe(&emb, &labels, &masks, 1.0, 10, 0).is_err());
    }

    #[test]
    fn constant_embeddings_predict_majority() {
        let emb = Tensor::from_vec(30, 2, vec![0.7; 60]);
        let mut labels = vec![0u32; 30];
        for l in labels.iter_mut().skip(20) {
            *l = 1; // majority class 0 at 2/3
        }
        let mut masks = vec![SplitTag::Train; 15];
        masks.extend(vec![SplitTag::Test; 15]);
        // interleave so both splits see both classes
        let mut m2 = vec![SplitTag::Test; 30];
        for i in (0..30).step_by(2) {
            m2[i] = SplitTag::Train;
        }
        let acc = linear_probe(&emb, &labels, &m2, 1.0, 50, 0).unwrap();
        let majority = 10.0 / 15.0;
        assert!((acc - majority).abs() < 1e-9, "constant embeddings gave {acc}");
    }

    #[test]
    fn generated_splits_cover_all_tags() {
        let s = generate_splits(100, 3);
        let train = s.iter().filter(|&&t| t == SplitTag::Train).count();
        let val = s.iter().filter(|&&t| t == SplitTag::Val).count();
        let test = s.iter().filter(|&&t| t == SplitTag::Test).count();
        assert_eq!(train, 10);
        assert_eq!(val, 10);
        assert_eq!(test, 80);
        assert_eq!(generate_splits(100, 3), s);
    }
}
