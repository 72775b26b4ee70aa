//! Calibration of synthetic end-to-end floors.

use gcgrl::config::TrainConfig;
use gcgrl::evalharness;
use gcgrl::graphstore;
use gcgrl::seeds;
use gcgrl::synth::{attributed_sbm, SbmSpec};
use gcgrl::trainer;

fn cfg_small(seed: u64) -> TrainConfig {
    let mut cfg = TrainConfig::default();
    cfg.seed = seed;
    cfg.model.hidden = 64;
    cfg.model.heads = 4;
    cfg.model.dec_hidden = 32;
    cfg.train.epochs = 300;
    cfg
}

fn main() {
    let mut spec = SbmSpec::balanced(5, 60, 100);
    spec.p_in = 0.25;
    spec.feature_on = 0.10;
    spec.feature_off = 0.05; // weak feature signal
    let g = attributed_sbm(&spec, 9);
    println!("graph: {} nodes {} edges {} classes", g.num_nodes(), g.num_edges(), g.num_classes());

    // full-graph pretrain -> classify + cluster
    let cfg = cfg_small(5);
    let t0 = std::time::Instant::now();
    let out = trainer::pretrain(&g, &cfg, None).unwrap();
    println!("pretrain took {:.1}s", t0.elapsed().as_secs_f64());
    let emb = trainer::embed(&out.checkpoint, &g).unwrap();
    let mut accs = vec![];
    for r in 0..5u64 {
        let rs = seeds::substream(seeds::stream(5, "eval"), r);
        let masks = evalharness::generate_splits(g.num_nodes(), rs);
        accs.push(evalharness::linear_probe(&emb, g.labels().unwrap(), &masks, 1.0, 500, rs).unwrap());
    }
    println!("probe accs: {accs:?}");
    let assign = evalharness::kmeans(&emb, 5, 0, 10).unwrap();
    println!("nmi {:.4} ari {:.4}", evalharness::nmi(&assign, g.labels().unwrap()), evalharness::ari(&assign, g.labels().unwrap()));

    // raw-feature baseline for contrast
    let raw = gcgrl::tensornet::Tensor::from_vec(g.num_nodes(), g.feature_dim(), g.features().to_vec());
    let masks = evalharness::generate_splits(g.num_nodes(), 1);
    let raw_acc = evalharness::linear_probe(&raw, g.labels().unwrap(), &masks, 1.0, 500, 1).unwrap();
    let raw_assign = evalharness::kmeans(&raw, 5, 0, 10).unwrap();
    println!("raw features: acc {:.4} nmi {:.4}", raw_acc, evalharness::nmi(&raw_assign, g.labels().unwrap()));

    // linkpred: dot-product graph with noise features, split, ablation grid
    let g = gcgrl::synth::dot_product_graph(300, 6, -3.0, 64, 4);
    println!("rdpg: {} nodes {} edges", g.num_nodes(), g.num_edges());
    // headroom check: AUC of a perfect adjacency memorizer on held-out edges
    // is bounded by the generator's randomness; approximate the ceiling by
    // scoring with the training adjacency's common-neighbor counts
    {
        let split = graphstore::split_edges(&g, 0.85, 0.05, seeds::stream(5, "split")).unwrap();
        let gt = g.restrict_edges(&split.train_edges).unwrap();
        let cn = |u: u32, v: u32| -> f64 {
            let (a, b) = (gt.neighbors(u as usize), gt.neighbors(v as usize));
            let mut i = 0; let mut j = 0; let mut c = 0.0;
            while i < a.len() && j < b.len() {
                match a[i].cmp(&b[j]) {
                    std::cmp::Ordering::Less => i += 1,
                    std::cmp::Ordering::Greater => j += 1,
                    std::cmp::Ordering::Equal => { c += 1.0; i += 1; j += 1; }
                }
            }
            c
        };
        let pos: Vec<f64> = split.test_edges.iter().map(|&(u, v)| cn(u, v)).collect();
        let neg: Vec<f64> = split.test_neg.iter().map(|&(u, v)| cn(u, v)).collect();
        println!("common-neighbor baseline auc {:.4}", evalharness::auc_from_scores(&pos, &neg));
    }
    let split = graphstore::split_edges(&g, 0.85, 0.05, seeds::stream(5, "split")).unwrap();
    let g_train = g.restrict_edges(&split.train_edges).unwrap();
    for (label, a1, a2, a3) in [
        ("none", 0.0, 0.0, 0.0),
        ("node", 1.0, 0.0, 0.0),
        ("both", 1.0, 1.0, 0.0),
        ("all ", 1.0, 1.0, 1.0),
        ("edge only a3=1 ", 0.0, 0.0, 1.0),
        ("edge only a3=5 ", 0.0, 0.0, 5.0),
        ("all, a3=5      ", 1.0, 1.0, 5.0),
    ] {
        let mut c = cfg_small(5);
        c.loss.alpha1 = a1;
        c.loss.alpha2 = a2;
        c.loss.alpha3 = a3;
        let out = trainer::pretrain(&g, &c, Some(&split.train_edges)).unwrap();
        let emb = trainer::embed(&out.checkpoint, &g_train).unwrap();
        let auc = evalharness::link_auc(&emb, &split.test_edges, &split.test_neg).unwrap();
        let norms: Vec<f64> = (0..emb.rows())
            .map(|i| emb.row(i).iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt())
            .collect();
        let mean_norm = norms.iter().sum::<f64>() / norms.len() as f64;
        let mut dots = vec![];
        for (e, &(u, v)) in split.train_edges.iter().enumerate() {
            if e % 500 == 0 {
                let d: f64 = emb.row(u as usize).iter().zip(emb.row(v as usize)).map(|(&a, &b)| a as f64 * b as f64).sum();
                dots.push(d);
            }
        }
        println!("    mean row norm {:.4}; sample pos dots {:?}", mean_norm, &dots[..dots.len().min(5)]);
        let h0 = out.history.first().unwrap();
        let h1 = out.history.last().unwrap();
        println!(
            "{label}: auc {:.4} | frl {:.3}->{:.3} ncl {:.3}->{:.3} erl {:.3}->{:.3}",
            auc, h0.node_frl, h1.node_frl, h0.node_cl, h1.node_cl, h0.edge_rl, h1.edge_rl
        );
    }
}
