//! Command implementations behind the `gcgrl` binary.
//!
//! Commands: `import`, `train`, `embed`, `eval classify|cluster|linkpred`,
//! `ablate`, `communities`. Dotted config overrides (`--loss.alpha1=0.5`)
//! are extracted before clap parsing. Every file-producing command writes a
//! RunManifest next to its outputs; `train`/`eval`/`ablate` accept
//! `--manifest` to re-execute a recorded run.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::TrainConfig;
use crate::error::Error;
use crate::evalharness::{self, EvalReport};
use crate::graphstore::{self, EdgeSplit, Graph};
use crate::manifest::RunManifest;
use crate::objective::LossWeights;
use crate::seeds;
use crate::trainer::{self, Checkpoint};
use crate::Result;

#[derive(Parser, Debug)]
#[command(name = "gcgrl", version, about = "Self-supervised graph embeddings: pretraining and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Convert an edge list + feature CSV into a binary dataset directory.
    Import {
        #[arg(long)]
        edges: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pretrain embeddings; writes checkpoint, loss CSV, and manifest.
    Train(TrainArgs),
    /// Export encoder embeddings for a dataset.
    Embed {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on a downstream task.
    Eval(EvalArgs),
    /// Run the component-ablation grid (or the model-size sweep).
    Ablate(AblateArgs),
    /// Louvain communities of a dataset as a JSON array.
    Communities {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        resolution: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Default)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// "train_frac,val_frac" — restricts pretraining to training edges and
    /// writes edge_split.bin (link-prediction mode).
    #[arg(long)]
    pub split: Option<String>,
    /// Re-execute a recorded run.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub alpha1: Option<f64>,
    #[arg(long)]
    pub alpha2: Option<f64>,
    #[arg(long)]
    pub alpha3: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub layer_type: Option<String>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Task {
    Classify,
    Cluster,
    Linkpred,
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Task::Classify => write!(f, "classify"),
            Task::Cluster => write!(f, "cluster"),
            Task::Linkpred => write!(f, "linkpred"),
        }
    }
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(value_enum)]
    pub task: Task,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub ckpt: Option<PathBuf>,
    /// Edge split file (required for linkpred).
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Cluster count override (defaults to the dataset's class count).
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AblateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// classify | cluster | linkpred | all
    #[arg(long, default_value = "linkpred")]
    pub task: String,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    /// Model-size sweep (hidden dims x layer counts) instead of the
    /// component grid.
    #[arg(long, default_value_t = false)]
    pub sweep: bool,
}

/// Pulls `--section.key=value` (or `--section.key value`) overrides out of
/// the raw argv so clap only sees known flags.
pub fn split_overrides(args: Vec<String>) -> (Vec<String>, Vec<(String, String)>) {
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    let mut it = args.into_iter().peekable();
    while let Some(a) = it.next() {
        let looks_dotted = a.starts_with("--")
            && a[2..].contains('.')
            && a[2..]
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '.' || c == '_' || c == '=' || c == '-');
        if looks_dotted {
            let body = &a[2..];
            if let Some((k, v)) = body.split_once('=') {
                overrides.push((k.to_string(), v.to_string()));
            } else if let Some(v) = it.peek() {
                let v = v.clone();
                it.next();
                overrides.push((body.to_string(), v));
            } else {
                overrides.push((body.to_string(), String::new()));
            }
        } else {
            rest.push(a);
        }
    }
    (rest, overrides)
}

/// Entry point used by `main`; argv excludes the program name.
pub fn run(argv: Vec<String>) -> Result<()> {
    let (plain, overrides) = split_overrides(argv);
    let mut full = vec!["gcgrl".to_string()];
    full.extend(plain);
    let cli = match Cli::try_parse_from(full) {
        Ok(cli) => cli,
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            print!("{e}");
            return Ok(());
        }
        Err(e) => return Err(Error::Usage(e.to_string())),
    };
    match cli.command {
        Command::Import {
            edges,
            features,
            labels,
            out,
        } => cmd_import(&edges, &features, labels.as_deref(), &out),
        Command::Train(args) => cmd_train(args, &overrides),
        Command::Embed { data, ckpt, out } => cmd_embed(&data, &ckpt, &out),
        Command::Eval(args) => cmd_eval(args, &overrides),
        Command::Ablate(args) => cmd_ablate(args, &overrides),
        Command::Communities {
            data,
            seed,
            resolution,
            out,
        } => cmd_communities(&data, seed, resolution, out.as_deref()),
    }
}

fn resolve_config(
    config_path: Option<&Path>,
    overrides: &[(String, String)],
    args: &TrainArgs,
) -> Result<TrainConfig> {
    let mut cfg = match config_path {
        Some(p) => TrainConfig::from_toml_file(p)?,
        None => TrainConfig::default(),
    };
    for (k, v) in overrides {
        cfg.apply_override(k, v)?;
    }
    if let Some(a) = args.alpha1 {
        cfg.loss.alpha1 = a;
    }
    if let Some(a) = args.alpha2 {
        cfg.loss.alpha2 = a;
    }
    if let Some(a) = args.alpha3 {
        cfg.loss.alpha3 = a;
    }
    if let Some(e) = args.epochs {
        cfg.train.epochs = e;
    }
    if let Some(lr) = args.lr {
        cfg.train.lr = lr;
    }
    if let Some(h) = args.hidden {
        cfg.model.hidden = h;
    }
    if let Some(l) = args.layers {
        cfg.model.layers = l;
    }
    if let Some(t) = &args.layer_type {
        cfg.model.layer_type = t.parse().map_err(Error::Config)?;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_split_fracs(s: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(Error::Usage(format!(
            "--split expects \"train_frac,val_frac\" (e.g. 0.85,0.05), got '{s}'"
        )));
    }
    let tr: f64 = parts[0]
        .trim()
        .parse()
        .map_err(|_| Error::Usage(format!("bad train fraction '{}'", parts[0])))?;
    let va: f64 = parts[1]
        .trim()
        .parse()
        .map_err(|_| Error::Usage(format!("bad val fraction '{}'", parts[1])))?;
    Ok((tr, va))
}

pub fn cmd_import(
    edges: &Path,
    features: &Path,
    labels: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let started = Instant::now();
    graphstore::import_text(edges, features, labels, out)?;
    let g = graphstore::load_graph(out)?;
    println!(
        "imported {} nodes, {} undirected edges, {} features, {} classes -> {}",
        g.num_nodes(),
        g.num_edges(),
        g.feature_dim(),
        g.num_classes(),
        out.display()
    );
    let mut m = RunManifest::new("import", edges, out, TrainConfig::default());
    m.duration_secs = started.elapsed().as_secs_f64();
    m.save(&out.join("manifest.json"))
}

pub fn cmd_train(mut args: TrainArgs, overrides: &[(String, String)]) -> Result<()> {
    let started = Instant::now();
    // manifest rerun: adopt the recorded configuration wholesale
    let mut link_split: Option<(f64, f64)> = None;
    let (cfg, data_dir, out_dir) = if let Some(mpath) = &args.manifest {
        let m = RunManifest::load(mpath)?;
        if m.command != "train" {
            return Err(Error::Usage(format!(
                "manifest records a '{}' run, not train",
                m.command
            )));
        }
        link_split = m.link_split;
        let out = args.out.take().unwrap_or(m.out_dir.clone());
        (m.config, m.data_dir, out)
    } else {
        let data = args
            .data
            .clone()
            .ok_or_else(|| Error::Usage("--data is required".into()))?;
        let out = args
            .out
            .clone()
            .ok_or_else(|| Error::Usage("--out is required".into()))?;
        if let Some(s) = &args.split {
            link_split = Some(parse_split_fracs(s)?);
        }
        let cfg = resolve_config(args.config.as_deref(), overrides, &args)?;
        (cfg, data, out)
    };

    let g = graphstore::load_graph(&data_dir)?;
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;

    let split: Option<EdgeSplit> = match link_split {
        Some((tr, va)) => Some(graphstore::split_edges(
            &g,
            tr,
            va,
            seeds::stream(cfg.seed, "split"),
        )?),
        None => None,
    };
    if let Some(s) = &split {
        graphstore::save_edge_split(s, &out_dir.join("edge_split.bin"))?;
    }

    let output = trainer::pretrain_with_checkpoints(
        &g,
        &cfg,
        split.as_ref().map(|s| s.train_edges.as_slice()),
        Some(&out_dir),
    )?;
    output.checkpoint.save(&out_dir.join("checkpoint.bin"))?;
    trainer::write_loss_csv(&output.history, &out_dir.join("loss.csv"))?;

    let mut m = RunManifest::new("train", &data_dir, &out_dir, cfg);
    m.link_split = link_split;
    if split.is_some() {
        m.split_file = Some(out_dir.join("edge_split.bin"));
    }
    m.duration_secs = started.elapsed().as_secs_f64();
    m.save(&out_dir.join("manifest.json"))?;

    let last = output.checkpoint.final_losses;
    println!(
        "trained {} epochs; final losses: nodeFRL {:.5} nodeCL {:.5} graphRL {:.5} edgeRL {:.5} total {:.5}",
        output.checkpoint.epoch, last.node_frl, last.node_cl, last.graph_rl, last.edge_rl, last.total
    );
    Ok(())
}

const EMB_MAGIC: &[u8; 8] = b"GCGRLEMB";

pub fn cmd_embed(data: &Path, ckpt: &Path, out: &Path) -> Result<()> {
    let started = Instant::now();
    let g = graphstore::load_graph(data)?;
    let checkpoint = Checkpoint::load(ckpt)?;
    let emb = trainer::embed(&checkpoint, &g)?;
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let file = std::fs::File::create(out).map_err(|e| Error::io(out, e))?;
    let mut w = std::io::BufWriter::new(file);
    let werr = |e: std::io::Error| Error::io(out, e);
    w.write_all(EMB_MAGIC).map_err(werr)?;
    w.write_all(&(emb.rows() as u64).to_le_bytes()).map_err(werr)?;
    w.write_all(&(emb.cols() as u64).to_le_bytes()).map_err(werr)?;
    for v in emb.iter() {
        w.write_all(&v.to_le_bytes()).map_err(werr)?;
    }
    w.flush().map_err(werr)?;
    println!("wrote {}x{} embeddings to {}", emb.rows(), emb.cols(), out.display());

    let mut m = RunManifest::new("embed", data, out, checkpoint.config.clone());
    m.checkpoint = Some(ckpt.to_path_buf());
    m.duration_secs = started.elapsed().as_secs_f64();
    m.save(&out.with_extension("manifest.json"))
}

/// Reads an embeddings file written by `cmd_embed`.
pub fn read_embeddings(path: &Path) -> Result<crate::tensornet::Tensor<f32>> {
    use std::io::Read;
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = std::io::BufReader::new(file);
    let rerr = |e: std::io::Error| Error::io(path, e);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(rerr)?;
    if &magic != EMB_MAGIC {
        return Err(Error::Format(format!("{} is not an embeddings file", path.display())));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8).map_err(rerr)?;
    let rows = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b8).map_err(rerr)?;
    let cols = u64::from_le_bytes(b8) as usize;
    let mut buf = vec![0u8; rows * cols * 4];
    r.read_exact(&mut buf).map_err(rerr)?;
    let data = buf
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Ok(crate::tensornet::Tensor::from_vec(rows, cols, data))
}

/// Evaluates one task; shared by `eval` and `ablate`.
pub fn evaluate_task(
    task: Task,
    g: &Graph,
    checkpoint: &Checkpoint,
    split: Option<&EdgeSplit>,
    runs: usize,
    seed: u64,
    k_override: Option<usize>,
    dataset_name: &str,
    ckpt_name: &str,
) -> Result<Vec<EvalReport>> {
    if runs == 0 {
        return Err(Error::Usage("--runs must be at least 1".into()));
    }
    let eval_seed = seeds::stream(seed, "eval");
    let run_seeds: Vec<u64> = (0..runs).map(|r| seeds::substream(eval_seed, r as u64)).collect();

    match task {
        Task::Classify => {
            let labels = g.labels().ok_or_else(|| {
                Error::InvalidArgument("classification needs labels; dataset has none".into())
            })?;
            let emb = trainer::embed(checkpoint, g)?;
            let mut accs = Vec::with_capacity(runs);
            for &rs in &run_seeds {
                let masks_owned;
                let masks: &[graphstore::SplitTag] = match g.split_masks() {
                    Some(m) => m,
                    None => {
                        masks_owned = evalharness::generate_splits(g.num_nodes(), rs);
                        &masks_owned
                    }
                };
                accs.push(evalharness::linear_probe(
                    &emb,
                    labels,
                    masks,
                    checkpoint.config.probe.c,
                    checkpoint.config.probe.epochs,
                    rs,
                )?);
            }
            Ok(vec![evalharness::aggregate(
                dataset_name,
                "classify",
                "accuracy",
                ckpt_name,
                &run_seeds,
                &accs,
            )?])
        }
        Task::Cluster => {
            let labels = g.labels().ok_or_else(|| {
                Error::InvalidArgument("clustering scores need labels; dataset has none".into())
            })?;
            let k = k_override.unwrap_or(g.num_classes());
            if k < 2 {
                return Err(Error::InvalidArgument(
                    "cluster count must be at least 2 (pass --k for unlabeled data)".into(),
                ));
            }
            let emb = trainer::embed(checkpoint, g)?;
            let mut nmis = Vec::with_capacity(runs);
            let mut aris = Vec::with_capacity(runs);
            for &rs in &run_seeds {
                let assign = evalharness::kmeans(&emb, k, rs, 10)?;
                nmis.push(evalharness::nmi(&assign, labels));
                aris.push(evalharness::ari(&assign, labels));
            }
            Ok(vec![
                evalharness::aggregate(dataset_name, "cluster", "nmi", ckpt_name, &run_seeds, &nmis)?,
                evalharness::aggregate(dataset_name, "cluster", "ari", ckpt_name, &run_seeds, &aris)?,
            ])
        }
        Task::Linkpred => {
            let split = split.ok_or_else(|| {
                Error::Usage(
                    "link prediction needs --split pointing at the edge_split.bin written by \
                     `train --split` (no edge split on disk)"
                        .into(),
                )
            })?;
            // embeddings must come from the training topology only
            let g_train = g.restrict_edges(&split.train_edges)?;
            let emb = trainer::embed(checkpoint, &g_train)?;
            let mut aucs = Vec::with_capacity(runs);
            for (r, &rs) in run_seeds.iter().enumerate() {
                let negs_owned;
                let negs: &[(u32, u32)] = if r == 0 {
                    &split.test_neg
                } else {
                    let mut rng = seeds::rng(rs);
                    negs_owned = graphstore::sample_non_edges(
                        g.num_nodes(),
                        g.edges(),
                        split.test_edges.len(),
                        &mut rng,
                    )?;
                    &negs_owned
                };
                aucs.push(evalharness::link_auc(&emb, &split.test_edges, negs)?);
            }
            Ok(vec![evalharness::aggregate(
                dataset_name,
                "linkpred",
                "auc",
                ckpt_name,
                &run_seeds,
                &aucs,
            )?])
        }
    }
}

fn dataset_name(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

pub fn cmd_eval(args: EvalArgs, _overrides: &[(String, String)]) -> Result<()> {
    let started = Instant::now();
    let (task, data, ckpt_path, split_path, runs, seed, k, out) =
        if let Some(mpath) = &args.manifest {
            let m = RunManifest::load(mpath)?;
            if m.command != "eval" {
                return Err(Error::Usage(format!(
                    "manifest records a '{}' run, not eval",
                    m.command
                )));
            }
            let task = match m.task.as_deref() {
                Some("classify") => Task::Classify,
                Some("cluster") => Task::Cluster,
                Some("linkpred") => Task::Linkpred,
                other => {
                    return Err(Error::Format(format!("manifest has bad task {other:?}")));
                }
            };
            let ckpt = m
                .checkpoint
                .clone()
                .ok_or_else(|| Error::Format("eval manifest lacks a checkpoint".into()))?;
            (
                task,
                m.data_dir.clone(),
                ckpt,
                m.split_file.clone(),
                m.runs,
                m.seed,
                None,
                args.out.clone().or(Some(m.out_dir.clone())),
            )
        } else {
            let data = args
                .data
                .clone()
                .ok_or_else(|| Error::Usage("--data is required".into()))?;
            let ckpt = args
                .ckpt
                .clone()
                .ok_or_else(|| Error::Usage("--ckpt is required".into()))?;
            (
                args.task,
                data,
                ckpt,
                args.split.clone(),
                args.runs,
                args.seed.unwrap_or(42),
                args.k,
                args.out.clone(),
            )
        };

    let g = graphstore::load_graph(&data)?;
    let checkpoint = Checkpoint::load(&ckpt_path)?;
    let split = match &split_path {
        Some(p) => Some(graphstore::load_edge_split(p)?),
        None => None,
    };
    let reports = evaluate_task(
        task,
        &g,
        &checkpoint,
        split.as_ref(),
        runs,
        seed,
        k,
        &dataset_name(&data),
        &ckpt_path.display().to_string(),
    )?;

    for r in &reports {
        println!("{}", serde_json::to_string_pretty(r).unwrap());
    }
    if let Some(out_dir) = &out {
        std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        let json_path = out_dir.join(format!("report_{task}.json"));
        let json = serde_json::to_string_pretty(&reports)
            .map_err(|e| Error::Format(format!("report serialization: {e}")))?;
        std::fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))?;
        let csv_path = out_dir.join(format!("report_{task}.csv"));
        let mut csv = String::from(EvalReport::csv_header());
        csv.push('\n');
        for r in &reports {
            csv.push_str(&r.csv_row());
            csv.push('\n');
        }
        std::fs::write(&csv_path, csv).map_err(|e| Error::io(&csv_path, e))?;

        let mut m = RunManifest::new("eval", &data, out_dir, checkpoint.config.clone());
        m.seed = seed;
        m.runs = runs;
        m.task = Some(task.to_string());
        m.checkpoint = Some(ckpt_path.clone());
        m.split_file = split_path.clone();
        m.duration_secs = started.elapsed().as_secs_f64();
        m.save(&out_dir.join(format!("manifest_eval_{task}.json")))?;
    }
    Ok(())
}

/// The four component configurations of the ablation grid, in order.
pub fn ablation_grid(base: &LossWeights) -> Vec<(&'static str, LossWeights)> {
    vec![
        (
            "none",
            LossWeights {
                alpha1: 0.0,
                alpha2: 0.0,
                alpha3: 0.0,
            },
        ),
        (
            "node_contr",
            LossWeights {
                alpha1: base.alpha1,
                alpha2: 0.0,
                alpha3: 0.0,
            },
        ),
        (
            "both_contr",
            LossWeights {
                alpha1: base.alpha1,
                alpha2: base.alpha2,
                alpha3: 0.0,
            },
        ),
        ("all", *base),
    ]
}

pub fn cmd_ablate(args: AblateArgs, overrides: &[(String, String)]) -> Result<()> {
    let started = Instant::now();
    let targs = TrainArgs {
        seed: args.seed,
        ..Default::default()
    };
    let base_cfg = {
        let mut c = resolve_config(args.config.as_deref(), overrides, &targs)?;
        if let Some(s) = args.seed {
            c.seed = s;
        }
        c
    };
    let tasks: Vec<Task> = match args.task.as_str() {
        "classify" => vec![Task::Classify],
        "cluster" => vec![Task::Cluster],
        "linkpred" => vec![Task::Linkpred],
        "all" => vec![Task::Classify, Task::Cluster, Task::Linkpred],
        other => {
            return Err(Error::Usage(format!(
                "unknown task '{other}' (expected classify|cluster|linkpred|all)"
            )));
        }
    };
    let g = graphstore::load_graph(&args.data)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let name = dataset_name(&args.data);

    let mut rows: Vec<String> = Vec::new();
    rows.push("config,task,metric,mean,ci95,runs".to_string());

    if args.sweep {
        // model-size sweep over hidden dims x encoder depth, classification
        for dim in [128usize, 256, 512, 1024, 2048] {
            for layers in [1usize, 2, 3] {
                let mut cfg = base_cfg.clone();
                cfg.model.hidden = dim;
                cfg.model.layers = layers;
                cfg.validate()?;
                let out = trainer::pretrain(&g, &cfg, None)?;
                let reports = evaluate_task(
                    Task::Classify,
                    &g,
                    &out.checkpoint,
                    None,
                    args.runs,
                    cfg.seed,
                    None,
                    &name,
                    "sweep",
                )?;
                for r in &reports {
                    rows.push(format!("dim{dim}_layers{layers},{}", csv_tail(r)));
                    println!("dim {dim} layers {layers}: {} {} = {:.4}", r.task, r.metric, r.mean);
                }
            }
        }
        let path = args.out.join("sweep.csv");
        std::fs::write(&path, rows.join("\n") + "\n").map_err(|e| Error::io(&path, e))?;
    } else {
        let needs_link = tasks.contains(&Task::Linkpred);
        let needs_full = tasks.iter().any(|t| *t != Task::Linkpred);
        let split = if needs_link {
            let s = graphstore::split_edges(&g, 0.85, 0.05, seeds::stream(base_cfg.seed, "split"))?;
            graphstore::save_edge_split(&s, &args.out.join("edge_split.bin"))?;
            Some(s)
        } else {
            None
        };
        for (label, weights) in ablation_grid(&base_cfg.loss_weights()) {
            let mut cfg = base_cfg.clone();
            cfg.loss.alpha1 = weights.alpha1;
            cfg.loss.alpha2 = weights.alpha2;
            cfg.loss.alpha3 = weights.alpha3;
            let full_ckpt = if needs_full {
                Some(trainer::pretrain(&g, &cfg, None)?.checkpoint)
            } else {
                None
            };
            let link_ckpt = if needs_link {
                let s = split.as_ref().unwrap();
                Some(trainer::pretrain(&g, &cfg, Some(&s.train_edges))?.checkpoint)
            } else {
                None
            };
            for &task in &tasks {
                let (ckpt, sp) = match task {
                    Task::Linkpred => (link_ckpt.as_ref().unwrap(), split.as_ref()),
                    _ => (full_ckpt.as_ref().unwrap(), None),
                };
                let reports = evaluate_task(
                    task,
                    &g,
                    ckpt,
                    sp,
                    args.runs,
                    cfg.seed,
                    None,
                    &name,
                    label,
                )?;
                for r in &reports {
                    rows.push(format!("{label},{}", csv_tail(r)));
                    println!("{label}: {} {} = {:.4}", r.task, r.metric, r.mean);
                }
            }
        }
        let path = args.out.join("ablation.csv");
        std::fs::write(&path, rows.join("\n") + "\n").map_err(|e| Error::io(&path, e))?;
    }

    let mut m = RunManifest::new("ablate", &args.data, &args.out, base_cfg);
    m.runs = args.runs;
    m.task = Some(args.task.clone());
    m.duration_secs = started.elapsed().as_secs_f64();
    m.save(&args.out.join("manifest.json"))
}

fn csv_tail(r: &EvalReport) -> String {
    format!(
        "{},{},{:.6},{},{}",
        r.task,
        r.metric,
        r.mean,
        r.ci95.map_or("n/a".to_string(), |c| format!("{c:.6}")),
        r.runs.len()
    )
}

pub fn cmd_communities(
    data: &Path,
    seed: u64,
    resolution: f64,
    out: Option<&Path>,
) -> Result<()> {
    let g = graphstore::load_graph(data)?;
    let p = crate::community::louvain(&g, resolution, seeds::stream(seed, "louvain"))?;
    let json = serde_json::to_string(&p.assignment)
        .map_err(|e| Error::Format(format!("partition serialization: {e}")))?;
    match out {
        Some(path) => {
            std::fs::write(path, &json).map_err(|e| Error::io(path, e))?;
            eprintln!(
                "{} communities, modularity {:.5} -> {}",
                p.num_communities,
                p.modularity,
                path.display()
            );
        }
        None => println!("{json}"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn override_extraction() {
        let (rest, ovr) = split_overrides(vec![
            "train".into(),
            "--data".into(),
            "d".into(),
            "--loss.alpha1=0.5".into(),
            "--model.hidden".into(),
            "64".into(),
            "--out".into(),
            "o".into(),
        ]);
        assert_eq!(rest, vec!["train", "--data", "d", "--out", "o"]);
        assert_eq!(
            ovr,
            vec![
                ("loss.alpha1".to_string(), "0.5".to_string()),
                ("model.hidden".to_string(), "64".to_string())
            ]
        );
    }

    #[test]
    fn split_frac_parsing() {
        assert_eq!(parse_split_fracs("0.85,0.05").unwrap(), (0.85, 0.05));
        assert!(parse_split_fracs("0.85").is_err());
        assert!(parse_split_fracs("a,b").is_err());
    }

    #[test]
    fn unknown_task_is_usage_error() {
        let err = run(vec!["eval".into(), "frobnicate".into()]).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn ablation_grid_is_the_four_point_progression() {
        let grid = ablation_grid(&LossWeights::default());
        assert_eq!(grid.len(), 4);
        assert_eq!(grid[0].1, LossWeights { alpha1: 0.0, alpha2: 0.0, alpha3: 0.0 });
        assert_eq!(grid[1].1, LossWeights { alpha1: 1.0, alpha2: 0.0, alpha3: 0.0 });
        assert_eq!(grid[2].1, LossWeights { alpha1: 1.0, alpha2: 1.0, alpha3: 0.0 });
        assert_eq!(grid[3].1, LossWeights::default());
    }
}
