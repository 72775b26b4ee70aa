//! Self-supervised graph representation learning toolkit.
//!
//! Pretrains node embeddings on a single graph by combining four objectives:
//! masked feature reconstruction, edge reconstruction, community-aware node
//! contrastive learning, and graph-level contrastive learning across augmented
//! views. Trained embeddings are evaluated on node classification (linear
//! probe), node clustering (K-Means + NMI/ARI), and link prediction (AUC).
//!
//! The crate is organized along the pipeline:
//!
//! - [`graphstore`]: dataset format, loading, validation, edge splits
//! - [`community`]: Louvain modularity optimization and contrastive pair sampling
//! - [`augment`]: anchor and augmented view construction
//! - [`tensornet`]: dense/sparse kernels, GNN layers, reverse-mode autodiff, Adam
//! - [`objective`]: the four loss terms and their weighted combination
//! - [`trainer`]: the pretraining loop, checkpointing, embedding export
//! - [`evalharness`]: downstream metrics with multi-run aggregation
//! - [`cli`]: command implementations behind the `gcgrl` binary

pub mod augment;
pub mod cli;
pub mod community;
pub mod config;
pub mod error;
pub mod evalharness;
pub mod graphstore;
pub mod manifest;
pub mod objective;
pub mod seeds;
pub mod synth;
pub mod tensornet;
pub mod trainer;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
