//! Learnable state: layer weights, mask tokens, loss exponents, Adam moments.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Scalar, Tensor};
use crate::seeds;

/// θ value for which γ = 1 + softplus(θ) equals 2.
pub const THETA_FOR_GAMMA_2: f64 = 0.5413248546129181; // ln(e - 1)

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerType {
    Gcn,
    Gat,
    Mlp,
}

impl std::str::FromStr for LayerType {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gcn" => Ok(LayerType::Gcn),
            "gat" => Ok(LayerType::Gat),
            "mlp" => Ok(LayerType::Mlp),
            other => Err(format!("unknown layer type '{other}' (expected gcn|gat|mlp)")),
        }
    }
}

impl std::fmt::Display for LayerType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LayerType::Gcn => write!(f, "gcn"),
            LayerType::Gat => write!(f, "gat"),
            LayerType::Mlp => write!(f, "mlp"),
        }
    }
}

/// Shape of the network; echoed into checkpoints so `embed` can rebuild it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub layer_type: LayerType,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub heads: usize,
    pub dec_hidden_dim: usize,
    pub dropout: f64,
    pub attn_dropout: f64,
}

impl ArchConfig {
    /// Heads only shape GAT layers; other types behave as a single head.
    pub fn effective_heads(&self) -> usize {
        match self.layer_type {
            LayerType::Gat => self.heads,
            _ => 1,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.num_layers == 0 {
            return Err("model must have at least one encoder layer".into());
        }
        if self.hidden_dim == 0 || self.input_dim == 0 || self.dec_hidden_dim == 0 {
            return Err("model dimensions must be positive".into());
        }
        let h = self.effective_heads();
        if h == 0 {
            return Err("heads must be >= 1".into());
        }
        if self.hidden_dim % h != 0 || self.dec_hidden_dim % h != 0 {
            return Err(format!(
                "heads ({h}) must divide hidden ({}) and decoder hidden ({})",
                self.hidden_dim, self.dec_hidden_dim
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) || !(0.0..1.0).contains(&self.attn_dropout) {
            return Err("dropout rates must lie in [0, 1)".into());
        }
        Ok(())
    }
}

/// All learnable tensors in creation order, with paired Adam moments.
#[derive(Clone, Debug)]
pub struct ModelParams<T> {
    pub arch: ArchConfig,
    names: Vec<String>,
    tensors: Vec<Tensor<T>>,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
    pub adam_t: u64,
}

impl<T: Scalar> ModelParams<T> {
    /// Glorot-uniform layer weights, zero mask tokens, θ chosen so both loss
    /// exponents start at γ = 2.
    pub fn init(arch: &ArchConfig, seed: u64) -> Self {
        arch.validate().expect("invalid architecture");
        let mut rng = seeds::rng(seed);
        let mut p = ModelParams {
            arch: arch.clone(),
            names: Vec::new(),
            tensors: Vec::new(),
            m: Vec::new(),
            v: Vec::new(),
            adam_t: 0,
        };
        let heads = arch.effective_heads();
        let per_head_hidden = arch.hidden_dim / heads;
        let per_head_dec = arch.dec_hidden_dim / heads;

        for l in 0..arch.num_layers {
            let d_in = if l == 0 { arch.input_dim } else { arch.hidden_dim };
            p.add_layer(
                &format!("enc.{l}"),
                arch.layer_type,
                d_in,
                arch.hidden_dim,
                per_head_hidden,
                &mut rng,
            );
        }
        p.add_layer(
            "dec",
            arch.layer_type,
            arch.hidden_dim,
            arch.dec_hidden_dim,
            per_head_dec,
            &mut rng,
        );
        // projector back to feature space
        p.push_glorot("proj.w", arch.dec_hidden_dim, arch.input_dim, &mut rng);
        p.push("proj.bias", Tensor::zeros(1, arch.input_dim));

        p.push("mask.x", Tensor::zeros(1, arch.input_dim));
        p.push("mask.h", Tensor::zeros(1, arch.hidden_dim));
        p.push("gamma1.theta", Tensor::scalar(T::from_f64(THETA_FOR_GAMMA_2)));
        p.push("gamma2.theta", Tensor::scalar(T::from_f64(THETA_FOR_GAMMA_2)));
        p
    }

    fn add_layer(
        &mut self,
        prefix: &str,
        kind: LayerType,
        d_in: usize,
        d_out: usize,
        per_head: usize,
        rng: &mut impl Rng,
    ) {
        self.push_glorot(&format!("{prefix}.w"), d_in, d_out, rng);
        if kind == LayerType::Gat {
            let bound = (6.0 / (per_head as f64 + 1.0)).sqrt();
            self.push_uniform(&format!("{prefix}.a_src"), 1, d_out, bound, rng);
            self.push_uniform(&format!("{prefix}.a_dst"), 1, d_out, bound, rng);
        }
        self.push(&format!("{prefix}.bias"), Tensor::zeros(1, d_out));
        self.push(&format!("{prefix}.prelu"), Tensor::scalar(T::from_f64(0.25)));
    }

    fn push_glorot(&mut self, name: &str, rows: usize, cols: usize, rng: &mut impl Rng) {
        let bound = (6.0 / (rows as f64 + cols as f64)).sqrt();
        self.push_uniform(name, rows, cols, bound, rng);
    }

    fn push_uniform(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        bound: f64,
        rng: &mut impl Rng,
    ) {
        let data: Vec<T> = (0..rows * cols)
            .map(|_| T::from_f64(rng.random_range(-bound..bound)))
            .collect();
        self.push(name, Tensor::from_vec(rows, cols, data));
    }

    fn push(&mut self, name: &str, t: Tensor<T>) {
        let (r, c) = t.shape();
        self.names.push(name.to_string());
        self.tensors.push(t);
        self.m.push(Tensor::zeros(r, c));
        self.v.push(Tensor::zeros(r, c));
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn tensor_at(&self, i: usize) -> &Tensor<T> {
        &self.tensors[i]
    }

    pub fn tensor(&self, name: &str) -> &Tensor<T> {
        &self.tensors[self.index_of(name).unwrap_or_else(|| panic!("no parameter '{name}'"))]
    }

    pub(crate) fn entry_mut(&mut self, i: usize) -> (&mut Tensor<T>, &mut Tensor<T>, &mut Tensor<T>) {
        (&mut self.tensors[i], &mut self.m[i], &mut self.v[i])
    }

    pub fn moments_at(&self, i: usize) -> (&Tensor<T>, &Tensor<T>) {
        (&self.m[i], &self.v[i])
    }

    pub fn set_moments(&mut self, i: usize, m: Tensor<T>, v: Tensor<T>) {
        assert_eq!(m.shape(), self.tensors[i].shape());
        assert_eq!(v.shape(), self.tensors[i].shape());
        self.m[i] = m;
        self.v[i] = v;
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.names.iter().map(|n| n.as_str()).zip(self.tensors.iter())
    }

    /// Replaces the value of an existing parameter (used when loading
    /// checkpoints).
    pub fn set_tensor(&mut self, name: &str, t: Tensor<T>) {
        let i = self
            .index_of(name)
            .unwrap_or_else(|| panic!("no parameter '{name}'"));
        assert_eq!(t.shape(), self.tensors[i].shape(), "shape mismatch for '{name}'");
        self.tensors[i] = t;
    }

    /// Current value of a loss exponent γ = 1 + softplus(θ).
    pub fn gamma(&self, which: usize) -> f64 {
        let name = if which == 1 { "gamma1.theta" } else { "gamma2.theta" };
        let th = self.tensor(name).item().as_f64();
        1.0 + (th.max(0.0) + (-th.abs()).exp().ln_1p())
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams {
            arch: self.arch.clone(),
            names: self.names.clone(),
            tensors: self.tensors.iter().map(|t| t.cast()).collect(),
            m: self.m.iter().map(|t| t.cast()).collect(),
            v: self.v.iter().map(|t| t.cast()).collect(),
            adam_t: self.adam_t,
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.all_finite())
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }
}
