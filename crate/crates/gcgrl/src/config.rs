//! Training configuration: TOML file + dotted CLI overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::augment::AugmentConfig;
use crate::error::Error;
use crate::objective::LossWeights;
use crate::tensornet::{AdamConfig, ArchConfig, LayerType};
use crate::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub layer_type: LayerType,
    pub hidden: usize,
    pub layers: usize,
    pub heads: usize,
    pub dec_hidden: usize,
    pub dropout: f64,
    pub attn_dropout: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            layer_type: LayerType::Gat,
            hidden: 1024,
            layers: 2,
            heads: 4,
            dec_hidden: 512,
            dropout: 0.1,
            attn_dropout: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    /// 0 writes the checkpoint only at the end.
    pub checkpoint_every: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            epochs: 1000,
            lr: 1e-3,
            weight_decay: 1e-5,
            checkpoint_every: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnchorSection {
    pub mask_ratio: f64,
}

impl Default for AnchorSection {
    fn default() -> Self {
        AnchorSection { mask_ratio: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugSection {
    pub k: usize,
    pub p_node: f64,
    pub p_edge: f64,
    pub r_feat: f64,
}

impl Default for AugSection {
    fn default() -> Self {
        AugSection {
            k: 2,
            p_node: 0.1,
            p_edge: 0.2,
            r_feat: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossSection {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub neg_edge_ratio: f64,
    pub temperature: f64,
}

impl Default for LossSection {
    fn default() -> Self {
        LossSection {
            alpha1: 1.0,
            alpha2: 1.0,
            alpha3: 1.0,
            neg_edge_ratio: 1.0,
            temperature: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairsSection {
    pub rho: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

impl Default for PairsSection {
    fn default() -> Self {
        PairsSection {
            rho: 0.5,
            n_pos: 1,
            n_neg: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LouvainSection {
    pub resolution: f64,
}

impl Default for LouvainSection {
    fn default() -> Self {
        LouvainSection { resolution: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub row_normalize: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSection {
    /// Inverse regularization strength of the linear probe (reg = 1/C).
    pub c: f64,
    pub epochs: usize,
}

impl Default for ProbeSection {
    fn default() -> Self {
        ProbeSection { c: 1.0, epochs: 500 }
    }
}

/// Every tunable of the pipeline. Defaults are the toolkit defaults; a TOML
/// file and dotted CLI overrides (`--loss.alpha1=0.5`) refine them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    pub model: ModelSection,
    pub train: TrainSection,
    pub anchor: AnchorSection,
    pub aug: AugSection,
    pub loss: LossSection,
    pub pairs: PairsSection,
    pub louvain: LouvainSection,
    pub data: DataSection,
    pub probe: ProbeSection,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 42,
            model: ModelSection::default(),
            train: TrainSection::default(),
            anchor: AnchorSection::default(),
            aug: AugSection::default(),
            loss: LossSection::default(),
            pairs: PairsSection::default(),
            louvain: LouvainSection::default(),
            data: DataSection::default(),
            probe: ProbeSection::default(),
        }
    }
}

impl TrainConfig {
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Applies one `section.key=value` override.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<()> {
        let mut tree = serde_json::to_value(&*self)
            .map_err(|e| Error::Config(format!("config serialization: {e}")))?;
        let parts: Vec<&str> = key.split('.').collect();
        set_path(&mut tree, &parts, key, value)?;
        *self = serde_json::from_value(tree)
            .map_err(|e| Error::Config(format!("invalid value for '{key}': {e}")))?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.train.epochs == 0 {
            return Err(Error::Config("train.epochs must be at least 1".into()));
        }
        if self.train.lr <= 0.0 || !self.train.lr.is_finite() {
            return Err(Error::Config("train.lr must be positive".into()));
        }
        if self.train.weight_decay < 0.0 {
            return Err(Error::Config("train.weight_decay must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.anchor.mask_ratio) || self.anchor.mask_ratio <= 0.0 {
            return Err(Error::Config("anchor.mask_ratio must lie in (0,1)".into()));
        }
        if self.aug.k == 0 {
            return Err(Error::Config("aug.k must be at least 1".into()));
        }
        for (name, v) in [("aug.p_node", self.aug.p_node), ("aug.p_edge", self.aug.p_edge)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0,1)")));
            }
        }
        if !(0.0..1.0).contains(&self.aug.r_feat) {
            return Err(Error::Config("aug.r_feat must lie in [0,1)".into()));
        }
        self.loss_weights().validate()?;
        if self.loss.neg_edge_ratio <= 0.0 {
            return Err(Error::Config("loss.neg_edge_ratio must be positive".into()));
        }
        if self.loss.temperature <= 0.0 {
            return Err(Error::Config("loss.temperature must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.pairs.rho) || self.pairs.rho <= 0.0 {
            return Err(Error::Config("pairs.rho must lie in (0,1]".into()));
        }
        if self.louvain.resolution <= 0.0 {
            return Err(Error::Config("louvain.resolution must be positive".into()));
        }
        self.arch_for(1)
            .validate()
            .map_err(Error::Config)?;
        Ok(())
    }

    pub fn arch_for(&self, input_dim: usize) -> ArchConfig {
        ArchConfig {
            layer_type: self.model.layer_type,
            input_dim,
            hidden_dim: self.model.hidden,
            num_layers: self.model.layers,
            heads: self.model.heads,
            dec_hidden_dim: self.model.dec_hidden,
            dropout: self.model.dropout,
            attn_dropout: self.model.attn_dropout,
        }
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            alpha1: self.loss.alpha1,
            alpha2: self.loss.alpha2,
            alpha3: self.loss.alpha3,
        }
    }

    pub fn augment_config(&self) -> AugmentConfig {
        AugmentConfig {
            k: self.aug.k,
            p_node: self.aug.p_node,
            p_edge: self.aug.p_edge,
            r_feat: self.aug.r_feat,
        }
    }

    pub fn adam_config(&self) -> AdamConfig {
        AdamConfig {
            lr: self.train.lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: self.train.weight_decay,
        }
    }
}

fn set_path(
    node: &mut serde_json::Value,
    parts: &[&str],
    key: &str,
    value: &str,
) -> Result<()> {
    let Some((head, rest)) = parts.split_first() else {
        return Err(Error::Config(format!("empty config key '{key}'")));
    };
    if !node.is_object() {
        return Err(Error::Config(format!("config key '{key}' does not name a field")));
    }
    let slot = node
        .get_mut(*head)
        .ok_or_else(|| Error::Config(format!("unknown config key '{key}'")))?;
    if rest.is_empty() {
        *slot = parse_value(value);
        Ok(())
    } else {
        set_path(slot, rest, key, value)
    }
}

fn parse_value(s: &str) -> serde_json::Value {
    if let Ok(b) = s.parse::<bool>() {
        return serde_json::Value::Bool(b);
    }
    if let Ok(i) = s.parse::<u64>() {
        return serde_json::Value::Number(i.into());
    }
    if let Ok(f) = s.parse::<f64>() {
        if let Some(n) = serde_json::Number::from_f64(f) {
            return serde_json::Value::Number(n);
        }
    }
    serde_json::Value::String(s.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        TrainConfig::default().validate().unwrap();
    }

    #[test]
    fn toml_round_trip_and_partial_files() {
        let cfg: TrainConfig =
            toml::from_str("[loss]\nalpha3 = 0.25\n[model]\nhidden = 64\nheads = 2\ndec_hidden = 32\n")
                .unwrap();
        assert_eq!(cfg.loss.alpha3, 0.25);
        assert_eq!(cfg.model.hidden, 64);
        assert_eq!(cfg.train.epochs, 1000); // untouched default
    }

    #[test]
    fn dotted_overrides() {
        let mut cfg = TrainConfig::default();
        cfg.apply_override("loss.alpha1", "0.5").unwrap();
        cfg.apply_override("model.layer_type", "gcn").unwrap();
        cfg.apply_override("data.row_normalize", "true").unwrap();
        cfg.apply_override("seed", "7").unwrap();
        assert_eq!(cfg.loss.alpha1, 0.5);
        assert_eq!(cfg.model.layer_type, LayerType::Gcn);
        assert!(cfg.data.row_normalize);
        assert_eq!(cfg.seed, 7);
        assert!(cfg.apply_override("loss.bogus", "1").is_err());
        assert!(cfg.apply_override("model.hidden", "not_a_number").is_err());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = TrainConfig::default();
        cfg.train.epochs = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = TrainConfig::default();
        cfg.anchor.mask_ratio = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = TrainConfig::default();
        cfg.loss.alpha2 = -0.1;
        assert!(cfg.validate().is_err());
        let mut cfg = TrainConfig::default();
        cfg.model.hidden = 10; // not divisible by 4 heads
        assert!(cfg.validate().is_err());
    }
}
