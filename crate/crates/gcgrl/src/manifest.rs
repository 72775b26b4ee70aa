//! Run manifests: everything needed to reproduce a command bit-exactly.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::TrainConfig;
use crate::error::Error;
use crate::Result;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub toolkit_version: String,
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub runs: usize,
    pub config: TrainConfig,
    /// (train_frac, val_frac) when the command computed an edge split.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub link_split: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub task: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub checkpoint: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub split_file: Option<PathBuf>,
    pub duration_secs: f64,
    pub created_unix: u64,
}

impl RunManifest {
    pub fn new(command: &str, data_dir: &Path, out_dir: &Path, config: TrainConfig) -> Self {
        RunManifest {
            command: command.to_string(),
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            data_dir: data_dir.to_path_buf(),
            out_dir: out_dir.to_path_buf(),
            seed: config.seed,
            runs: 1,
            config,
            link_split: None,
            task: None,
            checkpoint: None,
            split_file: None,
            duration_secs: 0.0,
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    /// Atomic write (temp file + rename) so partially-written manifests are
    /// never observed.
    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Format(format!("manifest serialization: {e}")))?;
        let tmp = path.with_extension("manifest.tmp");
        std::fs::write(&tmp, json).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::new(
            "train",
            Path::new("data/x"),
            dir.path(),
            TrainConfig::default(),
        );
        m.link_split = Some((0.85, 0.05));
        let path = dir.path().join("manifest.json");
        m.save(&path).unwrap();
        let back = RunManifest::load(&path).unwrap();
        assert_eq!(back.command, "train");
        assert_eq!(back.link_split, Some((0.85, 0.05)));
        assert_eq!(back.config, m.config);
    }
}
