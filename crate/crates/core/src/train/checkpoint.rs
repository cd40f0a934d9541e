//! Checkpoints: a weight file plus a JSON sidecar with training metadata.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netgraph::{ArchConfig, WeightStore};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub step: u64,
    pub epoch: usize,
    pub config_hash: String,
    pub arch: ArchConfig,
}

/// `weights.safetensors` → `weights.json`.
pub fn sidecar_path(weights_path: &Path) -> PathBuf {
    weights_path.with_extension("json")
}

pub fn save_checkpoint(path: impl AsRef<Path>, weights: &WeightStore, meta: &CheckpointMeta) -> Result<()> {
    let path = path.as_ref();
    weights.save(path)?;
    let side = sidecar_path(path);
    std::fs::write(&side, serde_json::to_string_pretty(meta)?).map_err(|e| Error::io(&side, e))
}

/// Loads weights and, when present, the sidecar.
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(WeightStore, Option<CheckpointMeta>)> {
    let path = path.as_ref();
    let weights = WeightStore::load(path)?;
    let side = sidecar_path(path);
    let meta = if side.is_file() {
        let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        Some(serde_json::from_str(&text)?)
    } else {
        None
    };
    Ok((weights, meta))
}
