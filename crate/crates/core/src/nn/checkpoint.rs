//! Versioned JSON checkpoints.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::Network;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "attnet-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    network: Network,
}

pub fn checkpoint_to_string(net: &Network) -> Result<String> {
    let ck = Checkpoint {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        network: net.clone(),
    };
    Ok(serde_json::to_string(&ck)?)
}

pub fn checkpoint_from_str(s: &str) -> Result<Network> {
    let head: serde_json::Value = serde_json::from_str(s)?;
    if head.get("format").and_then(|f| f.as_str()) != Some(CHECKPOINT_FORMAT) {
        return Err(Error::Checkpoint("not a network checkpoint".into()));
    }
    match head.get("version").and_then(|v| v.as_u64()) {
        Some(v) if v == CHECKPOINT_VERSION as u64 => {}
        Some(v) => return Err(Error::Checkpoint(format!("unsupported checkpoint version {v}"))),
        None => return Err(Error::Checkpoint("checkpoint has no version".into())),
    }
    let ck: Checkpoint = serde_json::from_value(head)?;
    ck.network.cfg.validate()?;
    if ck.network.params.count() != ck.network.cfg.param_count() {
        return Err(Error::Checkpoint("parameter tensors do not match the stored configuration".into()));
    }
    Ok(ck.network)
}

pub fn save_checkpoint(net: &Network, path: &Path) -> Result<()> {
    fs::write(path, checkpoint_to_string(net)?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Network> {
    let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_str(&s)
}
