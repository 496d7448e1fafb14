use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SearchState;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope {
    format: String,
    version: u32,
    state: SearchState,
}

const FORMAT: &str = "msnas-search-state";

/// Writes `state` as versioned JSON (written to a temporary file, then renamed).
pub fn save_checkpoint(state: &SearchState, path: &Path) -> Result<()> {
    let env = Envelope { format: FORMAT.into(), version: CHECKPOINT_VERSION, state: state.clone() };
    let text = serde_json::to_string_pretty(&env).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<SearchState> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    if value.get("format").and_then(|f| f.as_str()) != Some(FORMAT) {
        return Err(Error::Checkpoint(format!("{} is not a search checkpoint", path.display())));
    }
    let version = value.get("version").and_then(|v| v.as_u64());
    if version != Some(CHECKPOINT_VERSION as u64) {
        return Err(Error::Checkpoint(format!("unsupported checkpoint version {version:?}")));
    }
    let env: Envelope = serde_json::from_value(value).map_err(|e| Error::Checkpoint(e.to_string()))?;
    Ok(env.state)
}
