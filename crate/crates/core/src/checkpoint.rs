//! Versioned JSON checkpoints, written atomically.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::state::FlowState;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    /// Full state: blobs, time, viscosity, kernel and the random-stream
    /// position `(seed, step)`.
    pub state: FlowState,
    /// The configuration that produced the state.
    pub config: RunConfig,
    /// Position of the seed in `config.seeds`.
    pub seed_index: usize,
}

impl Checkpoint {
    pub fn new(state: FlowState, config: RunConfig, seed_index: usize) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            state,
            config,
            seed_index,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, serde_json::to_string(self)?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        let found = value
            .get("schema_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::Config(format!("{} is not a checkpoint", path.display())))?;
        if found != SCHEMA_VERSION as u64 {
            return Err(Error::SchemaMismatch {
                found: found.min(u32::MAX as u64) as u32,
                expected: SCHEMA_VERSION,
            });
        }
        Ok(serde_json::from_value(value)?)
    }
}

/// Write through a sibling temporary file and rename over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Mode;
    use crate::initial::{discretize, PatchSpec};

    fn config() -> RunConfig {
        RunConfig::from_json(r#"{"mode": "euler"}"#).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = discretize(&PatchSpec::standard(50)).unwrap();
        s.time = 0.1 + 0.2;
        s.stream.step = 3;
        let c = Checkpoint::new(s, config(), 0);
        let p = dir.path().join("c.json");
        c.save(&p).unwrap();
        let back = Checkpoint::load(&p).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.config.mode, Mode::Euler);
        assert!(!dir.path().join("c.json.tmp").exists());
    }

    #[test]
    fn schema_mismatch_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let s = discretize(&PatchSpec::standard(5)).unwrap();
        let mut c = Checkpoint::new(s, config(), 0);
        c.schema_version = 99;
        let p = dir.path().join("c.json");
        c.save(&p).unwrap();
        let e = Checkpoint::load(&p).unwrap_err();
        assert!(matches!(e, Error::SchemaMismatch { found: 99, expected: 1 }));
        assert_eq!(e.exit_code(), 2);
    }
}
