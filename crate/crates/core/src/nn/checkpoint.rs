use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::NnError;

const FORMAT: &str = "kdnav-checkpoint";
const VERSION: u32 = 1;

/// JSON container for a model plus the context needed to reproduce it.
/// Floats are written in shortest round-trip form, so loading restores the
/// parameters bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint<M> {
    pub format: String,
    pub version: u32,
    /// `expert`, `policy` or `value`.
    pub role: String,
    pub seed: u64,
    pub metadata: Map<String, Value>,
    pub model: M,
}

impl<M: Serialize + DeserializeOwned> Checkpoint<M> {
    pub fn new(role: &str, seed: u64, model: M) -> Self {
        Self {
            format: FORMAT.into(),
            version: VERSION,
            role: role.into(),
            seed,
            metadata: Map::new(),
            model,
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.metadata.insert(key.into(), value.into());
        self
    }

    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        let text = serde_json::to_string(self).map_err(|e| NnError::Checkpoint {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        let err = |msg: String| NnError::Checkpoint {
            path: path.display().to_string(),
            msg,
        };
        let text = fs::read_to_string(path)?;
        let ckpt: Self = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        if ckpt.format != FORMAT {
            return Err(err(format!("unknown format '{}'", ckpt.format)));
        }
        if ckpt.version != VERSION {
            return Err(err(format!("unsupported version {}", ckpt.version)));
        }
        Ok(ckpt)
    }

    pub fn load_role(path: &Path, role: &str) -> Result<Self, NnError> {
        let ckpt = Self::load(path)?;
        if ckpt.role != role {
            return Err(NnError::Checkpoint {
                path: path.display().to_string(),
                msg: format!("expected a {role} checkpoint, found {}", ckpt.role),
            });
        }
        Ok(ckpt)
    }
}
