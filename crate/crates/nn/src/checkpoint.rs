use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adam::Adam;
use crate::error::NnError;
use crate::matrix::Matrix;
use crate::params::ParamStore;

pub const CHECKPOINT_FORMAT: &str = "ffevss-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

/// Named parameter groups, optimizer states, RNG state and free-form metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub groups: BTreeMap<String, Vec<NamedTensor>>,
    #[serde(default)]
    pub optimizers: BTreeMap<String, Adam>,
    #[serde(default)]
    pub rng: Option<ChaCha8Rng>,
    #[serde(default)]
    pub meta: serde_json::Value,
}

impl Default for Checkpoint {
    fn default() -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            groups: BTreeMap::new(),
            optimizers: BTreeMap::new(),
            rng: None,
            meta: serde_json::Value::Null,
        }
    }
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put_store(&mut self, group: &str, store: &ParamStore) {
        let tensors = store
            .entries()
            .map(|(name, m)| NamedTensor {
                name: name.to_string(),
                rows: m.rows,
                cols: m.cols,
                values: m.data.clone(),
            })
            .collect();
        self.groups.insert(group.to_string(), tensors);
    }

    /// Overwrites `store` values from a group; names and shapes must match.
    pub fn load_store(&self, group: &str, store: &mut ParamStore) -> Result<(), NnError> {
        let tensors = self
            .groups
            .get(group)
            .ok_or_else(|| NnError::Checkpoint(format!("group {group} absent")))?;
        if tensors.len() != store.len() {
            return Err(NnError::Checkpoint(format!(
                "group {group}: {} tensors, model expects {}",
                tensors.len(),
                store.len()
            )));
        }
        for t in tensors {
            let id = store
                .find(&t.name)
                .ok_or_else(|| NnError::Checkpoint(format!("unknown tensor {}", t.name)))?;
            let current = store.value(id);
            if current.shape() != (t.rows, t.cols) || t.values.len() != t.rows * t.cols {
                return Err(NnError::Checkpoint(format!(
                    "tensor {}: shape {}x{} does not match {:?}",
                    t.name,
                    t.rows,
                    t.cols,
                    current.shape()
                )));
            }
            *store.value_mut(id) = Matrix::from_vec(t.rows, t.cols, t.values.clone());
        }
        store.check_finite()
    }

    pub fn to_json(&self) -> Result<String, NnError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, NnError> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(NnError::Checkpoint(format!(
                "unrecognized format {:?}",
                ck.format
            )));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(NnError::Checkpoint(format!(
                "unsupported version {}",
                ck.version
            )));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
