//! JSON checkpoints of a Lagrangian state.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

use super::config::{SolverConfig, Variant};
use super::reference::ReferenceProfile;
use super::state::{LagState, Mode};

/// Serialized state with the hash of the configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub t: f64,
    pub theta: Vec<f64>,
    pub theta_t: Vec<f64>,
    pub mode: Mode,
    pub variant: Variant,
    /// Hex SHA-256 of the canonical JSON of the solver configuration and variant.
    pub config_hash: String,
    pub reference: serde_json::Value,
}

/// Hex SHA-256 of the canonical JSON of `config` and `variant`.
pub fn config_hash(config: &SolverConfig, variant: &Variant) -> String {
    let doc = serde_json::json!({"solver": config, "variant": variant});
    let digest = Sha256::digest(doc.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl Checkpoint {
    /// Checkpoint of `state` produced under `config`.
    pub fn new(state: &LagState, config: &SolverConfig, reference: &ReferenceProfile) -> Self {
        Self {
            t: state.t,
            theta: state.theta.clone(),
            theta_t: state.theta_t.clone(),
            mode: state.mode,
            variant: state.variant,
            config_hash: config_hash(config, &state.variant),
            reference: reference.descriptor(),
        }
    }

    /// The stored state.
    pub fn state(&self) -> LagState {
        LagState {
            t: self.t,
            theta: self.theta.clone(),
            theta_t: self.theta_t.clone(),
            mode: self.mode,
            variant: self.variant,
        }
    }

    /// Writes the checkpoint as pretty JSON.
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Reads a checkpoint written by [`Checkpoint::save`].
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }
}
