use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::network::NetworkState;
use super::NetworkSpec;
use crate::error::{Error, Result};

const FORMAT: &str = "ngf-checkpoint";
const VERSION: u32 = 1;

/// Versioned JSON dump of a network spec and all of its parameters.
/// Floats are written in shortest round-trip form, so save/load is exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    format: String,
    version: u32,
    pub spec: NetworkSpec,
    pub weights: Vec<Array2<f64>>,
    pub coeffs: Vec<Vec<f64>>,
}

impl Checkpoint {
    pub fn new(spec: &NetworkSpec, state: &NetworkState) -> Self {
        Self {
            format: FORMAT.to_owned(),
            version: VERSION,
            spec: spec.clone(),
            weights: state.weights.clone(),
            coeffs: state.coeffs.clone(),
        }
    }

    pub fn state(&self) -> NetworkState {
        NetworkState::new(self.weights.clone(), self.coeffs.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.format != FORMAT {
            return Err(Error::invalid(format!("not a checkpoint (format {:?})", ck.format)));
        }
        if ck.version != VERSION {
            return Err(Error::invalid(format!("unsupported checkpoint version {}", ck.version)));
        }
        ck.spec.validate()?;
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
