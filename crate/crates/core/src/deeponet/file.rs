//! Trained model on disk: `model.json` plus a `weights.f64` blob.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::Network;
use super::params::DeepONetParams;
use super::spec::DeepONetSpec;
use crate::blob::{self, ArrayRecord};
use crate::dataset::Scaler;
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;
const MANIFEST_NAME: &str = "model.json";
const WEIGHTS_NAME: &str = "weights.f64";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelManifest {
    pub format_version: u32,
    pub spec: DeepONetSpec,
    pub seed: u64,
    /// Loss the weights were trained with, e.g. `"dd+ses"`.
    pub loss: String,
    pub scaler: Scaler,
    /// Lattice nodes the network predicts, in output order.
    pub predicted_nodes: Vec<usize>,
    /// Trunk coordinates, `predicted_nodes.len() × coords`, already scaled.
    pub trunk: Vec<f64>,
    pub weights: ArrayRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub manifest: ModelManifest,
    pub params: DeepONetParams,
}

impl ModelFile {
    pub fn new(
        spec: DeepONetSpec,
        seed: u64,
        loss: impl Into<String>,
        scaler: Scaler,
        predicted_nodes: Vec<usize>,
        trunk: Vec<f64>,
        params: DeepONetParams,
    ) -> Self {
        let weights = ArrayRecord::new(WEIGHTS_NAME, vec![params.len()]);
        Self {
            manifest: ModelManifest {
                format_version: MODEL_FORMAT_VERSION,
                spec,
                seed,
                loss: loss.into(),
                scaler,
                predicted_nodes,
                trunk,
                weights,
            },
            params,
        }
    }

    pub fn network(&self) -> Result<Network> {
        Network::new(self.manifest.spec.clone())
    }

    fn validate(&self) -> Result<()> {
        let m = &self.manifest;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Model(format!(
                "unsupported model format version {}",
                m.format_version
            )));
        }
        let net = self.network()?;
        self.params.check(net.layout())?;
        let coords = m.spec.trunk.input_size();
        if m.trunk.len() != m.predicted_nodes.len() * coords {
            return Err(Error::Model(format!(
                "{} trunk values for {} nodes of {coords} coordinates",
                m.trunk.len(),
                m.predicted_nodes.len()
            )));
        }
        if m.scaler.n_vars() != m.spec.n_outputs {
            return Err(Error::Model(format!(
                "scaler has {} variables, network {} outputs",
                m.scaler.n_vars(),
                m.spec.n_outputs
            )));
        }
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        self.validate()?;
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        blob::write(dir, &self.manifest.weights, &self.params.values)?;
        let path = dir.join(MANIFEST_NAME);
        let text = serde_json::to_string_pretty(&self.manifest)?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_NAME);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: ModelManifest = serde_json::from_str(&text)?;
        let values = blob::read(dir, &manifest.weights)?;
        let file = Self {
            manifest,
            params: DeepONetParams { values },
        };
        file.validate()?;
        Ok(file)
    }
}
