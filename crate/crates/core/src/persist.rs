//! Self-describing JSON model files.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ModelConfig;
use crate::data::{MfDataset, Standardization};
use crate::embedding::PriorEncoding;
use crate::error::{Error, Result};
use crate::gp::TrainedModel;
use crate::multifidelity::{EnsembleModel, Surrogate};

pub const SCHEMA_VERSION: u32 = 1;

/// Summary of the training data a model was fitted to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub rows: usize,
    pub columns: Vec<String>,
    /// SHA-256 of the column names and the exact bits of every value.
    pub sha256: String,
}

impl Fingerprint {
    pub fn of(data: &MfDataset, columns: &[String]) -> Self {
        let mut h = Sha256::new();
        for c in columns {
            h.update((c.len() as u64).to_le_bytes());
            h.update(c.as_bytes());
        }
        let inp = &data.inputs;
        for i in 0..data.len() {
            for v in &inp.x[i] {
                h.update(v.to_bits().to_le_bytes());
            }
            for v in &inp.t[i] {
                h.update((*v as u64).to_le_bytes());
            }
            h.update((inp.s[i] as u64).to_le_bytes());
            match &inp.zeta[i] {
                Some(z) => {
                    h.update([1u8]);
                    for v in z {
                        h.update(v.to_bits().to_le_bytes());
                    }
                }
                None => h.update([0u8]),
            }
            h.update(data.y[i].to_bits().to_le_bytes());
        }
        let sha256 = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
        Self { rows: data.len(), columns: columns.to_vec(), sha256 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelKind {
    Deterministic,
    Ensemble { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub kind: ModelKind,
    pub config: ModelConfig,
    /// Parameter names and values in layout order.
    pub parameters: Vec<(String, f64)>,
    /// Seed of the random prior encoding, if one is used.
    pub encoding_seed: Option<u64>,
    pub fingerprint: Fingerprint,
    pub standardization: Standardization,
    pub data: MfDataset,
}

impl ModelFile {
    /// Captures `model`; `columns` names the dataset columns it was
    /// trained on.
    pub fn from_surrogate(model: &Surrogate, columns: &[String]) -> Self {
        let (kind, layout_names) = match model {
            Surrogate::Deterministic(m) => (ModelKind::Deterministic, m.layout().names()),
            Surrogate::Ensemble(m) => (ModelKind::Ensemble { seed: m.seed }, m.core.layout.names()),
        };
        let config = model.config().clone();
        let encoding_seed = match config.encoding {
            PriorEncoding::RandomMatrix { seed, .. } => Some(seed),
            _ => None,
        };
        Self {
            schema_version: SCHEMA_VERSION,
            kind,
            parameters: layout_names.into_iter().zip(model.theta().iter().copied()).collect(),
            encoding_seed,
            fingerprint: Fingerprint::of(model.data(), columns),
            standardization: model.standardization().clone(),
            data: model.data().clone(),
            config,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::ModelFile(e.to_string()))
    }

    /// Parses a model file; a different schema version or a data section
    /// that does not match its fingerprint is an error.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::ModelFile(e.to_string()))?;
        match value.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == SCHEMA_VERSION as u64 => {}
            Some(v) => {
                return Err(Error::ModelFile(format!(
                    "schema version {v} is not supported (expected {SCHEMA_VERSION})"
                )))
            }
            None => return Err(Error::ModelFile("missing schema version".into())),
        }
        let file: ModelFile = serde_json::from_value(value).map_err(|e| Error::ModelFile(e.to_string()))?;
        let fp = Fingerprint::of(&file.data, &file.fingerprint.columns);
        if fp != file.fingerprint {
            return Err(Error::ModelFile("training data does not match its fingerprint".into()));
        }
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::ModelFile(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::ModelFile(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Rebuilds the fitted model.
    pub fn to_surrogate(&self) -> Result<Surrogate> {
        let theta: Vec<f64> = self.parameters.iter().map(|(_, v)| *v).collect();
        let st = Some(self.standardization.clone());
        Ok(match self.kind {
            ModelKind::Deterministic => {
                Surrogate::Deterministic(TrainedModel::from_theta(&self.config, &self.data, &theta, st)?)
            }
            ModelKind::Ensemble { seed } => {
                Surrogate::Ensemble(EnsembleModel::from_theta(&self.config, &self.data, &theta, st, seed)?)
            }
        })
    }

    /// Checks that a dataset supplies the columns the model was fitted on.
    pub fn check_columns(&self, columns: &[String]) -> Result<()> {
        if columns != self.fingerprint.columns.as_slice() {
            return Err(Error::ModelFile(format!(
                "dataset columns {columns:?} differ from the model's {:?}",
                self.fingerprint.columns
            )));
        }
        Ok(())
    }
}
