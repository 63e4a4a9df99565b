use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{TrainConfig, Tree};
use crate::{Constraint, CostScale, Error, Execution, ObjectiveSet, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;
const MODEL_FORMAT: &str = "alrank-model";

/// How the per-round gradient was assembled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GuidanceSummary {
    Unconstrained,
    Augmented {
        mu: f64,
        constraints: Vec<Constraint>,
        scales: CostScale,
    },
    Linear {
        primary_weight: f64,
        weights: Vec<(String, f64)>,
        scales: CostScale,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub objectives: ObjectiveSet,
    pub guidance: GuidanceSummary,
    pub train_config: TrainConfig,
    /// SHA-256 over objectives, guidance and training config.
    pub config_hash: String,
}

impl ModelMeta {
    pub fn new(objectives: ObjectiveSet, guidance: GuidanceSummary, train_config: TrainConfig) -> Self {
        let config_hash = config_hash(&objectives, &guidance, &train_config);
        ModelMeta {
            objectives,
            guidance,
            train_config,
            config_hash,
        }
    }
}

fn config_hash(objectives: &ObjectiveSet, guidance: &GuidanceSummary, config: &TrainConfig) -> String {
    let canonical = serde_json::to_string(&(objectives, guidance, config)).expect("serializable");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

/// `predict(x) = Σ_trees learning_rate · tree(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoosterModel {
    pub feature_count: usize,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
    pub meta: ModelMeta,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    checksum: String,
    model: BoosterModel,
}

impl BoosterModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut score = 0.0;
        for tree in &self.trees {
            score += self.learning_rate * tree.predict(row);
        }
        score
    }

    /// Model restricted to its first `n` trees.
    pub fn truncated(&self, n: usize) -> BoosterModel {
        BoosterModel {
            trees: self.trees[..n.min(self.trees.len())].to_vec(),
            ..self.clone()
        }
    }

    fn checksum(&self) -> String {
        let body = serde_json::to_string(self).expect("serializable");
        hex::encode(Sha256::digest(body.as_bytes()))
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_FORMAT_VERSION,
            checksum: self.checksum(),
            model: self.clone(),
        };
        let mut text = serde_json::to_string_pretty(&file).expect("serializable");
        text.push('\n');
        text
    }

    /// Parses a model file, rejecting it unless the format, version,
    /// checksum and config hash all match.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|_| Error::ModelCorrupted)?;
        if file.format != MODEL_FORMAT || file.version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelCorrupted);
        }
        let model = file.model;
        let meta = &model.meta;
        if model.checksum() != file.checksum
            || config_hash(&meta.objectives, &meta.guidance, &meta.train_config) != meta.config_hash
        {
            return Err(Error::ModelCorrupted);
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::file(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_json(&text)
    }
}

/// Scores every row of a row-major feature matrix.
pub fn predict(model: &BoosterModel, features: &[f64], feature_count: usize, exec: Execution) -> Result<Vec<f64>> {
    if feature_count != model.feature_count {
        return Err(Error::LengthMismatch {
            what: "feature count",
            expected: model.feature_count,
            actual: feature_count,
        });
    }
    if feature_count == 0 {
        return Err(Error::Dataset("rows have no features".into()));
    }
    if !features.len().is_multiple_of(feature_count) {
        return Err(Error::LengthMismatch {
            what: "feature matrix",
            expected: features.len() - features.len() % feature_count,
            actual: features.len(),
        });
    }
    let rows = features.len() / feature_count;
    Ok(exec.map_range(rows, |r| {
        model.predict_row(&features[r * feature_count..(r + 1) * feature_count])
    }))
}
