//! Single-file JSON model persistence.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::LinearModel;
use crate::trainer::{TrainerConfig, TrainerKind};
use crate::vectorizer::{IdfModel, IdfOptions, NgramRange, Vectorizer, Vocabulary};

pub const FORMAT_VERSION: u32 = 1;

/// Deterministic provenance: no timestamps or host details.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CreationMeta {
    pub tool_version: String,
    pub seed: u64,
    pub n_train: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format_version: u32,
    pub ngram_range: NgramRange,
    pub vocabulary: Vec<String>,
    pub idf: Vec<f64>,
    pub idf_n_docs: usize,
    pub idf_options: IdfOptions,
    /// Nonzero weights as `(index, value)`, ascending by index.
    pub weights: Vec<(usize, f64)>,
    pub bias: f64,
    pub trainer_kind: TrainerKind,
    pub trainer: TrainerConfig,
    pub meta: CreationMeta,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: Option<serde_json::Value>,
}

impl ModelArtifact {
    pub fn new(
        vectorizer: &Vectorizer,
        idf_options: IdfOptions,
        model: &LinearModel,
        trainer: &TrainerConfig,
        n_train: usize,
    ) -> Result<Self> {
        if model.dim() != vectorizer.dim() {
            return Err(Error::DimensionMismatch {
                expected: vectorizer.dim(),
                found: model.dim(),
            });
        }
        if !model.is_finite() {
            return Err(Error::Parse("model has non-finite coefficients".into()));
        }
        let weights = model
            .weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(i, &w)| (i, w))
            .collect();
        Ok(ModelArtifact {
            format_version: FORMAT_VERSION,
            ngram_range: vectorizer.vocab.range(),
            vocabulary: vectorizer.vocab.keys().to_vec(),
            idf: vectorizer.idf.idf.clone(),
            idf_n_docs: vectorizer.idf.n_docs,
            idf_options,
            weights,
            bias: model.bias,
            trainer_kind: trainer.kind(),
            trainer: trainer.clone(),
            meta: CreationMeta {
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                seed: trainer.seed(),
                n_train,
            },
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                expected: FORMAT_VERSION,
                found: self.format_version as u64,
            });
        }
        let d = self.vocabulary.len();
        if self.idf.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: self.idf.len(),
            });
        }
        let mut prev = None;
        for &(i, w) in &self.weights {
            if i >= d {
                return Err(Error::DimensionMismatch { expected: d, found: i + 1 });
            }
            if prev.is_some_and(|p| p >= i) || !w.is_finite() {
                return Err(Error::Parse(format!("bad weight entry ({i}, {w})")));
            }
            prev = Some(i);
        }
        if !self.bias.is_finite() {
            return Err(Error::Parse("non-finite bias".into()));
        }
        if self.trainer.kind() != self.trainer_kind {
            return Err(Error::Parse("trainer kind does not match trainer config".into()));
        }
        Ok(())
    }

    pub fn vectorizer(&self) -> Result<Vectorizer> {
        let vocab = Vocabulary::from_sorted_keys(self.vocabulary.clone(), self.ngram_range)?;
        Ok(Vectorizer {
            vocab,
            idf: IdfModel {
                idf: self.idf.clone(),
                n_docs: self.idf_n_docs,
            },
        })
    }

    pub fn model(&self) -> LinearModel {
        let mut weights = vec![0.0; self.vocabulary.len()];
        for &(i, w) in &self.weights {
            weights[i] = w;
        }
        LinearModel { weights, bias: self.bias }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    /// Checks the version before the full schema so an unknown version is
    /// reported as such rather than as a field error.
    pub fn from_json(text: &str) -> Result<Self> {
        let probe: VersionProbe = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        match probe.format_version.as_ref().and_then(|v| v.as_u64()) {
            Some(v) if v == FORMAT_VERSION as u64 => {}
            Some(v) => {
                return Err(Error::VersionMismatch {
                    expected: FORMAT_VERSION,
                    found: v,
                })
            }
            None => return Err(Error::Parse("missing or non-integer format_version".into())),
        }
        let a: ModelArtifact = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        a.validate()?;
        Ok(a)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = self.to_json()?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let text = std::str::from_utf8(&bytes).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_json(text)
    }
}
