use crate::error::{Error, Result};
use crate::sparse::{FeatureMatrix, SparseVector};
use crate::trace::Label;

/// Linear decision function `f(x) = w·x + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn zeros(dim: usize) -> Self {
        LinearModel {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn decision_function(&self, x: &SparseVector) -> Result<f64> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.dim(),
            });
        }
        Ok(x.dot_dense(&self.weights) + self.bias)
    }

    /// Malicious when the score is non-negative.
    pub fn predict(&self, x: &SparseVector) -> Result<Label> {
        self.decision_function(x).map(Label::from_sign)
    }

    pub fn decision_scores(&self, m: &FeatureMatrix) -> Result<Vec<f64>> {
        m.rows.iter().map(|r| self.decision_function(r)).collect()
    }

    pub fn predict_matrix(&self, m: &FeatureMatrix) -> Result<Vec<Label>> {
        m.rows.iter().map(|r| self.predict(r)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.bias.is_finite() && self.weights.iter().all(|w| w.is_finite())
    }
}

/// Both classes must be present for training.
pub(crate) fn check_labels(m: &FeatureMatrix, labels: &[Label]) -> Result<()> {
    if m.is_empty() {
        return Err(Error::InsufficientData("empty training matrix".into()));
    }
    if labels.len() != m.n_rows() {
        return Err(Error::LengthMismatch {
            left: m.n_rows(),
            right: labels.len(),
        });
    }
    let pos = labels.iter().filter(|l| **l == Label::Malicious).count();
    if pos == 0 || pos == labels.len() {
        return Err(Error::DegenerateLabels);
    }
    Ok(())
}
