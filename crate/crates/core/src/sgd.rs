//! Primal linear SVM trained by plain per-sample stochastic gradient descent.
//!
//! Minimizes
//!
//! ```text
//! E(w, b) = 1/n Σ max(0, 1 - y_i (w·x_i + b)) + α R(w)
//! ```
//!
//! with the update `w ← w - η (α ∂R/∂w + ∂L/∂w)` and step size
//! `η(t) = 1 / (α (t0 + t))`. The bias is driven by the loss term only.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_labels, LinearModel};
use crate::sparse::{FeatureMatrix, SparseVector};
use crate::trace::Label;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Penalty {
    L1,
    L2,
    ElasticNet,
}

impl std::str::FromStr for Penalty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Penalty::L1),
            "l2" => Ok(Penalty::L2),
            "elasticnet" | "elastic-net" => Ok(Penalty::ElasticNet),
            _ => Err(Error::config("penalty", format!("unknown penalty {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub penalty: Penalty,
    pub alpha: f64,
    /// L2 share of the Elastic-Net mix; ignored by the other penalties.
    pub phi: f64,
    pub epochs: usize,
    /// Learning-rate offset. `None` picks `max(0, 1/α - 1)` so that the
    /// first step size is at most 1.
    pub t0: Option<f64>,
    pub seed: u64,
    pub tol: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            penalty: Penalty::L2,
            alpha: 1e-4,
            phi: 0.85,
            epochs: 20,
            t0: None,
            seed: 0,
            tol: 1e-3,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::config("alpha", format!("must be > 0, got {}", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.phi) {
            return Err(Error::config("phi", format!("must be in [0, 1], got {}", self.phi)));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs", "must be at least 1"));
        }
        if let Some(t0) = self.t0 {
            if !(t0 >= 0.0 && t0.is_finite()) {
                return Err(Error::config("t0", format!("must be >= 0, got {t0}")));
            }
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(Error::config("tol", format!("must be >= 0, got {}", self.tol)));
        }
        Ok(())
    }

    pub fn effective_t0(&self) -> f64 {
        self.t0.unwrap_or_else(|| default_t0(self.alpha))
    }
}

pub fn default_t0(alpha: f64) -> f64 {
    (1.0 / alpha - 1.0).max(0.0)
}

pub fn hinge_loss(score: f64, label: f64) -> f64 {
    (1.0 - label * score).max(0.0)
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `R(w)`: L1 `½Σ|w|`, L2 `½Σw²`, Elastic-Net `(φ/2)Σw² + (1-φ)Σ|w|`.
pub fn regularizer_value(w: &[f64], penalty: Penalty, phi: f64) -> f64 {
    let l1: f64 = w.iter().map(|x| x.abs()).sum();
    let l2: f64 = w.iter().map(|x| x * x).sum();
    match penalty {
        Penalty::L1 => 0.5 * l1,
        Penalty::L2 => 0.5 * l2,
        Penalty::ElasticNet => 0.5 * phi * l2 + (1.0 - phi) * l1,
    }
}

/// Subgradient of [`regularizer_value`], taking `sign(0) = 0`.
pub fn regularizer_subgradient(w: &[f64], penalty: Penalty, phi: f64) -> Vec<f64> {
    w.iter()
        .map(|&x| match penalty {
            Penalty::L1 => 0.5 * sign(x),
            Penalty::L2 => x,
            Penalty::ElasticNet => phi * x + (1.0 - phi) * sign(x),
        })
        .collect()
}

pub fn learning_rate(t: u64, alpha: f64, t0: f64) -> f64 {
    1.0 / (alpha * (t0 + t as f64))
}

/// One SGD update on a single sample, in place.
#[allow(clippy::too_many_arguments)]
pub fn sgd_step(
    w: &mut [f64],
    b: &mut f64,
    x: &SparseVector,
    label: f64,
    alpha: f64,
    eta: f64,
    penalty: Penalty,
    phi: f64,
) {
    let score = x.dot_dense(w) + *b;
    let violated = label * score < 1.0;

    let ea = eta * alpha;
    if ea != 0.0 {
        match penalty {
            Penalty::L2 => {
                for wj in w.iter_mut() {
                    *wj -= ea * *wj;
                }
            }
            Penalty::L1 => {
                for wj in w.iter_mut() {
                    *wj -= ea * (0.5 * sign(*wj));
                }
            }
            Penalty::ElasticNet => {
                let mix = 1.0 - phi;
                for wj in w.iter_mut() {
                    *wj -= ea * (phi * *wj + mix * sign(*wj));
                }
            }
        }
    }
    if violated {
        x.axpy_into(eta * label, w);
        *b += eta * label;
    }
}

/// Regularized training error `E(w, b)`.
pub fn objective(
    model: &LinearModel,
    matrix: &FeatureMatrix,
    labels: &[f64],
    alpha: f64,
    penalty: Penalty,
    phi: f64,
) -> f64 {
    let n = matrix.n_rows() as f64;
    let loss: f64 = matrix
        .rows
        .iter()
        .zip(labels)
        .map(|(x, &y)| hinge_loss(x.dot_dense(&model.weights) + model.bias, y))
        .sum();
    loss / n + alpha * regularizer_value(&model.weights, penalty, phi)
}

/// Subgradient of [`objective`] with respect to `(w, b)`.
pub fn objective_subgradient(
    model: &LinearModel,
    matrix: &FeatureMatrix,
    labels: &[f64],
    alpha: f64,
    penalty: Penalty,
    phi: f64,
) -> (Vec<f64>, f64) {
    let n = matrix.n_rows() as f64;
    let mut gw: Vec<f64> = regularizer_subgradient(&model.weights, penalty, phi)
        .into_iter()
        .map(|g| alpha * g)
        .collect();
    let mut gb = 0.0;
    for (x, &y) in matrix.rows.iter().zip(labels) {
        let score = x.dot_dense(&model.weights) + model.bias;
        if y * score < 1.0 {
            x.axpy_into(-y / n, &mut gw);
            gb -= y / n;
        }
    }
    (gw, gb)
}

/// Trained model plus how training went.
#[derive(Clone, Debug, PartialEq)]
pub struct SgdOutcome {
    pub model: LinearModel,
    pub epochs_run: usize,
    pub steps: u64,
    /// Objective after each completed epoch.
    pub objective_history: Vec<f64>,
}

pub fn train_sgd(matrix: &FeatureMatrix, labels: &[Label], config: &SgdConfig) -> Result<LinearModel> {
    train_sgd_detailed(matrix, labels, config).map(|o| o.model)
}

pub fn train_sgd_detailed(
    matrix: &FeatureMatrix,
    labels: &[Label],
    config: &SgdConfig,
) -> Result<SgdOutcome> {
    config.validate()?;
    check_labels(matrix, labels)?;
    let y: Vec<f64> = labels.iter().map(|l| l.sign()).collect();
    let t0 = config.effective_t0();
    let (alpha, penalty, phi) = (config.alpha, config.penalty, config.phi);

    let mut model = LinearModel::zeros(matrix.dim());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..matrix.n_rows()).collect();
    let mut t: u64 = 1;
    let mut prev = objective(&model, matrix, &y, alpha, penalty, phi);
    let mut history = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let eta = learning_rate(t, alpha, t0);
            sgd_step(
                &mut model.weights,
                &mut model.bias,
                &matrix.rows[i],
                y[i],
                alpha,
                eta,
                penalty,
                phi,
            );
            t += 1;
        }
        let cur = objective(&model, matrix, &y, alpha, penalty, phi);
        history.push(cur);
        let improvement = if prev > 0.0 { (prev - cur) / prev } else { 0.0 };
        prev = cur;
        if improvement < config.tol {
            break;
        }
    }

    Ok(SgdOutcome {
        model,
        epochs_run: history.len(),
        steps: t - 1,
        objective_history: history,
    })
}
