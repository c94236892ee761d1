use serde::{Deserialize, Serialize};

use crate::dual_cd::{train_dual_cd_detailed, DualConfig};
use crate::error::{Error, Result};
use crate::model::LinearModel;
use crate::sgd::{train_sgd_detailed, SgdConfig};
use crate::sparse::FeatureMatrix;
use crate::trace::Label;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrainerKind {
    #[serde(rename = "sgd")]
    Sgd,
    #[serde(rename = "dual-cd")]
    DualCd,
}

impl TrainerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TrainerKind::Sgd => "sgd",
            TrainerKind::DualCd => "dual-cd",
        }
    }
}

impl std::fmt::Display for TrainerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TrainerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(TrainerKind::Sgd),
            "dual-cd" | "dual_cd" | "dualcd" => Ok(TrainerKind::DualCd),
            _ => Err(Error::config("trainer", format!("unknown trainer {s:?}"))),
        }
    }
}

/// Configuration for one of the two optimizers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TrainerConfig {
    Sgd(SgdConfig),
    DualCd(DualConfig),
}

/// What a training run produced besides the model.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainSummary {
    /// Epochs (SGD) or outer sweeps (dual CD) performed.
    pub iterations: usize,
    /// False only when dual CD stopped at `max_outer`.
    pub converged: bool,
}

impl TrainerConfig {
    pub fn kind(&self) -> TrainerKind {
        match self {
            TrainerConfig::Sgd(_) => TrainerKind::Sgd,
            TrainerConfig::DualCd(_) => TrainerKind::DualCd,
        }
    }

    /// Applies one grid cell. For dual CD the regularization strength maps to
    /// the box bound as `C = 1/alpha`.
    pub fn with_cell(&self, alpha: f64, tol: f64) -> TrainerConfig {
        match self {
            TrainerConfig::Sgd(c) => TrainerConfig::Sgd(SgdConfig {
                alpha,
                tol,
                ..c.clone()
            }),
            TrainerConfig::DualCd(c) => TrainerConfig::DualCd(DualConfig {
                c: 1.0 / alpha,
                tol,
                ..c.clone()
            }),
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            TrainerConfig::Sgd(c) => c.seed,
            TrainerConfig::DualCd(c) => c.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TrainerConfig::Sgd(c) => c.validate(),
            TrainerConfig::DualCd(c) => c.validate(),
        }
    }

    pub fn train(&self, matrix: &FeatureMatrix, labels: &[Label]) -> Result<(LinearModel, TrainSummary)> {
        match self {
            TrainerConfig::Sgd(c) => {
                let o = train_sgd_detailed(matrix, labels, c)?;
                Ok((
                    o.model,
                    TrainSummary {
                        iterations: o.epochs_run,
                        converged: true,
                    },
                ))
            }
            TrainerConfig::DualCd(c) => {
                let o = train_dual_cd_detailed(matrix, labels, c)?;
                Ok((
                    o.model,
                    TrainSummary {
                        iterations: o.state.outer_iter,
                        converged: o.converged,
                    },
                ))
            }
        }
    }
}
