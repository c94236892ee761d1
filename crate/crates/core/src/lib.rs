//! Malware detection from Windows Native API call traces.
//!
//! Traces are treated as documents: each one is parsed into a sequence of
//! lowercase `nt*` call names, turned into an L2-normalized TF-IDF vector
//! over call n-grams, and scored by a linear SVM `w·x + b` trained either
//! with primal SGD on the hinge loss or with coordinate descent on the dual.
//!
//! ```no_run
//! use tracesvm::prelude::*;
//!
//! let corpus = generate(&GeneratorConfig::default(), Exec::default())?;
//! let (train, test) = train_test_split(&corpus.traces, &SplitSpec::default())?;
//! let (vectorizer, x_train) =
//!     Vectorizer::fit(&train, NgramRange::default(), IdfOptions::default(), Exec::default())?;
//! let y_train: Vec<Label> = train.iter().map(|t| t.label.unwrap()).collect();
//! let model = train_sgd(&x_train, &y_train, &SgdConfig::default())?;
//! let x_test = vectorizer.transform(&test, Exec::default());
//! let preds = model.predict_matrix(&x_test)?;
//! # Ok::<(), tracesvm::Error>(())
//! ```

pub mod artifact;
pub mod cli;
pub mod dual_cd;
pub mod error;
pub mod eval;
pub mod model;
pub mod par;
pub mod selection;
pub mod sgd;
pub mod sparse;
pub mod synth;
pub mod trace;
pub mod trainer;
pub mod vectorizer;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::artifact::ModelArtifact;
    pub use crate::dual_cd::{train_dual_cd, DualConfig};
    pub use crate::error::{Error, Result};
    pub use crate::eval::{classification_report, roc_curve, top_features, EvaluationReport, RocCurve};
    pub use crate::model::LinearModel;
    pub use crate::par::Exec;
    pub use crate::selection::{grid_search, train_test_split, GridSearchResult, SplitSpec};
    pub use crate::sgd::{train_sgd, Penalty, SgdConfig};
    pub use crate::sparse::{FeatureMatrix, SparseVector};
    pub use crate::synth::{generate, GeneratorConfig};
    pub use crate::trace::{load_corpus, parse_trace, CorpusManifest, Label, SyscallTrace};
    pub use crate::trainer::{TrainerConfig, TrainerKind};
    pub use crate::vectorizer::{IdfOptions, NgramRange, Vectorizer};
}
