//! In-process online learning engine.
//!
//! Two anomaly detectors (local outlier factor and a learned or explicit
//! value band) and a multiclass perceptron. Models are plain values: scoring
//! borrows immutably and is safe from any number of threads, training needs
//! exclusive access. [`Model`] is the serializable union stored per job.

mod feature;
mod lof;
mod perceptron;
mod range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use feature::FeatureVector;
pub use lof::{LofModel, LOF_EPSILON};
pub use perceptron::ClassifierModel;
pub use range::{range_fit, RangeDetector, RangeModel, RangeSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MlError {
    #[error("dimension mismatch: model expects {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("feature vector contains a non-finite value")]
    NonFiniteFeature,
    #[error("insufficient training: have {have} points, need more than {k}")]
    InsufficientTraining { have: usize, k: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("quantiles must satisfy 0 <= q_low < q_high <= 1")]
    BadQuantiles,
    #[error("degenerate range: low equals high")]
    DegenerateRange,
    #[error("unknown class {0:?}")]
    UnknownClass(String),
    #[error("model has no classes")]
    EmptyModel,
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
}

/// A detector mapping a feature vector to a non-negative abnormality score.
pub trait AnomalyDetector {
    fn train(&mut self, batch: &[FeatureVector]) -> Result<(), MlError>;
    fn score(&self, p: &FeatureVector) -> Result<f64, MlError>;
    /// Training points needed before scoring is allowed.
    fn min_training(&self) -> usize;
}

pub trait Classifier {
    fn train(&mut self, examples: &[(FeatureVector, String)], epochs: usize) -> Result<(), MlError>;
    /// Winning class and its margin over the runner-up.
    fn predict(&self, p: &FeatureVector) -> Result<(String, f64), MlError>;
}

/// Serializable model snapshot, one per job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Model {
    Lof(LofModel),
    Range(RangeDetector),
    Perceptron(ClassifierModel),
}

impl Model {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("models serialize")
    }

    pub fn from_json(s: &str) -> Result<Model, serde_json::Error> {
        let mut m: Model = serde_json::from_str(s)?;
        if let Model::Lof(l) = &mut m {
            l.invalidate();
        }
        Ok(m)
    }
}
