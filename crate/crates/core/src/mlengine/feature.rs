use serde::{Deserialize, Serialize};

use super::MlError;

/// A non-empty vector of finite reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self, MlError> {
        if values.is_empty() {
            return Err(MlError::DimensionMismatch { expected: 1, got: 0 });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(MlError::NonFiniteFeature);
        }
        Ok(FeatureVector(values))
    }

    pub fn scalar(x: f64) -> Result<Self, MlError> {
        Self::new(vec![x])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub(crate) fn expect_dim(&self, dim: usize) -> Result<(), MlError> {
        if self.0.len() == dim {
            Ok(())
        } else {
            Err(MlError::DimensionMismatch {
                expected: dim,
                got: self.0.len(),
            })
        }
    }
}

impl TryFrom<Vec<f64>> for FeatureVector {
    type Error = MlError;

    fn try_from(v: Vec<f64>) -> Result<Self, MlError> {
        FeatureVector::new(v)
    }
}

impl From<FeatureVector> for Vec<f64> {
    fn from(f: FeatureVector) -> Self {
        f.0
    }
}
