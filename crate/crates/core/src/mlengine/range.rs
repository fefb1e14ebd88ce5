//! Value-band detector: anything outside `[low, high]` is anomalous.

use serde::{Deserialize, Serialize};

use super::{AnomalyDetector, FeatureVector, MlError};

/// Training values needed before a quantile band can be fitted.
pub const MIN_QUANTILE_TRAINING: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeModel {
    pub low: f64,
    pub high: f64,
    /// True when fitted from training quantiles.
    pub learned: bool,
}

impl RangeModel {
    pub fn explicit(low: f64, high: f64) -> Result<Self, MlError> {
        if !(low.is_finite() && high.is_finite()) {
            return Err(MlError::NonFiniteFeature);
        }
        if low > high {
            return Err(MlError::InvalidConfig("low exceeds high".into()));
        }
        Ok(RangeModel {
            low,
            high,
            learned: false,
        })
    }

    /// Zero inside the band, otherwise the distance to the nearest edge in
    /// units of band width.
    pub fn range_score(&self, x: f64) -> Result<f64, MlError> {
        if (self.low..=self.high).contains(&x) {
            return Ok(0.0);
        }
        let width = self.high - self.low;
        if width == 0.0 {
            return Err(MlError::DegenerateRange);
        }
        let outside = if x > self.high { x - self.high } else { self.low - x };
        Ok(outside / width)
    }
}

/// Nearest-rank quantile of sorted data: the value at rank `ceil(q * n)`,
/// with rank 0 clamped to 1.
fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

pub fn range_fit(batch: &[f64], q_low: f64, q_high: f64) -> Result<RangeModel, MlError> {
    if batch.is_empty() {
        return Err(MlError::EmptyBatch);
    }
    if !(0.0..1.0).contains(&q_low) || !(q_low < q_high && q_high <= 1.0) {
        return Err(MlError::BadQuantiles);
    }
    if batch.iter().any(|x| !x.is_finite()) {
        return Err(MlError::NonFiniteFeature);
    }
    let mut sorted = batch.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(RangeModel {
        low: nearest_rank(&sorted, q_low),
        high: nearest_rank(&sorted, q_high),
        learned: true,
    })
}

/// How the band is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RangeSpec {
    Explicit { low: f64, high: f64 },
    Quantile { q_low: f64, q_high: f64 },
}

/// Online wrapper around [`RangeModel`]. Quantile bands are refitted over
/// every training value seen so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeDetector {
    pub spec: RangeSpec,
    #[serde(default)]
    samples: Vec<f64>,
    model: Option<RangeModel>,
}

impl RangeDetector {
    pub fn new(spec: RangeSpec) -> Result<Self, MlError> {
        let model = match spec {
            RangeSpec::Explicit { low, high } => Some(RangeModel::explicit(low, high)?),
            RangeSpec::Quantile { q_low, q_high } => {
                if !(0.0..1.0).contains(&q_low) || !(q_low < q_high && q_high <= 1.0) {
                    return Err(MlError::BadQuantiles);
                }
                None
            }
        };
        Ok(RangeDetector {
            spec,
            samples: Vec::new(),
            model,
        })
    }

    pub fn model(&self) -> Option<&RangeModel> {
        self.model.as_ref()
    }
}

impl AnomalyDetector for RangeDetector {
    fn train(&mut self, batch: &[FeatureVector]) -> Result<(), MlError> {
        for p in batch {
            p.expect_dim(1)?;
        }
        if let RangeSpec::Quantile { q_low, q_high } = self.spec {
            self.samples.extend(batch.iter().map(|p| p.values()[0]));
            if self.samples.len() >= MIN_QUANTILE_TRAINING {
                self.model = Some(range_fit(&self.samples, q_low, q_high)?);
            }
        }
        Ok(())
    }

    fn score(&self, p: &FeatureVector) -> Result<f64, MlError> {
        p.expect_dim(1)?;
        let m = self.model.as_ref().ok_or(MlError::InsufficientTraining {
            have: self.samples.len(),
            k: MIN_QUANTILE_TRAINING - 1,
        })?;
        m.range_score(p.values()[0])
    }

    fn min_training(&self) -> usize {
        match self.spec {
            RangeSpec::Explicit { .. } => 0,
            RangeSpec::Quantile { .. } => MIN_QUANTILE_TRAINING,
        }
    }
}
