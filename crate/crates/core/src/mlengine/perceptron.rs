//! Multiclass perceptron over bias-augmented features.

use serde::{Deserialize, Serialize};

use super::{Classifier, FeatureVector, MlError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    classes: Vec<String>,
    /// One vector per class, `dimension + 1` long; the last entry is the bias.
    weights: Vec<Vec<f64>>,
    dimension: usize,
}

impl ClassifierModel {
    /// Zero-initialized model.
    pub fn new(classes: Vec<String>, dimension: usize) -> Result<Self, MlError> {
        if dimension == 0 {
            return Err(MlError::InvalidConfig("dimension must be at least 1".into()));
        }
        let mut uniq = classes.clone();
        uniq.sort();
        uniq.dedup();
        if uniq.len() != classes.len() {
            return Err(MlError::InvalidConfig("duplicate class name".into()));
        }
        let weights = vec![vec![0.0; dimension + 1]; classes.len()];
        Ok(ClassifierModel {
            classes,
            weights,
            dimension,
        })
    }

    /// Model with preset weights, one `dimension + 1` vector per class.
    pub fn with_weights(classes: Vec<String>, weights: Vec<Vec<f64>>) -> Result<Self, MlError> {
        let dimension = weights.first().map_or(0, |w| w.len().saturating_sub(1));
        let mut m = Self::new(classes, dimension)?;
        if weights.len() != m.classes.len()
            || weights.iter().any(|w| w.len() != dimension + 1 || w.iter().any(|x| !x.is_finite()))
        {
            return Err(MlError::InvalidConfig("weights must be finite, one row per class".into()));
        }
        m.weights = weights;
        Ok(m)
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn weights(&self, class: &str) -> Option<&[f64]> {
        let i = self.classes.iter().position(|c| c == class)?;
        Some(&self.weights[i])
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    fn class_scores(&self, p: &FeatureVector) -> Vec<f64> {
        self.weights
            .iter()
            .map(|w| {
                let (bias, ws) = w.split_last().expect("dimension + 1 weights");
                ws.iter().zip(p.values()).map(|(a, b)| a * b).sum::<f64>() + bias
            })
            .collect()
    }

    /// Index of the highest score; equal scores go to the smaller name.
    fn argmax(&self, scores: &[f64]) -> usize {
        let mut best = 0;
        for i in 1..scores.len() {
            if scores[i] > scores[best] || (scores[i] == scores[best] && self.classes[i] < self.classes[best]) {
                best = i;
            }
        }
        best
    }

    pub fn classifier_predict(&self, p: &FeatureVector) -> Result<(String, f64), MlError> {
        if self.classes.is_empty() {
            return Err(MlError::EmptyModel);
        }
        p.expect_dim(self.dimension)?;
        let scores = self.class_scores(p);
        let best = self.argmax(&scores);
        let runner_up = scores
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != best)
            .map(|(_, s)| *s)
            .fold(f64::NEG_INFINITY, f64::max);
        let margin = if runner_up.is_finite() { scores[best] - runner_up } else { 0.0 };
        Ok((self.classes[best].clone(), margin))
    }

    /// Runs `epochs` passes over `examples` in order; each mistake adds the
    /// augmented features to the true class and subtracts them from the
    /// predicted one.
    pub fn classifier_train(&mut self, examples: &[(FeatureVector, String)], epochs: usize) -> Result<(), MlError> {
        if epochs == 0 {
            return Err(MlError::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.classes.is_empty() {
            return Err(MlError::EmptyModel);
        }
        let mut labelled = Vec::with_capacity(examples.len());
        for (p, class) in examples {
            p.expect_dim(self.dimension)?;
            let idx = self
                .classes
                .iter()
                .position(|c| c == class)
                .ok_or_else(|| MlError::UnknownClass(class.clone()))?;
            labelled.push((p, idx));
        }
        for _ in 0..epochs {
            for (p, truth) in &labelled {
                let predicted = self.argmax(&self.class_scores(p));
                if predicted == *truth {
                    continue;
                }
                let x = p.values().iter().copied().chain(std::iter::once(1.0));
                for (j, xj) in x.enumerate() {
                    self.weights[*truth][j] += xj;
                    self.weights[predicted][j] -= xj;
                }
            }
        }
        Ok(())
    }
}

impl Classifier for ClassifierModel {
    fn train(&mut self, examples: &[(FeatureVector, String)], epochs: usize) -> Result<(), MlError> {
        self.classifier_train(examples, epochs)
    }

    fn predict(&self, p: &FeatureVector) -> Result<(String, f64), MlError> {
        self.classifier_predict(p)
    }
}
