//! Classifier heads over latent vectors or raw preprocessed features.

mod forest;
mod knn;
mod logistic;

pub use forest::{forest_predict_proba, train_random_forest, ForestConfig, ForestModel, Tree};
pub use knn::{knn_predict_proba, KnnModel, DEFAULT_KNN_K};
pub use logistic::{
    logistic_loss_and_grad, logistic_predict_proba, sigmoid, train_logistic,
    train_logistic_with_history, LogRegModel, LogisticConfig,
};

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::{FeatureMatrix, Label, Result};

/// Decision rule shared by every head: probability ≥ 0.5 is class 1.
pub fn threshold_labels(probabilities: &[f64]) -> Vec<Label> {
    probabilities.iter().map(|&p| Label::from(p >= 0.5)).collect()
}

pub trait Classifier {
    fn input_width(&self) -> usize;

    /// Class-1 probability per row.
    fn predict_proba(&self, x: &FeatureMatrix) -> Result<Vec<f64>>;

    fn predict(&self, x: &FeatureMatrix) -> Result<Vec<Label>> {
        Ok(threshold_labels(&self.predict_proba(x)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ClassifierHead {
    Forest(ForestModel),
    Logistic(LogRegModel),
    Knn(KnnModel),
}

impl ClassifierHead {
    pub fn validate(&self) -> Result<()> {
        match self {
            ClassifierHead::Forest(m) => m.validate(),
            ClassifierHead::Knn(m) => m.validate(),
            ClassifierHead::Logistic(m) => {
                if m.bias.is_finite() && m.weights.iter().all(|w| w.is_finite()) {
                    Ok(())
                } else {
                    Err(crate::Error::NonFinite("logistic parameters"))
                }
            }
        }
    }
}

impl Classifier for ClassifierHead {
    fn input_width(&self) -> usize {
        match self {
            ClassifierHead::Forest(m) => m.input_width(),
            ClassifierHead::Logistic(m) => m.input_width(),
            ClassifierHead::Knn(m) => m.input_width(),
        }
    }

    fn predict_proba(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        match self {
            ClassifierHead::Forest(m) => m.predict_proba(x),
            ClassifierHead::Logistic(m) => m.predict_proba(x),
            ClassifierHead::Knn(m) => m.predict_proba(x),
        }
    }
}
