//! Differentiable decision functions `f(x)` and their trainers.
//!
//! Every model scores a sample with a real value; `f(x) >= threshold` (0 by
//! default) means malware. Models can also be evaluated on the real
//! relaxation of the input space, which is what the attack and the
//! attribution methods differentiate.

mod kernel;
mod linear;
mod metrics;
mod persist;
mod presets;

pub use kernel::{train_rbf_svm, KernelModel};
pub use linear::{
    train_linear, train_linear_traced, train_secsvm, LinearModel, Loss, Regularization,
    TrainConfig, WeightBounds,
};
pub use metrics::{
    auc, detection_rate_at_fpr, detection_rate_from_scores, interpolate_tpr, roc_curve,
    roc_from_scores, score_dataset, threshold_at_fpr, RocPoint,
};
pub use persist::{load_model, model_from_json, model_to_json, save_model, FORMAT_VERSION};
pub use presets::{
    cross_validate, select_by_cv, train_classifier, Classifier, ClassifierSpec, CvResult,
};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Result};
use crate::featurespace::SparseBinaryVector;

/// A real-valued, differentiable decision function over `{0,1}^d` and its
/// real relaxation `R^d`.
pub trait DecisionFunction: Sync {
    fn dim(&self) -> usize;

    /// `f` at a point of the real relaxation. `z.len()` must equal `dim()`.
    fn score_dense(&self, z: &[f64]) -> f64;

    /// `∇f` at a point of the real relaxation.
    fn gradient_dense(&self, z: &[f64]) -> Vec<f64>;

    /// `f` at a binary sample. Implementations may exploit sparsity.
    fn score_sparse(&self, x: &SparseBinaryVector) -> f64 {
        self.score_dense(&x.to_dense())
    }

    /// `f` and `∇f` together, for models that can share work between them.
    fn score_and_gradient_dense(&self, z: &[f64]) -> (f64, Vec<f64>) {
        (self.score_dense(z), self.gradient_dense(z))
    }

    fn as_linear(&self) -> Option<&LinearModel> {
        None
    }
}

/// `f(x)`, with a dimension check.
pub fn score<M: DecisionFunction + ?Sized>(model: &M, x: &SparseBinaryVector) -> Result<f64> {
    ensure_dim(model.dim(), x.dim())?;
    Ok(model.score_sparse(x))
}

/// `∇_x f(x)` at a binary sample, treating `x` as a point of `R^d`.
pub fn input_gradient<M: DecisionFunction + ?Sized>(
    model: &M,
    x: &SparseBinaryVector,
) -> Result<Vec<f64>> {
    ensure_dim(model.dim(), x.dim())?;
    Ok(model.gradient_dense(&x.to_dense()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub score: f64,
    pub malware: bool,
}

impl Prediction {
    pub fn new(score: f64, threshold: f64) -> Self {
        Self {
            score,
            malware: score >= threshold,
        }
    }

    /// `+1` (malware) or `-1` (benign).
    pub fn label(&self) -> i8 {
        if self.malware {
            1
        } else {
            -1
        }
    }
}

pub fn predict<M: DecisionFunction + ?Sized>(
    model: &M,
    x: &SparseBinaryVector,
    threshold: f64,
) -> Result<Prediction> {
    Ok(Prediction::new(score(model, x)?, threshold))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Model {
    Linear(LinearModel),
    Kernel(KernelModel),
}

/// Hyperparameters and schedule a model was trained with, stored alongside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub classifier: Option<String>,
    pub loss: Loss,
    pub regularization: Regularization,
    pub epochs: usize,
    pub eta0: f64,
    pub t_decay: f64,
    pub seed: u64,
    pub bounds: Option<WeightBounds>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub model: Model,
    pub metadata: TrainingMetadata,
}

impl TrainedModel {
    pub fn is_linear(&self) -> bool {
        matches!(self.model, Model::Linear(_))
    }
}

impl DecisionFunction for Model {
    fn dim(&self) -> usize {
        match self {
            Model::Linear(m) => m.dim(),
            Model::Kernel(m) => m.dim(),
        }
    }

    fn score_dense(&self, z: &[f64]) -> f64 {
        match self {
            Model::Linear(m) => m.score_dense(z),
            Model::Kernel(m) => m.score_dense(z),
        }
    }

    fn gradient_dense(&self, z: &[f64]) -> Vec<f64> {
        match self {
            Model::Linear(m) => m.gradient_dense(z),
            Model::Kernel(m) => m.gradient_dense(z),
        }
    }

    fn score_sparse(&self, x: &SparseBinaryVector) -> f64 {
        match self {
            Model::Linear(m) => m.score_sparse(x),
            Model::Kernel(m) => m.score_sparse(x),
        }
    }

    fn score_and_gradient_dense(&self, z: &[f64]) -> (f64, Vec<f64>) {
        match self {
            Model::Linear(m) => m.score_and_gradient_dense(z),
            Model::Kernel(m) => m.score_and_gradient_dense(z),
        }
    }

    fn as_linear(&self) -> Option<&LinearModel> {
        match self {
            Model::Linear(m) => Some(m),
            Model::Kernel(_) => None,
        }
    }
}

impl DecisionFunction for TrainedModel {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn score_dense(&self, z: &[f64]) -> f64 {
        self.model.score_dense(z)
    }

    fn gradient_dense(&self, z: &[f64]) -> Vec<f64> {
        self.model.gradient_dense(z)
    }

    fn score_sparse(&self, x: &SparseBinaryVector) -> f64 {
        self.model.score_sparse(x)
    }

    fn score_and_gradient_dense(&self, z: &[f64]) -> (f64, Vec<f64>) {
        self.model.score_and_gradient_dense(z)
    }

    fn as_linear(&self) -> Option<&LinearModel> {
        self.model.as_linear()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_checks_dimension() {
        let m = LinearModel::new(vec![1.0, -2.0, 3.0], 0.0).unwrap();
        let x = SparseBinaryVector::new(4, vec![0]).unwrap();
        assert!(score(&m, &x).is_err());
        assert!(input_gradient(&m, &x).is_err());
    }

    #[test]
    fn prediction_threshold_is_inclusive() {
        assert!(Prediction::new(0.0, 0.0).malware);
        assert_eq!(Prediction::new(-1e-12, 0.0).label(), -1);
    }
}
