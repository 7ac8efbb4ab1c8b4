use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DecisionFunction, Model, TrainedModel, TrainingMetadata};
use crate::error::{Error, Result};
use crate::featurespace::{LabeledDataset, SparseBinaryVector};

/// `f(x) = w·x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    weights: Vec<f64>,
    bias: f64,
}

impl LinearModel {
    pub fn new(weights: Vec<f64>, bias: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidConfig(
                "linear model needs at least one weight".into(),
            ));
        }
        if !bias.is_finite() || weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidConfig(
                "linear model parameters must be finite".into(),
            ));
        }
        Ok(Self { weights, bias })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }
}

impl DecisionFunction for LinearModel {
    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn score_dense(&self, z: &[f64]) -> f64 {
        self.weights.iter().zip(z).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }

    fn gradient_dense(&self, _z: &[f64]) -> Vec<f64> {
        self.weights.clone()
    }

    fn score_sparse(&self, x: &SparseBinaryVector) -> f64 {
        x.dot(&self.weights) + self.bias
    }

    fn as_linear(&self) -> Option<&LinearModel> {
        Some(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    Hinge,
    Logistic,
    Squared,
}

impl Loss {
    pub fn value(self, y: f64, score: f64) -> f64 {
        let margin = y * score;
        match self {
            Loss::Hinge => (1.0 - margin).max(0.0),
            Loss::Logistic => softplus(-margin),
            Loss::Squared => (1.0 - margin).powi(2),
        }
    }

    /// Derivative of the loss with respect to the score.
    pub fn derivative(self, y: f64, score: f64) -> f64 {
        let margin = y * score;
        match self {
            Loss::Hinge => {
                if margin < 1.0 {
                    -y
                } else {
                    0.0
                }
            }
            Loss::Logistic => -y * sigmoid(-margin),
            Loss::Squared => -2.0 * y * (1.0 - margin),
        }
    }
}

fn softplus(v: f64) -> f64 {
    if v > 0.0 {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Regularization strength, either as the SVM-style `C` or the ridge-style `α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regularization {
    /// Objective `½‖w‖² + C Σ ℓ_i`.
    C(f64),
    /// Objective `Σ ℓ_i + α‖w‖²`.
    Alpha(f64),
}

impl Regularization {
    /// Per-sample penalty `λ` of the equivalent averaged objective
    /// `λ/2 ‖w‖² + (1/n) Σ ℓ_i`.
    pub fn lambda(self, n: usize) -> f64 {
        let n = n as f64;
        match self {
            Regularization::C(c) => 1.0 / (c * n),
            Regularization::Alpha(a) => 2.0 * a / n,
        }
    }

    fn value(self) -> f64 {
        match self {
            Regularization::C(v) | Regularization::Alpha(v) => v,
        }
    }
}

/// Elementwise box `[lb_k, ub_k]` on the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightBounds {
    Scalar { lb: f64, ub: f64 },
    Vector { lb: Vec<f64>, ub: Vec<f64> },
}

impl WeightBounds {
    /// `-bound <= w_k <= bound` for every feature.
    pub fn symmetric(bound: f64) -> Self {
        WeightBounds::Scalar {
            lb: -bound,
            ub: bound,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let check = |lb: f64, ub: f64| {
            if lb.is_nan() || ub.is_nan() || lb > 0.0 || ub < 0.0 {
                Err(Error::InvalidConfig(format!(
                    "weight bounds must satisfy lb <= 0 <= ub, got [{lb}, {ub}]"
                )))
            } else {
                Ok(())
            }
        };
        match self {
            WeightBounds::Scalar { lb, ub } => check(*lb, *ub),
            WeightBounds::Vector { lb, ub } => {
                if lb.len() != dim || ub.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: lb.len().min(ub.len()),
                    });
                }
                lb.iter().zip(ub).try_for_each(|(&l, &u)| check(l, u))
            }
        }
    }

    fn expand(&self, dim: usize) -> (Vec<f64>, Vec<f64>) {
        match self {
            WeightBounds::Scalar { lb, ub } => (vec![*lb; dim], vec![*ub; dim]),
            WeightBounds::Vector { lb, ub } => (lb.clone(), ub.clone()),
        }
    }
}

/// Stochastic subgradient descent settings shared by every trainer.
///
/// The learning rate at step `t` is `eta0 / (1 + t / t_decay)`; `t_decay`
/// defaults to the number of training samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: Loss,
    pub regularization: Regularization,
    pub epochs: usize,
    pub eta0: f64,
    #[serde(default)]
    pub t_decay: Option<f64>,
    pub seed: u64,
    #[serde(default)]
    pub bounds: Option<WeightBounds>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: Loss::Hinge,
            regularization: Regularization::C(1.0),
            epochs: 20,
            eta0: 0.1,
            t_decay: None,
            seed: 0,
            bounds: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be >= 1".into()));
        }
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            return Err(Error::InvalidConfig(
                "eta0 must be a positive finite number".into(),
            ));
        }
        let reg = self.regularization.value();
        if !(reg > 0.0 && reg.is_finite()) {
            return Err(Error::InvalidConfig(
                "regularization strength must be positive and finite".into(),
            ));
        }
        if let Some(td) = self.t_decay {
            if td.is_nan() || td <= 0.0 {
                return Err(Error::InvalidConfig("t_decay must be positive".into()));
            }
        }
        Ok(())
    }

    pub(crate) fn resolved_t_decay(&self, n: usize) -> f64 {
        self.t_decay.unwrap_or(n as f64)
    }

    pub(crate) fn metadata(&self, n: usize, classifier: Option<&str>) -> TrainingMetadata {
        TrainingMetadata {
            classifier: classifier.map(str::to_owned),
            loss: self.loss,
            regularization: self.regularization,
            epochs: self.epochs,
            eta0: self.eta0,
            t_decay: self.resolved_t_decay(n),
            seed: self.seed,
            bounds: self.bounds.clone(),
        }
    }
}

pub(crate) fn require_both_classes(train: &LabeledDataset) -> Result<()> {
    if train.has_both_classes() {
        Ok(())
    } else {
        Err(Error::SingleClass)
    }
}

/// Unconstrained linear classifier: hinge gives a linear SVM, logistic a
/// logistic regression and squared a ridge classifier. `cfg.bounds` is ignored.
pub fn train_linear(train: &LabeledDataset, cfg: &TrainConfig) -> Result<TrainedModel> {
    let (model, _) = sgd(train, cfg, None, false)?;
    Ok(wrap(model, train, cfg))
}

/// Like [`train_linear`] but also returns the regularized objective evaluated
/// at the average of each epoch's iterates.
pub fn train_linear_traced(
    train: &LabeledDataset,
    cfg: &TrainConfig,
) -> Result<(TrainedModel, Vec<f64>)> {
    let (model, trace) = sgd(train, cfg, None, true)?;
    Ok((wrap(model, train, cfg), trace))
}

/// Sec-SVM: hinge-loss SGD where every update is followed by clipping each
/// weight into its box.
pub fn train_secsvm(train: &LabeledDataset, cfg: &TrainConfig) -> Result<TrainedModel> {
    let bounds = cfg
        .bounds
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("Sec-SVM requires weight bounds".into()))?;
    bounds.validate(train.dim())?;
    let cfg = TrainConfig {
        loss: Loss::Hinge,
        ..cfg.clone()
    };
    let (model, _) = sgd(train, &cfg, Some(bounds.expand(train.dim())), false)?;
    Ok(wrap(model, train, &cfg))
}

fn wrap(model: LinearModel, train: &LabeledDataset, cfg: &TrainConfig) -> TrainedModel {
    TrainedModel {
        model: Model::Linear(model),
        metadata: cfg.metadata(train.len(), None),
    }
}

fn objective(weights: &[f64], bias: f64, train: &LabeledDataset, loss: Loss, lambda: f64) -> f64 {
    let norm2: f64 = weights.iter().map(|w| w * w).sum();
    let data: f64 = train
        .iter()
        .map(|(x, y)| loss.value(y.sign(), x.dot(weights) + bias))
        .sum();
    0.5 * lambda * norm2 + data / train.len() as f64
}

fn sgd(
    train: &LabeledDataset,
    cfg: &TrainConfig,
    bounds: Option<(Vec<f64>, Vec<f64>)>,
    trace: bool,
) -> Result<(LinearModel, Vec<f64>)> {
    cfg.validate()?;
    require_both_classes(train)?;
    let n = train.len();
    let d = train.dim();
    let lambda = cfg.regularization.lambda(n);
    let t_decay = cfg.resolved_t_decay(n);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut t = 0usize;
    let mut objectives = Vec::new();
    let mut avg_w = vec![0.0; if trace { d } else { 0 }];

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut avg_b = 0.0;
        avg_w.iter_mut().for_each(|v| *v = 0.0);

        for &i in &order {
            let x = &train.samples()[i];
            let y = train.labels()[i].sign();
            let mut eta = cfg.eta0 / (1.0 + t as f64 / t_decay);
            if cfg.loss == Loss::Squared {
                // the squared loss is unbounded; keep each step contractive
                eta = eta.min(0.5 / (x.nnz() as f64 + 1.0));
            }
            let g = cfg.loss.derivative(y, x.dot(&w) + b);

            let shrink = 1.0 - eta * lambda;
            w.iter_mut().for_each(|v| *v *= shrink);
            if g != 0.0 {
                for &j in x.indices() {
                    w[j] -= eta * g;
                }
                b -= eta * g;
            }
            if let Some((lb, ub)) = &bounds {
                for ((v, &l), &u) in w.iter_mut().zip(lb).zip(ub) {
                    *v = v.clamp(l, u);
                }
            }
            if trace {
                avg_w.iter_mut().zip(&w).for_each(|(a, v)| *a += v);
                avg_b += b;
            }
            t += 1;
        }

        if trace {
            let inv = 1.0 / n as f64;
            avg_w.iter_mut().for_each(|a| *a *= inv);
            objectives.push(objective(&avg_w, avg_b * inv, train, cfg.loss, lambda));
        }
    }

    Ok((LinearModel::new(w, b)?, objectives))
}
