//! Named classifier presets and a small k-fold selection helper.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    detection_rate_at_fpr, train_linear, train_rbf_svm, train_secsvm, Loss, Regularization,
    TrainConfig, TrainedModel, WeightBounds,
};
use crate::error::{Error, Result};
use crate::featurespace::{Label, LabeledDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classifier {
    Svm,
    SecSvm,
    SvmRbf,
    Logistic,
    Ridge,
}

impl Classifier {
    pub const ALL: [Classifier; 5] = [
        Classifier::Logistic,
        Classifier::Ridge,
        Classifier::Svm,
        Classifier::SvmRbf,
        Classifier::SecSvm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Classifier::Svm => "svm",
            Classifier::SecSvm => "sec-svm",
            Classifier::SvmRbf => "svm-rbf",
            Classifier::Logistic => "logistic",
            Classifier::Ridge => "ridge",
        }
    }

    pub fn is_linear(self) -> bool {
        self != Classifier::SvmRbf
    }

    /// Loss family the classifier is trained with.
    pub fn loss(self) -> Loss {
        match self {
            Classifier::Logistic => Loss::Logistic,
            Classifier::Ridge => Loss::Squared,
            _ => Loss::Hinge,
        }
    }
}

impl fmt::Display for Classifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Classifier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Classifier::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown classifier {s:?}")))
    }
}

/// A classifier preset plus optional hyperparameter overrides.
///
/// Unset fields fall back to the preset values: `C = 0.1` for the SVM,
/// `α = 10` for ridge, `C = 1` for logistic, `C = 1` with `|w_k| <= 0.25` for
/// Sec-SVM, and `C = 10`, `γ = 0.01` for the RBF SVM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub classifier: Classifier,
    /// Name used in reports; defaults to the classifier name.
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub bound: Option<f64>,
    #[serde(default)]
    pub epochs: Option<usize>,
    #[serde(default)]
    pub eta0: Option<f64>,
    #[serde(default)]
    pub t_decay: Option<f64>,
}

impl ClassifierSpec {
    pub fn preset(classifier: Classifier) -> Self {
        Self {
            classifier,
            label: None,
            c: None,
            alpha: None,
            gamma: None,
            bound: None,
            epochs: None,
            eta0: None,
            t_decay: None,
        }
    }

    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(self.classifier.name())
    }

    pub fn regularization(&self) -> Regularization {
        match self.classifier {
            Classifier::Ridge => Regularization::Alpha(self.alpha.unwrap_or(10.0)),
            Classifier::Svm => Regularization::C(self.c.unwrap_or(0.1)),
            Classifier::SvmRbf => Regularization::C(self.c.unwrap_or(10.0)),
            Classifier::Logistic | Classifier::SecSvm => Regularization::C(self.c.unwrap_or(1.0)),
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma.unwrap_or(0.01)
    }

    pub fn bound(&self) -> f64 {
        self.bound.unwrap_or(0.25)
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        let defaults = TrainConfig::default();
        TrainConfig {
            loss: self.classifier.loss(),
            regularization: self.regularization(),
            epochs: self.epochs.unwrap_or(defaults.epochs),
            eta0: self.eta0.unwrap_or(defaults.eta0),
            t_decay: self.t_decay,
            seed,
            bounds: (self.classifier == Classifier::SecSvm)
                .then(|| WeightBounds::symmetric(self.bound())),
        }
    }
}

pub fn train_classifier(
    spec: &ClassifierSpec,
    train: &LabeledDataset,
    seed: u64,
) -> Result<TrainedModel> {
    let cfg = spec.train_config(seed);
    let mut model = match spec.classifier {
        Classifier::SecSvm => train_secsvm(train, &cfg)?,
        Classifier::SvmRbf => {
            let Regularization::C(c) = cfg.regularization else {
                unreachable!("rbf preset uses C")
            };
            train_rbf_svm(train, c, spec.gamma(), &cfg)?
        }
        _ => train_linear(train, &cfg)?,
    };
    model.metadata.classifier = Some(spec.classifier.name().to_owned());
    Ok(model)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub spec: ClassifierSpec,
    pub fold_rates: Vec<f64>,
    pub mean_rate: f64,
}

/// Stratified k-fold estimate of the detection rate at `fpr` for every
/// candidate.
pub fn cross_validate(
    ds: &LabeledDataset,
    candidates: &[ClassifierSpec],
    folds: usize,
    fpr: f64,
    seed: u64,
) -> Result<Vec<CvResult>> {
    if folds < 2 {
        return Err(Error::InvalidConfig(
            "cross-validation needs at least 2 folds".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0usize; ds.len()];
    for label in [Label::Benign, Label::Malware] {
        let mut idx = ds.indices_of(label);
        idx.shuffle(&mut rng);
        for (k, i) in idx.into_iter().enumerate() {
            fold_of[i] = k % folds;
        }
    }
    candidates
        .iter()
        .map(|spec| {
            let fold_rates = (0..folds)
                .map(|f| {
                    let train: Vec<usize> = (0..ds.len()).filter(|&i| fold_of[i] != f).collect();
                    let valid: Vec<usize> = (0..ds.len()).filter(|&i| fold_of[i] == f).collect();
                    let model = train_classifier(spec, &ds.subset(&train), seed)?;
                    Ok(detection_rate_at_fpr(&model, &ds.subset(&valid), fpr)?.0)
                })
                .collect::<Result<Vec<f64>>>()?;
            let mean_rate = fold_rates.iter().sum::<f64>() / folds as f64;
            Ok(CvResult {
                spec: spec.clone(),
                fold_rates,
                mean_rate,
            })
        })
        .collect()
}

/// Picks the first candidate within `tolerance` of the best mean detection
/// rate. Candidates are expected in order of decreasing regularization.
pub fn select_by_cv(results: &[CvResult], tolerance: f64) -> Option<&CvResult> {
    let best = results
        .iter()
        .map(|r| r.mean_rate)
        .fold(f64::NEG_INFINITY, f64::max);
    results.iter().find(|r| r.mean_rate >= best - tolerance)
}
