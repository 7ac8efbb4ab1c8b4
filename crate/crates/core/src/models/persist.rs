//! JSON model files.
//!
//! ```text
//! {
//!   "format_version": 1,
//!   "kind": "linear" | "rbf",
//!   "d": 1000,
//!   "weights": [[index, value], ...],          // linear, non-zero entries only
//!   "support_vectors": [{"coef": c, "indices": [...]}, ...],   // rbf
//!   "bias": b,
//!   "gamma": γ,                                 // rbf
//!   "training": { loss, regularization, epochs, eta0, t_decay, seed, ... }
//! }
//! ```
//!
//! Feature indices are 0-based.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{KernelModel, LinearModel, Model, TrainedModel, TrainingMetadata};
use crate::error::{Error, Result};
use crate::featurespace::SparseBinaryVector;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Kind {
    Linear,
    Rbf,
}

#[derive(Debug, Serialize, Deserialize)]
struct SupportVector {
    coef: f64,
    indices: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDocument {
    format_version: u32,
    kind: Kind,
    d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<(usize, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    support_vectors: Option<Vec<SupportVector>>,
    bias: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    training: TrainingMetadata,
}

pub fn model_to_json(model: &TrainedModel) -> Result<String> {
    let doc = match &model.model {
        Model::Linear(m) => ModelDocument {
            format_version: FORMAT_VERSION,
            kind: Kind::Linear,
            d: m.weights().len(),
            weights: Some(
                m.weights()
                    .iter()
                    .enumerate()
                    .filter(|(_, &w)| w != 0.0)
                    .map(|(i, &w)| (i, w))
                    .collect(),
            ),
            support_vectors: None,
            bias: m.bias(),
            gamma: None,
            training: model.metadata.clone(),
        },
        Model::Kernel(m) => ModelDocument {
            format_version: FORMAT_VERSION,
            kind: Kind::Rbf,
            d: super::DecisionFunction::dim(m),
            weights: None,
            support_vectors: Some(
                m.support_vectors()
                    .iter()
                    .zip(m.dual_coeffs())
                    .map(|(sv, &coef)| SupportVector {
                        coef,
                        indices: sv.indices().to_vec(),
                    })
                    .collect(),
            ),
            bias: m.bias(),
            gamma: Some(m.gamma()),
            training: model.metadata.clone(),
        },
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn model_from_json(text: &str) -> Result<TrainedModel> {
    let doc: ModelDocument =
        serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
    if doc.format_version != FORMAT_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported format_version {} (expected {FORMAT_VERSION})",
            doc.format_version
        )));
    }
    let bad = |m: &str| Error::ModelFormat(m.to_owned());
    let model = match doc.kind {
        Kind::Linear => {
            let entries = doc
                .weights
                .ok_or_else(|| bad("linear model without weights"))?;
            let mut weights = vec![0.0; doc.d];
            for (i, w) in entries {
                *weights
                    .get_mut(i)
                    .ok_or_else(|| bad("weight index out of range"))? = w;
            }
            Model::Linear(LinearModel::new(weights, doc.bias).map_err(|e| bad(&e.to_string()))?)
        }
        Kind::Rbf => {
            let svs = doc
                .support_vectors
                .ok_or_else(|| bad("rbf model without support vectors"))?;
            let gamma = doc.gamma.ok_or_else(|| bad("rbf model without gamma"))?;
            let mut vectors = Vec::with_capacity(svs.len());
            let mut coeffs = Vec::with_capacity(svs.len());
            for sv in svs {
                vectors.push(
                    SparseBinaryVector::new(doc.d, sv.indices).map_err(|e| bad(&e.to_string()))?,
                );
                coeffs.push(sv.coef);
            }
            Model::Kernel(
                KernelModel::new(doc.d, vectors, coeffs, doc.bias, gamma)
                    .map_err(|e| bad(&e.to_string()))?,
            )
        }
    };
    Ok(TrainedModel {
        model,
        metadata: doc.training,
    })
}

pub fn save_model(path: impl AsRef<Path>, model: &TrainedModel) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model_to_json(model)?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text)
}
