//! Gradient-based attributions with respect to the malware score.
//!
//! Positive relevance marks a feature as pushing the sample toward malware,
//! negative relevance toward benign.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::featurespace::SparseBinaryVector;
use crate::models::{input_gradient, DecisionFunction};

pub const DEFAULT_IG_STEPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttributionMethod {
    Gradient,
    GradientInput,
    IntegratedGradients,
}

impl AttributionMethod {
    pub const ALL: [AttributionMethod; 3] = [
        AttributionMethod::Gradient,
        AttributionMethod::GradientInput,
        AttributionMethod::IntegratedGradients,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttributionMethod::Gradient => "gradient",
            AttributionMethod::GradientInput => "gradient-input",
            AttributionMethod::IntegratedGradients => "integrated-gradients",
        }
    }
}

impl fmt::Display for AttributionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttributionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gradient" => Ok(AttributionMethod::Gradient),
            "gradient-input" | "gradient*input" => Ok(AttributionMethod::GradientInput),
            "integrated-gradients" | "ig" => Ok(AttributionMethod::IntegratedGradients),
            _ => Err(Error::InvalidConfig(format!(
                "unknown attribution method {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceVector {
    pub values: Vec<f64>,
    pub method: AttributionMethod,
    /// Number of path steps, integrated gradients only.
    pub steps: Option<usize>,
}

impl RelevanceVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

/// `r = ∇f(x)`.
pub fn attribution_gradient<M: DecisionFunction + ?Sized>(
    model: &M,
    x: &SparseBinaryVector,
) -> Result<RelevanceVector> {
    Ok(RelevanceVector {
        values: input_gradient(model, x)?,
        method: AttributionMethod::Gradient,
        steps: None,
    })
}

/// `r_i = ∂f/∂x_i · x_i`; zero wherever the feature is absent.
pub fn attribution_gradient_input<M: DecisionFunction + ?Sized>(
    model: &M,
    x: &SparseBinaryVector,
) -> Result<RelevanceVector> {
    let grad = input_gradient(model, x)?;
    let mut values = vec![0.0; grad.len()];
    for &i in x.indices() {
        values[i] = grad[i];
    }
    Ok(RelevanceVector {
        values,
        method: AttributionMethod::GradientInput,
        steps: None,
    })
}

/// Right-endpoint Riemann approximation of integrated gradients along the
/// straight path from `baseline` (all zeros when `None`) to `x`:
///
/// `r_i = (x_i - x'_i) · (1/p) Σ_{k=1..p} ∂f/∂x_i (x' + (k/p)(x - x'))`.
pub fn attribution_integrated_gradients<M: DecisionFunction + ?Sized>(
    model: &M,
    x: &SparseBinaryVector,
    baseline: Option<&[f64]>,
    steps: usize,
) -> Result<RelevanceVector> {
    ensure_dim(model.dim(), x.dim())?;
    if steps == 0 {
        return Err(Error::InvalidConfig(
            "integrated gradients needs p >= 1".into(),
        ));
    }
    let d = x.dim();
    let target = x.to_dense();
    let zeros;
    let base = match baseline {
        Some(b) => {
            ensure_dim(d, b.len())?;
            b
        }
        None => {
            zeros = vec![0.0; d];
            &zeros
        }
    };
    let delta: Vec<f64> = target.iter().zip(base).map(|(t, b)| t - b).collect();

    let mut sum = vec![0.0; d];
    let mut point = vec![0.0; d];
    for k in 1..=steps {
        let alpha = k as f64 / steps as f64;
        for ((p, b), dl) in point.iter_mut().zip(base).zip(&delta) {
            *p = b + alpha * dl;
        }
        for (s, g) in sum.iter_mut().zip(model.gradient_dense(&point)) {
            *s += g;
        }
    }
    let values = sum
        .iter()
        .zip(&delta)
        .map(|(s, dl)| dl * (s / steps as f64))
        .collect();
    Ok(RelevanceVector {
        values,
        method: AttributionMethod::IntegratedGradients,
        steps: Some(steps),
    })
}

/// Dispatches on `method`; integrated gradients uses the zero baseline.
pub fn explain<M: DecisionFunction + ?Sized>(
    model: &M,
    x: &SparseBinaryVector,
    method: AttributionMethod,
    steps: usize,
) -> Result<RelevanceVector> {
    match method {
        AttributionMethod::Gradient => attribution_gradient(model, x),
        AttributionMethod::GradientInput => attribution_gradient_input(model, x),
        AttributionMethod::IntegratedGradients => {
            attribution_integrated_gradients(model, x, None, steps)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub index: usize,
    pub relevance: f64,
    /// `r_i / Σ_j |r_j| · 100`.
    pub percent: f64,
}

/// The `k` largest-magnitude attributions, ties broken by lower index.
pub fn top_features(r: &RelevanceVector, k: usize) -> Vec<RankedFeature> {
    let total: f64 = r.values.iter().map(|v| v.abs()).sum();
    let mut idx: Vec<usize> = (0..r.values.len())
        .filter(|&i| r.values[i] != 0.0)
        .collect();
    idx.sort_by(|&a, &b| {
        r.values[b]
            .abs()
            .total_cmp(&r.values[a].abs())
            .then(a.cmp(&b))
    });
    idx.into_iter()
        .take(k)
        .map(|i| RankedFeature {
            index: i,
            relevance: r.values[i],
            percent: if total > 0.0 {
                r.values[i] / total * 100.0
            } else {
                0.0
            },
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{KernelModel, LinearModel};

    fn sv(d: usize, idx: &[usize]) -> SparseBinaryVector {
        SparseBinaryVector::new(d, idx.to_vec()).unwrap()
    }

    fn linear() -> LinearModel {
        LinearModel::new(vec![1.0, -2.0, 3.0], 0.1).unwrap()
    }

    #[test]
    fn gradient_is_constant_for_linear_models() {
        let a = attribution_gradient(&linear(), &sv(3, &[0])).unwrap();
        let b = attribution_gradient(&linear(), &sv(3, &[1, 2])).unwrap();
        assert_eq!(a.values, vec![1.0, -2.0, 3.0]);
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn gradient_input_masks_absent_features() {
        let r = attribution_gradient_input(&linear(), &sv(3, &[0, 1])).unwrap();
        assert_eq!(r.values, vec![1.0, -2.0, 0.0]);
        assert!(attribution_gradient_input(&linear(), &sv(3, &[]))
            .unwrap()
            .is_zero());
    }

    #[test]
    fn ig_equals_gradient_input_on_linear_models() {
        let x = sv(3, &[0, 2]);
        let gi = attribution_gradient_input(&linear(), &x).unwrap();
        for p in [1, 10, 100] {
            let ig = attribution_integrated_gradients(&linear(), &x, None, p).unwrap();
            for (a, b) in ig.values.iter().zip(&gi.values) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ig_vanishes_when_input_equals_baseline() {
        let k = KernelModel::new(
            3,
            vec![sv(3, &[0]), sv(3, &[1, 2])],
            vec![1.0, -0.5],
            0.0,
            0.7,
        )
        .unwrap();
        let x = sv(3, &[1]);
        let r = attribution_integrated_gradients(&k, &x, Some(&x.to_dense()), 20).unwrap();
        assert!(r.is_zero());
    }

    #[test]
    fn ig_argument_errors() {
        let x = sv(3, &[1]);
        assert!(attribution_integrated_gradients(&linear(), &x, None, 0).is_err());
        assert!(attribution_integrated_gradients(&linear(), &x, Some(&[0.0; 2]), 5).is_err());
        assert!(attribution_integrated_gradients(&linear(), &sv(4, &[]), None, 5).is_err());
    }

    #[test]
    fn top_features_report_percentages() {
        let r = RelevanceVector {
            values: vec![0.0, -3.0, 1.0, 3.0, 0.0],
            method: AttributionMethod::GradientInput,
            steps: None,
        };
        let top = top_features(&r, 2);
        assert_eq!(top.iter().map(|f| f.index).collect::<Vec<_>>(), vec![1, 3]);
        assert!((top[0].percent + 3.0 / 7.0 * 100.0).abs() < 1e-12);
        assert_eq!(top_features(&r, 10).len(), 3);
    }

    #[test]
    fn method_names_parse() {
        for m in AttributionMethod::ALL {
            assert_eq!(m.name().parse::<AttributionMethod>().unwrap(), m);
        }
        assert_eq!(
            "ig".parse::<AttributionMethod>().unwrap(),
            AttributionMethod::IntegratedGradients
        );
    }
}
