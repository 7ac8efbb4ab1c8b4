use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::linear::require_both_classes;
use super::{DecisionFunction, Loss, Model, Regularization, TrainConfig, TrainedModel};
use crate::error::{Error, Result};
use crate::featurespace::{LabeledDataset, SparseBinaryVector};

/// RBF kernel expansion `f(x) = Σ_i c_i exp(-γ‖x - x_i‖²) + b`, where
/// `c_i = α_i y_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelModel {
    dim: usize,
    support_vectors: Vec<SparseBinaryVector>,
    dual_coeffs: Vec<f64>,
    bias: f64,
    gamma: f64,
}

impl KernelModel {
    pub fn new(
        dim: usize,
        support_vectors: Vec<SparseBinaryVector>,
        dual_coeffs: Vec<f64>,
        bias: f64,
        gamma: f64,
    ) -> Result<Self> {
        if support_vectors.len() != dual_coeffs.len() {
            return Err(Error::InvalidConfig(format!(
                "{} support vectors but {} coefficients",
                support_vectors.len(),
                dual_coeffs.len()
            )));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidConfig(
                "gamma must be positive and finite".into(),
            ));
        }
        if !bias.is_finite() || dual_coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidConfig(
                "kernel model parameters must be finite".into(),
            ));
        }
        for sv in &support_vectors {
            crate::error::ensure_dim(dim, sv.dim())?;
        }
        Ok(Self {
            dim,
            support_vectors,
            dual_coeffs,
            bias,
            gamma,
        })
    }

    pub fn support_vectors(&self) -> &[SparseBinaryVector] {
        &self.support_vectors
    }

    pub fn dual_coeffs(&self) -> &[f64] {
        &self.dual_coeffs
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `c_i · k(z, x_i)` for every support vector.
    fn weighted_kernels(&self, z: &[f64]) -> Vec<f64> {
        let z_norm2: f64 = z.iter().map(|v| v * v).sum();
        self.support_vectors
            .iter()
            .zip(&self.dual_coeffs)
            .map(|(sv, &c)| {
                let dist2 = (z_norm2 - 2.0 * sv.dot(z) + sv.nnz() as f64).max(0.0);
                c * (-self.gamma * dist2).exp()
            })
            .collect()
    }

    fn gradient_from_weights(&self, z: &[f64], weights: &[f64]) -> Vec<f64> {
        let total: f64 = weights.iter().sum();
        let mut grad: Vec<f64> = z.iter().map(|v| v * total).collect();
        for (sv, &wk) in self.support_vectors.iter().zip(weights) {
            for &j in sv.indices() {
                grad[j] -= wk;
            }
        }
        let scale = -2.0 * self.gamma;
        grad.iter_mut().for_each(|g| *g *= scale);
        grad
    }
}

impl DecisionFunction for KernelModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn score_dense(&self, z: &[f64]) -> f64 {
        self.weighted_kernels(z).iter().sum::<f64>() + self.bias
    }

    /// `Σ_i c_i k(z, x_i) (-2γ) (z - x_i)`.
    fn gradient_dense(&self, z: &[f64]) -> Vec<f64> {
        self.gradient_from_weights(z, &self.weighted_kernels(z))
    }

    fn score_and_gradient_dense(&self, z: &[f64]) -> (f64, Vec<f64>) {
        let weights = self.weighted_kernels(z);
        let score = weights.iter().sum::<f64>() + self.bias;
        (score, self.gradient_from_weights(z, &weights))
    }
}

/// Hinge-loss kernel machine trained by stochastic functional gradient descent
/// in expansion form: every training point carries a coefficient, updated
/// when it violates the margin, and all coefficients shrink by `1 - ηλ` at
/// each step. Points whose coefficient stays exactly zero are pruned.
///
/// The Gram matrix is cached, so memory grows as `n²`.
pub fn train_rbf_svm(
    train: &LabeledDataset,
    c: f64,
    gamma: f64,
    cfg: &TrainConfig,
) -> Result<TrainedModel> {
    let cfg = TrainConfig {
        loss: Loss::Hinge,
        regularization: Regularization::C(c),
        bounds: None,
        ..cfg.clone()
    };
    cfg.validate()?;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidConfig(
            "gamma must be positive and finite".into(),
        ));
    }
    require_both_classes(train)?;

    let n = train.len();
    let samples = train.samples();
    let gram: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| (-gamma * samples[i].squared_distance(&samples[j]) as f64).exp())
                .collect()
        })
        .collect();
    let ys: Vec<f64> = train.labels().iter().map(|l| l.sign()).collect();

    let lambda = cfg.regularization.lambda(n);
    let t_decay = cfg.resolved_t_decay(n);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut coeffs = vec![0.0; n];
    let mut bias = 0.0;
    let mut t = 0usize;

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let eta = cfg.eta0 / (1.0 + t as f64 / t_decay);
            let f: f64 = gram[i].iter().zip(&coeffs).map(|(k, c)| k * c).sum::<f64>() + bias;
            let shrink = 1.0 - eta * lambda;
            coeffs.iter_mut().for_each(|c| *c *= shrink);
            if ys[i] * f < 1.0 {
                coeffs[i] += eta * ys[i];
                bias += eta * ys[i];
            }
            t += 1;
        }
    }

    let (support_vectors, dual_coeffs): (Vec<_>, Vec<_>) = samples
        .iter()
        .zip(coeffs)
        .filter(|(_, c)| *c != 0.0)
        .map(|(x, c)| (x.clone(), c))
        .unzip();
    let model = KernelModel::new(train.dim(), support_vectors, dual_coeffs, bias, gamma)?;
    Ok(TrainedModel {
        model: Model::Kernel(model),
        metadata: cfg.metadata(n, None),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featurespace::{FeatureSpace, Label};
    use crate::models::{input_gradient, score};

    fn sv(d: usize, idx: &[usize]) -> SparseBinaryVector {
        SparseBinaryVector::new(d, idx.to_vec()).unwrap()
    }

    #[test]
    fn single_support_vector_at_the_input() {
        let x = sv(4, &[1, 3]);
        let m = KernelModel::new(4, vec![x.clone()], vec![2.0], 0.0, 0.5).unwrap();
        assert_eq!(score(&m, &x).unwrap(), 2.0);
        assert!(input_gradient(&m, &x).unwrap().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn sparse_and_dense_scores_agree() {
        let m = KernelModel::new(
            5,
            vec![sv(5, &[0, 1]), sv(5, &[2, 3, 4]), sv(5, &[])],
            vec![1.5, -0.7, 0.3],
            -0.1,
            0.4,
        )
        .unwrap();
        for idx in [vec![], vec![0], vec![1, 2, 4]] {
            let x = sv(5, &idx);
            let a = m.score_sparse(&x);
            let b = m.score_dense(&x.to_dense());
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_inconsistent_parameters() {
        assert!(KernelModel::new(3, vec![sv(3, &[0])], vec![], 0.0, 1.0).is_err());
        assert!(KernelModel::new(3, vec![sv(3, &[0])], vec![1.0], 0.0, 0.0).is_err());
        assert!(KernelModel::new(3, vec![sv(4, &[0])], vec![1.0], 0.0, 1.0).is_err());
    }

    fn xor() -> LabeledDataset {
        let d = 2;
        LabeledDataset::new(
            FeatureSpace::new(d).unwrap(),
            vec![sv(d, &[]), sv(d, &[0, 1]), sv(d, &[0]), sv(d, &[1])],
            vec![Label::Benign, Label::Benign, Label::Malware, Label::Malware],
        )
        .unwrap()
    }

    #[test]
    fn learns_xor() {
        let ds = xor();
        let cfg = TrainConfig {
            epochs: 300,
            seed: 3,
            ..Default::default()
        };
        let m = train_rbf_svm(&ds, 10.0, 1.0, &cfg).unwrap();
        for (x, y) in ds.iter() {
            assert_eq!(score(&m, x).unwrap() >= 0.0, y == Label::Malware);
        }
        let Model::Kernel(k) = &m.model else { panic!() };
        assert!(k.support_vectors().len() <= ds.len());
        assert_eq!(m, train_rbf_svm(&ds, 10.0, 1.0, &cfg).unwrap());
    }

    #[test]
    fn single_class_is_rejected() {
        let ds = xor().subset(&[0, 1]);
        assert!(matches!(
            train_rbf_svm(&ds, 1.0, 1.0, &TrainConfig::default()),
            Err(Error::SingleClass)
        ));
    }
}
