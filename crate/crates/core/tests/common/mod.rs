//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robexplain::featurespace::SparseBinaryVector;
use robexplain::models::{DecisionFunction, KernelModel, LinearModel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_sparse(rng: &mut ChaCha8Rng, d: usize, density: f64) -> SparseBinaryVector {
    let idx = (0..d).filter(|_| rng.random::<f64>() < density).collect();
    SparseBinaryVector::new(d, idx).unwrap()
}

pub fn random_linear(rng: &mut ChaCha8Rng, d: usize) -> LinearModel {
    let w = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
    LinearModel::new(w, rng.random_range(-1.0..1.0)).unwrap()
}

/// Random RBF expansion, kept together with its parameters so oracles can
/// evaluate it without going through the library.
pub struct RbfCase {
    pub model: KernelModel,
    pub svs: Vec<SparseBinaryVector>,
    pub coeffs: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
}

pub fn random_rbf(
    rng: &mut ChaCha8Rng,
    d: usize,
    n_sv: usize,
    density: f64,
    gamma: f64,
) -> RbfCase {
    let svs: Vec<_> = (0..n_sv).map(|_| random_sparse(rng, d, density)).collect();
    let coeffs: Vec<f64> = (0..n_sv).map(|_| rng.random_range(-2.0..2.0)).collect();
    let bias = rng.random_range(-0.5..0.5);
    let model = KernelModel::new(d, svs.clone(), coeffs.clone(), bias, gamma).unwrap();
    RbfCase {
        model,
        svs,
        coeffs,
        bias,
        gamma,
    }
}

impl RbfCase {
    /// `Σ_j α_j exp(-γ ‖z - s_j‖²) + b` written out directly.
    pub fn score(&self, z: &[f64]) -> f64 {
        self.svs
            .iter()
            .zip(&self.coeffs)
            .map(|(s, &a)| {
                let sd = s.to_dense();
                let dist: f64 = z.iter().zip(&sd).map(|(x, y)| (x - y) * (x - y)).sum();
                a * (-self.gamma * dist).exp()
            })
            .sum::<f64>()
            + self.bias
    }

    /// Integrated gradients from the zero baseline with `p` right-endpoint
    /// steps, evaluated in closed form along the path `t·x`.
    ///
    /// With binary `x` and `s`, `‖t x - s‖² = t²|x| - 2t|x∩s| + |s|`, and
    /// `∂f/∂z_i = Σ_j α_j e_j(t) (-2γ) (t x_i - s_ji)`, so each support vector
    /// only needs the path sums of `e_j(t)` and `t e_j(t)`.
    pub fn integrated_gradients(&self, x: &SparseBinaryVector, p: usize) -> Vec<f64> {
        let a = x.nnz() as f64;
        let mut r = vec![0.0; x.dim()];
        for (s, &alpha) in self.svs.iter().zip(&self.coeffs) {
            let b = x.overlap(s) as f64;
            let c = s.nnz() as f64;
            let (mut sum_e, mut sum_te) = (0.0, 0.0);
            for k in 1..=p {
                let t = k as f64 / p as f64;
                let e = (-self.gamma * (t * t * a - 2.0 * t * b + c)).exp();
                sum_e += e;
                sum_te += t * e;
            }
            let (mean_e, mean_te) = (sum_e / p as f64, sum_te / p as f64);
            for &i in x.indices() {
                let s_i = if s.contains(i) { 1.0 } else { 0.0 };
                r[i] += alpha * -2.0 * self.gamma * (mean_te - s_i * mean_e);
            }
        }
        r
    }
}

/// Central finite differences of `model.score_dense`.
pub fn finite_difference_gradient<M: DecisionFunction>(model: &M, z: &[f64], h: f64) -> Vec<f64> {
    let mut point = z.to_vec();
    (0..z.len())
        .map(|i| {
            let orig = point[i];
            point[i] = orig + h;
            let up = model.score_dense(&point);
            point[i] = orig - h;
            let down = model.score_dense(&point);
            point[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Lowest score reachable by adding at most `eps` absent features, by
/// enumerating every candidate set.
pub fn brute_force_min_score<M: DecisionFunction>(
    model: &M,
    x: &SparseBinaryVector,
    eps: usize,
) -> f64 {
    let absent: Vec<usize> = (0..x.dim()).filter(|&i| !x.contains(i)).collect();
    let mut best = model.score_sparse(x);
    let mut stack: Vec<(usize, Vec<usize>)> = vec![(0, Vec::new())];
    while let Some((start, chosen)) = stack.pop() {
        if !chosen.is_empty() {
            let candidate = x.with_added(&chosen).unwrap();
            best = best.min(model.score_sparse(&candidate));
        }
        if chosen.len() == eps {
            continue;
        }
        for (k, &feature) in absent.iter().enumerate().skip(start) {
            let mut next = chosen.clone();
            next.push(feature);
            stack.push((k + 1, next));
        }
    }
    best
}
