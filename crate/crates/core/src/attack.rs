//! Sparse feature-addition evasion.
//!
//! The attacker minimizes `f(x')` subject to `‖x - x'‖₁ <= ε`, a box
//! `x_lb <= x' <= x_ub` and `x' ∈ {0,1}^d`. In addition-only mode `x_lb = x`,
//! so features can be injected but never removed.
//!
//! [`pgd_evasion`] runs projected gradient descent. Because binarization makes
//! `f` piecewise constant along small steps, the descent is carried by a
//! real-valued shadow iterate that accumulates the gradient steps; the feasible
//! binary iterate is its projection. The gradient is always evaluated at the
//! binary iterate, and the lowest-scoring binary iterate seen is returned.
//!
//! For linear models, [`greedy_linear_evasion`] is exact: adding the absent
//! features with the most negative weights is optimal because `f` is additive.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::featurespace::SparseBinaryVector;
use crate::models::{score, DecisionFunction, LinearModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    /// Maximum number of modified features.
    pub epsilon: usize,
    /// Step size. `None` selects `0.1 / max_j |∂f/∂x_j|` at the clean sample.
    pub eta: Option<f64>,
    /// Convergence tolerance on `|f(x') - f(x*)|`.
    pub tolerance: f64,
    pub max_iters: usize,
    /// Stop after this many consecutive moves of the binary iterate that do
    /// not improve the best score. Iterations that leave the binary iterate
    /// unchanged are not counted.
    pub patience: Option<usize>,
    pub addition_only: bool,
    /// Samples scoring `>= threshold` are detected.
    pub threshold: f64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            epsilon: 1,
            eta: None,
            tolerance: 1e-6,
            max_iters: 1000,
            patience: Some(20),
            addition_only: true,
            threshold: 0.0,
        }
    }
}

impl AttackConfig {
    pub fn with_epsilon(&self, epsilon: usize) -> Self {
        Self {
            epsilon,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilon == 0 {
            return Err(Error::InvalidConfig("epsilon must be >= 1".into()));
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Error::InvalidConfig("eta must be positive".into()));
            }
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::InvalidConfig("tolerance must be positive".into()));
        }
        if self.patience == Some(0) {
            return Err(Error::InvalidConfig("patience must be >= 1".into()));
        }
        if self.threshold.is_nan() {
            return Err(Error::InvalidConfig("threshold must not be NaN".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackMethod {
    Pgd,
    Greedy,
}

impl fmt::Display for AttackMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttackMethod::Pgd => "pgd",
            AttackMethod::Greedy => "greedy",
        })
    }
}

impl FromStr for AttackMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pgd" => Ok(AttackMethod::Pgd),
            "greedy" => Ok(AttackMethod::Greedy),
            _ => Err(Error::InvalidConfig(format!("unknown attack method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub adversarial: SparseBinaryVector,
    pub added_indices: Vec<usize>,
    pub score_before: f64,
    pub score_after: f64,
    /// PGD: best score after each iteration. Greedy: score after each addition.
    pub score_trace: Vec<f64>,
    pub evaded: bool,
    pub iterations: usize,
}

impl AttackResult {
    fn unchanged(x: &SparseBinaryVector, score: f64, threshold: f64) -> Self {
        Self {
            adversarial: x.clone(),
            added_indices: Vec::new(),
            score_before: score,
            score_after: score,
            score_trace: vec![score],
            evaded: score < threshold,
            iterations: 0,
        }
    }

    /// Budget, box and binary constraints hold with respect to `original`.
    pub fn is_feasible(&self, original: &SparseBinaryVector, cfg: &AttackConfig) -> bool {
        let added = self.adversarial.added_relative_to(original);
        let removed = original.added_relative_to(&self.adversarial);
        let changed = added.len() + removed.len();
        added == self.added_indices
            && changed <= cfg.epsilon
            && (!cfg.addition_only || removed.is_empty())
            && self.adversarial.dim() == original.dim()
    }
}

/// Projects a real-valued point onto the feasible set around `x_orig`:
/// clip into the box, binarize at 0.5, then keep only the `ε` changed
/// coordinates with the largest `|x_cont - x_orig|` (lower index wins ties).
pub fn project(
    x_cont: &[f64],
    x_orig: &SparseBinaryVector,
    cfg: &AttackConfig,
) -> Result<SparseBinaryVector> {
    ensure_dim(x_orig.dim(), x_cont.len())?;
    let orig = x_orig.to_dense();
    Ok(project_dense(x_cont, &orig, cfg))
}

fn project_dense(x_cont: &[f64], orig: &[f64], cfg: &AttackConfig) -> SparseBinaryVector {
    let mut binary: Vec<bool> = orig.iter().map(|&v| v >= 0.5).collect();
    let mut changed: Vec<(usize, f64)> = Vec::new();
    for (j, (&v, &o)) in x_cont.iter().zip(orig).enumerate() {
        let lb = if cfg.addition_only { o } else { 0.0 };
        let bit = v.clamp(lb, 1.0) >= 0.5;
        if bit != (o >= 0.5) {
            changed.push((j, (v - o).abs()));
        }
    }
    if changed.len() > cfg.epsilon {
        changed.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        changed.truncate(cfg.epsilon);
    }
    for (j, _) in changed {
        binary[j] = !binary[j];
    }
    let indices = binary
        .iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .map(|(j, _)| j)
        .collect();
    SparseBinaryVector::new(orig.len(), indices).expect("indices are sorted and in range")
}

/// Projected gradient descent evasion, see the module documentation.
pub fn pgd_evasion<M: DecisionFunction + ?Sized>(
    model: &M,
    x: &SparseBinaryVector,
    cfg: &AttackConfig,
) -> Result<AttackResult> {
    cfg.validate()?;
    let f0 = score(model, x)?;
    if f0 < cfg.threshold {
        return Ok(AttackResult::unchanged(x, f0, cfg.threshold));
    }

    let orig = x.to_dense();
    let mut shadow = orig.clone();
    let mut current = x.clone();
    let mut current_dense = orig.clone();
    let mut f_cur = f0;
    let mut f_prev = f64::NAN;
    let mut best = (x.clone(), f0);
    let mut trace = vec![f0];
    let mut eta = cfg.eta;
    let mut iterations = 0;

    // The gradient, the budget in use and the descent check only depend on
    // the binary iterate, so they are refreshed only when it moves.
    let descent_available = |current_dense: &[f64], grad: &[f64]| {
        grad.iter().zip(current_dense).any(|(&g, &v)| {
            let present = v >= 0.5;
            (!present && g < 0.0) || (!cfg.addition_only && present && g > 0.0)
        })
    };
    let mut grad = model.gradient_dense(&current_dense);
    let mut used = 0;
    let mut descent_left = descent_available(&current_dense, &grad);
    let mut stale_moves = 0;

    while iterations < cfg.max_iters {
        let step = match eta {
            Some(e) => e,
            None => {
                let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
                if gmax == 0.0 {
                    break;
                }
                *eta.insert(0.1 / gmax)
            }
        };

        if iterations > 0
            && (f_cur - f_prev).abs() <= cfg.tolerance
            && (used >= cfg.epsilon || !descent_left)
        {
            break;
        }

        for ((s, g), &o) in shadow.iter_mut().zip(&grad).zip(&orig) {
            *s -= step * g;
            if cfg.addition_only && *s < o {
                *s = o;
            }
        }
        let candidate = project_dense(&shadow, &orig, cfg);
        iterations += 1;
        f_prev = f_cur;
        if candidate != current {
            current_dense = candidate.to_dense();
            (f_cur, grad) = model.score_and_gradient_dense(&current_dense);
            used = candidate.added_relative_to(x).len() + x.added_relative_to(&candidate).len();
            descent_left = descent_available(&current_dense, &grad);
            if f_cur < best.1 {
                best = (candidate.clone(), f_cur);
                stale_moves = 0;
            } else {
                stale_moves += 1;
            }
            current = candidate;
        }
        trace.push(best.1);
        if cfg.patience.is_some_and(|p| stale_moves >= p) {
            break;
        }
    }

    let (adversarial, score_after) = best;
    let result = AttackResult {
        added_indices: adversarial.added_relative_to(x),
        adversarial,
        score_before: f0,
        score_after,
        score_trace: trace,
        evaded: score_after < cfg.threshold,
        iterations,
    };
    debug_assert!(result.is_feasible(x, cfg));
    Ok(result)
}

/// Optimal feature-addition attack on a linear model: add absent features in
/// ascending weight order (negative weights only), stopping once the score
/// drops below `threshold` or `epsilon` features were added.
pub fn greedy_linear_evasion(
    model: &LinearModel,
    x: &SparseBinaryVector,
    epsilon: usize,
    threshold: f64,
) -> Result<AttackResult> {
    let f0 = score(model, x)?;
    if f0 < threshold {
        return Ok(AttackResult::unchanged(x, f0, threshold));
    }
    let mut candidates: Vec<(usize, f64)> = model
        .weights()
        .iter()
        .enumerate()
        .filter(|&(j, &w)| w < 0.0 && !x.contains(j))
        .map(|(j, &w)| (j, w))
        .collect();
    candidates.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));

    let mut added = Vec::new();
    let mut f = f0;
    let mut trace = vec![f0];
    for &(j, w) in candidates.iter().take(epsilon) {
        if f < threshold {
            break;
        }
        added.push(j);
        f += w;
        trace.push(f);
    }
    let adversarial = x.with_added(&added)?;
    // recompute exactly rather than trusting the running sum
    let score_after = score(model, &adversarial)?;
    added.sort_unstable();
    Ok(AttackResult {
        adversarial,
        iterations: added.len(),
        added_indices: added,
        score_before: f0,
        score_after,
        score_trace: trace,
        evaded: score_after < threshold,
    })
}

/// Dispatches to PGD or, for linear models, the greedy oracle.
pub fn run_attack<M: DecisionFunction + ?Sized>(
    model: &M,
    x: &SparseBinaryVector,
    method: AttackMethod,
    cfg: &AttackConfig,
) -> Result<AttackResult> {
    match method {
        AttackMethod::Pgd => pgd_evasion(model, x, cfg),
        AttackMethod::Greedy => {
            cfg.validate()?;
            let linear = model.as_linear().ok_or(Error::NotLinear)?;
            greedy_linear_evasion(linear, x, cfg.epsilon, cfg.threshold)
        }
    }
}

/// Minimum number of added features needed to evade detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EpsilonMin {
    /// `0` when the clean sample is already below the threshold.
    Evadable(usize),
    NotEvadable,
}

impl EpsilonMin {
    pub fn value(self) -> Option<usize> {
        match self {
            EpsilonMin::Evadable(e) => Some(e),
            EpsilonMin::NotEvadable => None,
        }
    }
}

impl fmt::Display for EpsilonMin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EpsilonMin::Evadable(e) => write!(f, "{e}"),
            EpsilonMin::NotEvadable => f.write_str("NOT_EVADABLE"),
        }
    }
}

/// Smallest `ε` in `[1, eps_max]` whose attack evades. PGD is searched in
/// ascending order; the greedy oracle counts its additions directly.
pub fn epsilon_min<M: DecisionFunction + ?Sized>(
    model: &M,
    x: &SparseBinaryVector,
    eps_max: usize,
    method: AttackMethod,
    cfg: &AttackConfig,
) -> Result<EpsilonMin> {
    let f0 = score(model, x)?;
    if f0 < cfg.threshold {
        return Ok(EpsilonMin::Evadable(0));
    }
    if eps_max == 0 {
        return Ok(EpsilonMin::NotEvadable);
    }
    match method {
        AttackMethod::Greedy => {
            let r = run_attack(model, x, method, &cfg.with_epsilon(eps_max))?;
            Ok(if r.evaded {
                EpsilonMin::Evadable(r.added_indices.len())
            } else {
                EpsilonMin::NotEvadable
            })
        }
        AttackMethod::Pgd => {
            for eps in 1..=eps_max {
                if pgd_evasion(model, x, &cfg.with_epsilon(eps))?.evaded {
                    return Ok(EpsilonMin::Evadable(eps));
                }
            }
            Ok(EpsilonMin::NotEvadable)
        }
    }
}

/// Post-attack scores of every sample at every budget of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSweep {
    pub epsilons: Vec<usize>,
    pub clean_scores: Vec<f64>,
    /// `scores[e][i]`: score of sample `i` after the attack at `epsilons[e]`.
    pub scores: Vec<Vec<f64>>,
}

/// Attacks every sample at every budget. A budget of 0 means no attack.
pub fn attack_sweep<M: DecisionFunction + ?Sized>(
    model: &M,
    samples: &[SparseBinaryVector],
    eps_grid: &[usize],
    method: AttackMethod,
    cfg: &AttackConfig,
) -> Result<AttackSweep> {
    if samples.is_empty() {
        return Err(Error::Empty("no samples to attack".into()));
    }
    if eps_grid.is_empty() {
        return Err(Error::Empty("empty epsilon grid".into()));
    }
    let per_sample: Vec<(f64, Vec<f64>)> = samples
        .par_iter()
        .map(|x| {
            let clean = score(model, x)?;
            let row = eps_grid
                .iter()
                .map(|&eps| {
                    if eps == 0 {
                        Ok(clean)
                    } else {
                        Ok(run_attack(model, x, method, &cfg.with_epsilon(eps))?.score_after)
                    }
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok((clean, row))
        })
        .collect::<Result<_>>()?;

    let clean_scores = per_sample.iter().map(|(c, _)| *c).collect();
    let scores = (0..eps_grid.len())
        .map(|e| per_sample.iter().map(|(_, row)| row[e]).collect())
        .collect();
    Ok(AttackSweep {
        epsilons: eps_grid.to_vec(),
        clean_scores,
        scores,
    })
}

/// Detection rate at a fixed threshold as a function of the attack budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecurityCurve {
    pub epsilons: Vec<usize>,
    pub detection_rates: Vec<f64>,
    pub threshold: f64,
    pub fpr: Option<f64>,
    pub n_samples: usize,
}

impl SecurityCurve {
    pub fn from_sweep(sweep: &AttackSweep, threshold: f64, fpr: Option<f64>) -> Self {
        let n = sweep.clean_scores.len();
        let detection_rates = sweep
            .scores
            .iter()
            .map(|row| row.iter().filter(|&&s| s >= threshold).count() as f64 / n as f64)
            .collect();
        Self {
            epsilons: sweep.epsilons.clone(),
            detection_rates,
            threshold,
            fpr,
            n_samples: n,
        }
    }

    /// Trapezoidal area under the curve over the budget grid.
    pub fn area(&self) -> f64 {
        self.epsilons
            .windows(2)
            .zip(self.detection_rates.windows(2))
            .map(|(e, r)| (e[1] as f64 - e[0] as f64) * (r[0] + r[1]) * 0.5)
            .sum()
    }

    pub fn mean_rate(&self) -> f64 {
        self.detection_rates.iter().sum::<f64>() / self.detection_rates.len() as f64
    }
}

/// Attacks every malware sample at each budget and reports the fraction still
/// detected at `threshold`.
pub fn security_evaluation<M: DecisionFunction + ?Sized>(
    model: &M,
    malware: &[SparseBinaryVector],
    eps_grid: &[usize],
    threshold: f64,
    method: AttackMethod,
    cfg: &AttackConfig,
) -> Result<SecurityCurve> {
    let cfg = AttackConfig {
        threshold,
        ..cfg.clone()
    };
    let sweep = attack_sweep(model, malware, eps_grid, method, &cfg)?;
    Ok(SecurityCurve::from_sweep(&sweep, threshold, None))
}
