//! Adversarial robustness: the mean of `e^{-ℓ}` over attacked samples at each
//! budget, and its average over a budget grid.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::attack::{attack_sweep, AttackConfig, AttackMethod, AttackSweep};
use crate::error::{Error, Result};
use crate::featurespace::{Label, LabeledDataset, SparseBinaryVector};
use crate::models::{score_dataset, Classifier, DecisionFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RobustnessLoss {
    Hinge,
    Logistic,
}

impl RobustnessLoss {
    /// Each classifier is scored with its own training-loss family; ridge
    /// falls back to hinge.
    pub fn default_for(classifier: Classifier) -> Self {
        match classifier {
            Classifier::Logistic => RobustnessLoss::Logistic,
            _ => RobustnessLoss::Hinge,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RobustnessLoss::Hinge => "hinge",
            RobustnessLoss::Logistic => "logistic",
        }
    }
}

impl fmt::Display for RobustnessLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RobustnessLoss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hinge" => Ok(RobustnessLoss::Hinge),
            "logistic" => Ok(RobustnessLoss::Logistic),
            _ => Err(Error::InvalidConfig(format!("unknown loss {s:?}"))),
        }
    }
}

/// Neumaier-compensated sum, so means do not depend on reduction order beyond
/// the last few ulps.
pub fn compensated_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn mean(values: &[f64]) -> f64 {
    compensated_sum(values) / values.len() as f64
}

pub fn adversarial_loss(y: Label, score: f64, loss: RobustnessLoss) -> f64 {
    let margin = y.sign() * score;
    match loss {
        RobustnessLoss::Hinge => (1.0 - margin).max(0.0),
        RobustnessLoss::Logistic => {
            // ln(1 + e^{-m}) without overflow
            if margin > 0.0 {
                (-margin).exp().ln_1p()
            } else {
                -margin + margin.exp().ln_1p()
            }
        }
    }
}

/// `(1/n) Σ e^{-ℓ(y, s_i)}` over scores of attacked samples sharing label `y`.
pub fn robustness_from_scores(scores: &[f64], y: Label, loss: RobustnessLoss) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::Empty("no adversarial samples".into()));
    }
    let terms: Vec<f64> = scores
        .iter()
        .map(|&s| (-adversarial_loss(y, s, loss)).exp())
        .collect();
    Ok(mean(&terms))
}

/// Robustness over an already attacked, labelled set.
pub fn per_eps_robustness<M: DecisionFunction + ?Sized>(
    model: &M,
    adv_set: &LabeledDataset,
    loss: RobustnessLoss,
) -> Result<f64> {
    if adv_set.is_empty() {
        return Err(Error::Empty("no adversarial samples".into()));
    }
    let scores = score_dataset(model, adv_set)?;
    let terms: Vec<f64> = scores
        .iter()
        .zip(adv_set.labels())
        .map(|(&s, &y)| (-adversarial_loss(y, s, loss)).exp())
        .collect();
    Ok(mean(&terms))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessScore {
    pub loss: RobustnessLoss,
    pub epsilons: Vec<usize>,
    /// `R(D_ε, f)` for each budget of the grid.
    pub per_eps: Vec<f64>,
    /// Unweighted mean of `per_eps`.
    pub aggregate: f64,
    /// `losses[e][i]`: loss of sample `i` after the attack at `epsilons[e]`.
    pub losses: Vec<Vec<f64>>,
    /// Mean over the grid of `e^{-ℓ}` for each sample.
    pub per_sample: Vec<f64>,
}

impl RobustnessScore {
    /// Scores a sweep over malware samples.
    pub fn from_sweep(sweep: &AttackSweep, loss: RobustnessLoss) -> Result<Self> {
        let n = sweep.clean_scores.len();
        if n == 0 || sweep.epsilons.is_empty() {
            return Err(Error::Empty("empty attack sweep".into()));
        }
        let losses: Vec<Vec<f64>> = sweep
            .scores
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&s| adversarial_loss(Label::Malware, s, loss))
                    .collect()
            })
            .collect();
        let per_eps: Vec<f64> = losses
            .iter()
            .map(|row| mean(&row.iter().map(|l| (-l).exp()).collect::<Vec<_>>()))
            .collect();
        let per_sample = (0..n)
            .map(|i| mean(&losses.iter().map(|row| (-row[i]).exp()).collect::<Vec<_>>()))
            .collect();
        Ok(Self {
            loss,
            epsilons: sweep.epsilons.clone(),
            aggregate: mean(&per_eps),
            per_eps,
            losses,
            per_sample,
        })
    }
}

/// Attacks every malware sample at every budget and scores the outcome.
pub fn aggregate_robustness<M: DecisionFunction + ?Sized>(
    model: &M,
    malware: &[SparseBinaryVector],
    eps_grid: &[usize],
    method: AttackMethod,
    cfg: &AttackConfig,
    loss: RobustnessLoss,
) -> Result<RobustnessScore> {
    let sweep = attack_sweep(model, malware, eps_grid, method, cfg)?;
    RobustnessScore::from_sweep(&sweep, loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::LinearModel;

    fn sv(d: usize, idx: &[usize]) -> SparseBinaryVector {
        SparseBinaryVector::new(d, idx.to_vec()).unwrap()
    }

    #[test]
    fn loss_examples() {
        assert_eq!(
            adversarial_loss(Label::Malware, 1.0, RobustnessLoss::Hinge),
            0.0
        );
        assert_eq!(
            adversarial_loss(Label::Malware, -1.0, RobustnessLoss::Hinge),
            2.0
        );
        assert_eq!(
            adversarial_loss(Label::Benign, -3.0, RobustnessLoss::Hinge),
            0.0
        );
        let l = adversarial_loss(Label::Malware, 0.0, RobustnessLoss::Logistic);
        assert!((l - 2f64.ln()).abs() < 1e-15);
        // large margins stay finite
        assert!(adversarial_loss(Label::Malware, -800.0, RobustnessLoss::Logistic).is_finite());
        assert!(adversarial_loss(Label::Malware, 800.0, RobustnessLoss::Logistic) >= 0.0);
    }

    #[test]
    fn robustness_examples() {
        let h = RobustnessLoss::Hinge;
        assert_eq!(
            robustness_from_scores(&[1.0, 2.5, 7.0], Label::Malware, h).unwrap(),
            1.0
        );
        let single = robustness_from_scores(&[-1.0], Label::Malware, h).unwrap();
        assert!((single - (-2f64).exp()).abs() < 1e-15);
        let pair = robustness_from_scores(&[1.0, -1.0], Label::Malware, h).unwrap();
        assert!((pair - (1.0 + (-2f64).exp()) / 2.0).abs() < 1e-15);
        assert!(robustness_from_scores(&[], Label::Malware, h).is_err());
    }

    #[test]
    fn labelled_set_robustness() {
        let m = LinearModel::new(vec![1.0, -2.0], 0.0).unwrap();
        let ds = LabeledDataset::new(
            crate::featurespace::FeatureSpace::new(2).unwrap(),
            vec![sv(2, &[0]), sv(2, &[0, 1])],
            vec![Label::Malware, Label::Malware],
        )
        .unwrap();
        let r = per_eps_robustness(&m, &ds, RobustnessLoss::Hinge).unwrap();
        assert!((r - (1.0 + (-2f64).exp()) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn unattackable_model_is_fully_robust() {
        let m = LinearModel::new(vec![0.5, 1.0, 2.0, 0.1], 1.0).unwrap();
        let malware = vec![sv(4, &[]), sv(4, &[1, 2]), sv(4, &[3])];
        let score = aggregate_robustness(
            &m,
            &malware,
            &[1, 2, 3],
            AttackMethod::Pgd,
            &AttackConfig::default(),
            RobustnessLoss::Hinge,
        )
        .unwrap();
        assert_eq!(score.aggregate, 1.0);
        assert!(score.per_sample.iter().all(|&r| r == 1.0));
    }

    #[test]
    fn single_budget_aggregate_equals_per_eps() {
        let m = LinearModel::new(vec![-1.0, -0.5, 2.0], 0.5).unwrap();
        let malware = vec![sv(3, &[2]), sv(3, &[1, 2])];
        let s = aggregate_robustness(
            &m,
            &malware,
            &[1],
            AttackMethod::Greedy,
            &AttackConfig::default(),
            RobustnessLoss::Logistic,
        )
        .unwrap();
        assert_eq!(s.aggregate, s.per_eps[0]);
    }

    #[test]
    fn greedy_robustness_does_not_increase_with_budget() {
        let w: Vec<f64> = (0..30).map(|i| ((i * 7) % 11) as f64 / 5.0 - 1.0).collect();
        let m = LinearModel::new(w, 0.3).unwrap();
        let malware: Vec<_> = (0..10).map(|k| sv(30, &[k, k + 10, 29])).collect();
        let grid: Vec<usize> = (1..=15).collect();
        let s = aggregate_robustness(
            &m,
            &malware,
            &grid,
            AttackMethod::Greedy,
            &AttackConfig::default(),
            RobustnessLoss::Hinge,
        )
        .unwrap();
        for pair in s.per_eps.windows(2) {
            assert!(pair[1] <= pair[0]);
        }
        assert!(s.per_eps.iter().all(|&r| r > 0.0 && r <= 1.0));
    }

    #[test]
    fn compensated_sum_recovers_cancellation() {
        assert_eq!(compensated_sum(&[1.0, 1e100, 1.0, -1e100]), 2.0);
        assert_eq!(compensated_sum(&[]), 0.0);
    }
}
