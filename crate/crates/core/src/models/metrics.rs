//! ROC analysis and detection rate at a fixed false-positive rate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{score, DecisionFunction};
use crate::error::{Error, Result};
use crate::featurespace::{Label, LabeledDataset};

/// Scores every sample of `ds`, in dataset order.
pub fn score_dataset<M: DecisionFunction + ?Sized>(
    model: &M,
    ds: &LabeledDataset,
) -> Result<Vec<f64>> {
    ds.samples().par_iter().map(|x| score(model, x)).collect()
}

fn split_scores(scores: &[f64], ds: &LabeledDataset) -> (Vec<f64>, Vec<f64>) {
    let mut benign = Vec::new();
    let mut malware = Vec::new();
    for (&s, &l) in scores.iter().zip(ds.labels()) {
        match l {
            Label::Benign => benign.push(s),
            Label::Malware => malware.push(s),
        }
    }
    (benign, malware)
}

/// Smallest threshold `t` such that the fraction of benign scores `>= t` is at
/// most `fpr_target`.
pub fn threshold_at_fpr(benign: &[f64], fpr_target: f64) -> Result<f64> {
    if benign.is_empty() {
        return Err(Error::NoBenign);
    }
    if !(0.0..=1.0).contains(&fpr_target) {
        return Err(Error::InvalidConfig("fpr_target must lie in [0, 1]".into()));
    }
    let mut sorted = benign.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let allowed = (fpr_target * sorted.len() as f64 + 1e-9).floor() as usize;
    if allowed >= sorted.len() {
        return Ok(f64::NEG_INFINITY);
    }
    // strictly above the first benign score that would exceed the budget
    Ok(sorted[allowed].next_up())
}

/// `(detection rate, threshold)` from pre-computed class scores.
pub fn detection_rate_from_scores(
    benign: &[f64],
    malware: &[f64],
    fpr_target: f64,
) -> Result<(f64, f64)> {
    let threshold = threshold_at_fpr(benign, fpr_target)?;
    if malware.is_empty() {
        return Err(Error::Empty("no malware samples to detect".into()));
    }
    let detected = malware.iter().filter(|&&s| s >= threshold).count();
    Ok((detected as f64 / malware.len() as f64, threshold))
}

pub fn detection_rate_at_fpr<M: DecisionFunction + ?Sized>(
    model: &M,
    ds: &LabeledDataset,
    fpr_target: f64,
) -> Result<(f64, f64)> {
    let scores = score_dataset(model, ds)?;
    let (benign, malware) = split_scores(&scores, ds);
    detection_rate_from_scores(&benign, &malware, fpr_target)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

/// Threshold sweep over the distinct scores, from `(0,0)` to `(1,1)`.
pub fn roc_from_scores(benign: &[f64], malware: &[f64]) -> Result<Vec<RocPoint>> {
    if benign.is_empty() || malware.is_empty() {
        return Err(Error::SingleClass);
    }
    let mut all: Vec<(f64, bool)> = benign
        .iter()
        .map(|&s| (s, false))
        .chain(malware.iter().map(|&s| (s, true)))
        .collect();
    all.sort_by(|a, b| b.0.total_cmp(&a.0));

    let (nb, nm) = (benign.len() as f64, malware.len() as f64);
    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0 }];
    let (mut fp, mut tp) = (0usize, 0usize);
    let mut i = 0;
    while i < all.len() {
        let s = all[i].0;
        while i < all.len() && all[i].0 == s {
            if all[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / nb,
            tpr: tp as f64 / nm,
        });
    }
    Ok(points)
}

pub fn roc_curve<M: DecisionFunction + ?Sized>(
    model: &M,
    ds: &LabeledDataset,
) -> Result<Vec<RocPoint>> {
    let scores = score_dataset(model, ds)?;
    let (benign, malware) = split_scores(&scores, ds);
    roc_from_scores(&benign, &malware)
}

/// Trapezoidal area under a ROC curve.
pub fn auc(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) * 0.5)
        .sum()
}

/// Best true-positive rate attainable at false-positive rate `fpr` (step
/// interpolation), used to average curves on a common grid.
pub fn interpolate_tpr(points: &[RocPoint], fpr: f64) -> f64 {
    points
        .iter()
        .filter(|p| p.fpr <= fpr)
        .map(|p| p.tpr)
        .fold(0.0, f64::max)
}
