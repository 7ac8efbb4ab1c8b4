//! Correlation coefficients with asymptotic two-sided p-values.
//!
//! Pearson and Spearman use the Student-t transform with `n - 2` degrees of
//! freedom; Kendall's tau-b uses the tie-corrected normal approximation of
//! the concordant-minus-discordant statistic. A coefficient is undefined
//! (degenerate) when either input has zero variance.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationMethod {
    Pearson,
    Spearman,
    Kendall,
}

impl CorrelationMethod {
    pub const ALL: [CorrelationMethod; 3] = [
        CorrelationMethod::Pearson,
        CorrelationMethod::Spearman,
        CorrelationMethod::Kendall,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CorrelationMethod::Pearson => "pearson",
            CorrelationMethod::Spearman => "spearman",
            CorrelationMethod::Kendall => "kendall",
        }
    }
}

impl fmt::Display for CorrelationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CorrelationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CorrelationMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown correlation method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub method: CorrelationMethod,
    /// `None` when degenerate.
    pub coefficient: Option<f64>,
    /// `None` when degenerate.
    pub p_value: Option<f64>,
    pub n: usize,
    pub degenerate: bool,
}

impl CorrelationReport {
    fn degenerate(method: CorrelationMethod, n: usize) -> Self {
        Self {
            method,
            coefficient: None,
            p_value: None,
            n,
            degenerate: true,
        }
    }

    fn defined(method: CorrelationMethod, n: usize, coefficient: f64, p_value: f64) -> Self {
        Self {
            method,
            coefficient: Some(coefficient),
            p_value: Some(p_value.clamp(0.0, 1.0)),
            n,
            degenerate: false,
        }
    }

    /// Positive coefficient with `p < alpha`.
    pub fn is_significant_positive(&self, alpha: f64) -> bool {
        matches!((self.coefficient, self.p_value), (Some(c), Some(p)) if c > 0.0 && p < alpha)
    }
}

fn check_inputs(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.len() < 3 {
        return Err(Error::InvalidConfig(format!(
            "correlation needs at least 3 pairs, got {}",
            xs.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig(
            "correlation inputs must be finite".into(),
        ));
    }
    Ok(())
}

fn is_constant(values: &[f64]) -> bool {
    values.iter().all(|&v| v == values[0])
}

/// Sample Pearson coefficient, `None` if either input is constant.
fn pearson_coefficient(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if is_constant(xs) || is_constant(ys) {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

fn t_test_p_value(r: f64, n: usize) -> f64 {
    if n <= 2 || r.abs() >= 1.0 {
        return if r.abs() >= 1.0 { 0.0 } else { 1.0 };
    }
    let df = (n - 2) as f64;
    let t = r * (df / ((1.0 - r) * (1.0 + r))).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("degrees of freedom are positive");
    2.0 * dist.sf(t.abs())
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<CorrelationReport> {
    check_inputs(xs, ys)?;
    let n = xs.len();
    Ok(match pearson_coefficient(xs, ys) {
        Some(r) => {
            CorrelationReport::defined(CorrelationMethod::Pearson, n, r, t_test_p_value(r, n))
        }
        None => CorrelationReport::degenerate(CorrelationMethod::Pearson, n),
    })
}

/// 1-based ranks, tied values sharing the mean of their positions.
pub fn mid_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<CorrelationReport> {
    check_inputs(xs, ys)?;
    let n = xs.len();
    Ok(match pearson_coefficient(&mid_ranks(xs), &mid_ranks(ys)) {
        Some(r) => {
            CorrelationReport::defined(CorrelationMethod::Spearman, n, r, t_test_p_value(r, n))
        }
        None => CorrelationReport::degenerate(CorrelationMethod::Spearman, n),
    })
}

/// Classification of the `n(n-1)/2` pairs of observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairCounts {
    pub concordant: u64,
    pub discordant: u64,
    /// Pairs tied in `x`, in `y`, or in both.
    pub tied: u64,
}

pub fn pair_counts(xs: &[f64], ys: &[f64]) -> PairCounts {
    let mut counts = PairCounts {
        concordant: 0,
        discordant: 0,
        tied: 0,
    };
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            let sx = xs[i].total_cmp(&xs[j]);
            let sy = ys[i].total_cmp(&ys[j]);
            if xs[i] == xs[j] || ys[i] == ys[j] {
                counts.tied += 1;
            } else if sx == sy {
                counts.concordant += 1;
            } else {
                counts.discordant += 1;
            }
        }
    }
    counts
}

/// Sizes of groups of equal values (only groups larger than one).
fn tie_groups(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
        .chunk_by(|a, b| a == b)
        .filter(|g| g.len() > 1)
        .map(|g| g.len() as f64)
        .collect()
}

pub fn kendall(xs: &[f64], ys: &[f64]) -> Result<CorrelationReport> {
    check_inputs(xs, ys)?;
    let n = xs.len();
    let nf = n as f64;
    let counts = pair_counts(xs, ys);
    let s = counts.concordant as f64 - counts.discordant as f64;

    let tx = tie_groups(xs);
    let ty = tie_groups(ys);
    let n0 = nf * (nf - 1.0) / 2.0;
    let n1: f64 = tx.iter().map(|t| t * (t - 1.0) / 2.0).sum();
    let n2: f64 = ty.iter().map(|t| t * (t - 1.0) / 2.0).sum();
    if n1 == n0 || n2 == n0 {
        return Ok(CorrelationReport::degenerate(CorrelationMethod::Kendall, n));
    }
    let tau = (s / ((n0 - n1).sqrt() * (n0 - n2).sqrt())).clamp(-1.0, 1.0);

    let sum = |g: &[f64], f: &dyn Fn(f64) -> f64| g.iter().map(|&t| f(t)).sum::<f64>();
    let v0 = nf * (nf - 1.0) * (2.0 * nf + 5.0);
    let vt = sum(&tx, &|t| t * (t - 1.0) * (2.0 * t + 5.0));
    let vu = sum(&ty, &|t| t * (t - 1.0) * (2.0 * t + 5.0));
    let v1 = sum(&tx, &|t| t * (t - 1.0)) * sum(&ty, &|t| t * (t - 1.0));
    let v2 = sum(&tx, &|t| t * (t - 1.0) * (t - 2.0)) * sum(&ty, &|t| t * (t - 1.0) * (t - 2.0));
    let var = (v0 - vt - vu) / 18.0
        + v1 / (2.0 * nf * (nf - 1.0))
        + v2 / (9.0 * nf * (nf - 1.0) * (nf - 2.0));
    let z = s / var.sqrt();
    let p = erfc(z.abs() / std::f64::consts::SQRT_2);
    Ok(CorrelationReport::defined(
        CorrelationMethod::Kendall,
        n,
        tau,
        p,
    ))
}

pub fn correlate(xs: &[f64], ys: &[f64], method: CorrelationMethod) -> Result<CorrelationReport> {
    match method {
        CorrelationMethod::Pearson => pearson(xs, ys),
        CorrelationMethod::Spearman => spearman(xs, ys),
        CorrelationMethod::Kendall => kendall(xs, ys),
    }
}

/// Pearson, Spearman and Kendall reports for aligned samples.
pub fn correlation_suite(evenness: &[f64], robustness: &[f64]) -> Result<Vec<CorrelationReport>> {
    CorrelationMethod::ALL
        .into_iter()
        .map(|m| correlate(evenness, robustness, m))
        .collect()
}

/// Two-sided permutation p-value, `(k + 1) / (permutations + 1)` where `k`
/// counts shuffles of `ys` whose coefficient is at least as extreme as the
/// observed one. `None` when the observed coefficient is undefined.
pub fn permutation_p_value(
    xs: &[f64],
    ys: &[f64],
    method: CorrelationMethod,
    permutations: usize,
    seed: u64,
) -> Result<Option<f64>> {
    if permutations == 0 {
        return Err(Error::InvalidConfig("need at least one permutation".into()));
    }
    let Some(observed) = correlate(xs, ys, method)?.coefficient else {
        return Ok(None);
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled = ys.to_vec();
    let mut extreme = 0usize;
    for _ in 0..permutations {
        shuffled.shuffle(&mut rng);
        let c = correlate(xs, &shuffled, method)?.coefficient.unwrap_or(0.0);
        if c.abs() >= observed.abs() - 1e-12 {
            extreme += 1;
        }
    }
    Ok(Some((extreme + 1) as f64 / (permutations + 1) as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn coef(r: CorrelationReport) -> f64 {
        r.coefficient.unwrap()
    }

    #[test]
    fn pearson_examples() {
        assert!((coef(pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap()) - 1.0).abs() < 1e-15);
        let r = pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((coef(r) - 0.8).abs() < 1e-12);
        // the mean of repeated 0.1 is not exactly 0.1
        assert!(pearson(&[0.1; 3], &[1.0, 2.0, 3.0]).unwrap().degenerate);
        let flat = pearson(&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]).unwrap();
        assert!(flat.degenerate);
        assert_eq!(flat.coefficient, None);
        assert_eq!(flat.p_value, None);
    }

    #[test]
    fn pearson_p_value_matches_t_distribution() {
        // r = 0.8, n = 4: t = 0.8·√(2/0.36) ≈ 1.8856, two-sided p ≈ 0.2
        let r = pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((r.p_value.unwrap() - 0.2).abs() < 1e-9);
    }

    #[test]
    fn spearman_examples() {
        let xs = [1.0, 2.0, 3.0];
        assert!((coef(spearman(&xs, &[1.0, 3.0, 2.0]).unwrap()) - 0.5).abs() < 1e-15);
        assert!((coef(spearman(&xs, &[1.0, 8.0, 27.0]).unwrap()) - 1.0).abs() < 1e-15);
        assert!((coef(spearman(&xs, &[3.0, 2.0, 1.0]).unwrap()) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn kendall_examples() {
        let xs = [1.0, 2.0, 3.0];
        assert!((coef(kendall(&xs, &[1.0, 3.0, 2.0]).unwrap()) - 1.0 / 3.0).abs() < 1e-15);
        assert!((coef(kendall(&xs, &[4.0, 5.0, 9.0]).unwrap()) - 1.0).abs() < 1e-15);
        assert!(kendall(&[2.0, 2.0, 2.0], &xs).unwrap().degenerate);
    }

    #[test]
    fn kendall_tau_b_with_ties() {
        // x = (1,1,2,3), y = (1,2,2,3): C = 4, D = 0, n0 = 6, n1 = n2 = 1
        let r = kendall(&[1.0, 1.0, 2.0, 3.0], &[1.0, 2.0, 2.0, 3.0]).unwrap();
        assert!((coef(r) - 4.0 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn kendall_p_value_without_ties() {
        // n = 10, perfect agreement: S = 45, var = 10·9·25/18 = 125
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let p = kendall(&xs, &xs).unwrap().p_value.unwrap();
        let expected = erfc(45.0 / 125f64.sqrt() / std::f64::consts::SQRT_2);
        assert!((p - expected).abs() < 1e-15);
    }

    #[test]
    fn mid_ranks_average_ties() {
        assert_eq!(
            mid_ranks(&[10.0, 20.0, 10.0, 5.0]),
            vec![2.5, 4.0, 2.5, 1.0]
        );
    }

    #[test]
    fn argument_errors() {
        assert!(pearson(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(spearman(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
        assert!(kendall(&[1.0, f64::NAN, 3.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn suite_on_aligned_inputs() {
        let xs = [0.1, 0.4, 0.5, 0.9];
        let reports = correlation_suite(&xs, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(reports.len(), 3);
        assert!((coef(reports[1].clone()) - 1.0).abs() < 1e-15);
        assert!((coef(reports[2].clone()) - 1.0).abs() < 1e-15);
        let flat = correlation_suite(&[0.3; 4], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(flat.iter().all(|r| r.degenerate));
    }

    #[test]
    fn permutation_p_values() {
        let xs: Vec<f64> = (0..30).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * 2.0 + (x * 7.0).sin()).collect();
        let p = permutation_p_value(&xs, &ys, CorrelationMethod::Spearman, 200, 1).unwrap();
        assert_eq!(p, Some(1.0 / 201.0));
        let again = permutation_p_value(&xs, &ys, CorrelationMethod::Spearman, 200, 1).unwrap();
        assert_eq!(p, again);
        assert_eq!(
            permutation_p_value(&[1.0; 5], &ys[..5], CorrelationMethod::Pearson, 10, 0).unwrap(),
            None
        );
    }

    fn paired() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (3usize..30).prop_flat_map(|n| {
            (
                prop::collection::vec(prop_oneof![-5.0..5.0f64, (-3i32..3).prop_map(f64::from)], n),
                prop::collection::vec(prop_oneof![-5.0..5.0f64, (-3i32..3).prop_map(f64::from)], n),
            )
        })
    }

    proptest! {
        #[test]
        fn coefficients_are_bounded_and_symmetric((xs, ys) in paired()) {
            for m in CorrelationMethod::ALL {
                let a = correlate(&xs, &ys, m).unwrap();
                let b = correlate(&ys, &xs, m).unwrap();
                prop_assert_eq!(a.degenerate, b.degenerate);
                if let (Some(ca), Some(cb)) = (a.coefficient, b.coefficient) {
                    prop_assert!((-1.0..=1.0).contains(&ca));
                    prop_assert!((ca - cb).abs() < 1e-12);
                    let p = a.p_value.unwrap();
                    prop_assert!((0.0..=1.0).contains(&p));
                }
            }
        }

        #[test]
        fn pair_counts_cover_all_pairs((xs, ys) in paired()) {
            let c = pair_counts(&xs, &ys);
            let n = xs.len() as u64;
            prop_assert_eq!(c.concordant + c.discordant + c.tied, n * (n - 1) / 2);
        }

        #[test]
        fn transform_invariance((xs, ys) in paired(), a in 0.1..10.0f64, b in -5.0..5.0f64) {
            let affine: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
            let monotone: Vec<f64> = xs.iter().map(|x| x.exp()).collect();
            if let (Some(p0), Some(p1)) = (pearson(&xs, &ys).unwrap().coefficient, pearson(&affine, &ys).unwrap().coefficient) {
                prop_assert!((p0 - p1).abs() < 1e-9);
            }
            for m in [CorrelationMethod::Spearman, CorrelationMethod::Kendall] {
                let r0 = correlate(&xs, &ys, m).unwrap().coefficient;
                let r1 = correlate(&monotone, &ys, m).unwrap().coefficient;
                match (r0, r1) {
                    (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
                    (None, None) => {}
                    _ => prop_assert!(false, "degeneracy changed"),
                }
            }
        }
    }
}
