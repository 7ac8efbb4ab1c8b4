//! Evenness of relevance vectors.
//!
//! Both metrics look only at the `m` largest attributions by magnitude
//! (padded with zeros when fewer are non-zero):
//!
//! * `E1 = 2/(m-1) · [m - Σ_{k=1..m} F(r,k)]`, where `F(r,k)` is the share of
//!   the total magnitude held by the `k` largest entries. 1 for a uniform
//!   vector, 0 when a single entry is non-zero.
//! * `E2 = (1/m) · ‖r‖₁ / ‖r‖∞`, ranging over `[1/m, 1]`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::{AttributionMethod, RelevanceVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvennessMetric {
    E1,
    E2,
}

impl EvennessMetric {
    pub const ALL: [EvennessMetric; 2] = [EvennessMetric::E1, EvennessMetric::E2];

    pub fn name(self) -> &'static str {
        match self {
            EvennessMetric::E1 => "e1",
            EvennessMetric::E2 => "e2",
        }
    }

    pub fn evaluate(self, values: &[f64], m: usize) -> Result<f64> {
        match self {
            EvennessMetric::E1 => evenness_e1(values, m),
            EvennessMetric::E2 => evenness_e2(values, m),
        }
    }
}

impl fmt::Display for EvennessMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EvennessMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "e1" => Ok(EvennessMetric::E1),
            "e2" => Ok(EvennessMetric::E2),
            _ => Err(Error::InvalidConfig(format!(
                "unknown evenness metric {s:?}"
            ))),
        }
    }
}

/// The `m` largest magnitudes in descending order, scaled so the largest is 1
/// and zero-padded to length `m`.
fn top_m_normalized(values: &[f64], m: usize) -> Result<Vec<f64>> {
    if m == 0 || m > values.len() {
        return Err(Error::InvalidConfig(format!(
            "m must satisfy 1 <= m <= d (m = {m}, d = {})",
            values.len()
        )));
    }
    let mut mags: Vec<f64> = values
        .iter()
        .map(|v| v.abs())
        .filter(|&v| v > 0.0)
        .collect();
    if mags.is_empty() {
        return Err(Error::UndefinedEvenness);
    }
    if mags.len() > m {
        mags.select_nth_unstable_by(m - 1, |a, b| b.total_cmp(a));
        mags.truncate(m);
    }
    mags.sort_by(|a, b| b.total_cmp(a));
    let top = mags[0];
    mags.iter_mut().for_each(|v| *v /= top);
    mags.resize(m, 0.0);
    Ok(mags)
}

/// `F(r,k)`: share of the top-`m` magnitude held by the `k` largest entries.
pub fn cumulative_ratio(values: &[f64], k: usize, m: usize) -> Result<f64> {
    if k == 0 || k > m {
        return Err(Error::InvalidConfig(format!(
            "k must satisfy 1 <= k <= m (k = {k}, m = {m})"
        )));
    }
    let top = top_m_normalized(values, m)?;
    let total: f64 = top.iter().sum();
    Ok(top[..k].iter().sum::<f64>() / total)
}

pub fn evenness_e1(values: &[f64], m: usize) -> Result<f64> {
    if m < 2 {
        return Err(Error::InvalidConfig("E1 needs m >= 2".into()));
    }
    let top = top_m_normalized(values, m)?;
    // m - Σ_k F(r,k) = Σ_i (i-1)|r_(i)| / Σ_i |r_(i)|
    let total: f64 = top.iter().sum();
    let weighted: f64 = top.iter().enumerate().map(|(i, v)| i as f64 * v).sum();
    Ok(2.0 * weighted / ((m - 1) as f64 * total))
}

pub fn evenness_e2(values: &[f64], m: usize) -> Result<f64> {
    let top = top_m_normalized(values, m)?;
    // largest entry is exactly 1 after normalization
    Ok(top.iter().sum::<f64>() / m as f64)
}

/// Per-sample evenness values of a set of relevance vectors, with their means
/// over the samples where the metric is defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvennessReport {
    pub method: Option<AttributionMethod>,
    pub m: usize,
    pub per_sample_e1: Vec<Option<f64>>,
    pub per_sample_e2: Vec<Option<f64>>,
    pub mean_e1: Option<f64>,
    pub mean_e2: Option<f64>,
    pub n_undefined: usize,
}

fn defined_or_undefined(result: Result<f64>) -> Result<Option<f64>> {
    match result {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedEvenness) => Ok(None),
        Err(e) => Err(e),
    }
}

fn mean_defined(values: &[Option<f64>]) -> Option<f64> {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    (!defined.is_empty())
        .then(|| crate::robustness::compensated_sum(&defined) / defined.len() as f64)
}

/// Evenness of each value vector. All-zero vectors are reported as undefined
/// and left out of the means.
pub fn evenness_of_values<'a>(
    vectors: impl IntoIterator<Item = &'a [f64]>,
    m: usize,
    method: Option<AttributionMethod>,
) -> Result<EvennessReport> {
    let mut e1 = Vec::new();
    let mut e2 = Vec::new();
    for v in vectors {
        e1.push(defined_or_undefined(evenness_e1(v, m))?);
        e2.push(defined_or_undefined(evenness_e2(v, m))?);
    }
    let n_undefined = e2.iter().filter(|v| v.is_none()).count();
    Ok(EvennessReport {
        method,
        m,
        mean_e1: mean_defined(&e1),
        mean_e2: mean_defined(&e2),
        per_sample_e1: e1,
        per_sample_e2: e2,
        n_undefined,
    })
}

pub fn evenness_report(relevances: &[RelevanceVector], m: usize) -> Result<EvennessReport> {
    let method = relevances.first().map(|r| r.method);
    evenness_of_values(relevances.iter().map(|r| r.values.as_slice()), m, method)
}

/// Mean per-sample evenness, skipping samples where it is undefined.
pub fn average_evenness(
    relevances: &[RelevanceVector],
    metric: EvennessMetric,
    m: usize,
) -> Result<f64> {
    if relevances.is_empty() {
        return Err(Error::Empty("no relevance vectors".into()));
    }
    let values = relevances
        .iter()
        .map(|r| defined_or_undefined(metric.evaluate(&r.values, m)))
        .collect::<Result<Vec<_>>>()?;
    mean_defined(&values).ok_or(Error::UndefinedEvenness)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rv(values: Vec<f64>) -> RelevanceVector {
        RelevanceVector {
            values,
            method: AttributionMethod::GradientInput,
            steps: None,
        }
    }

    /// Literal evaluation of the E1 definition through `F(r,k)`.
    fn e1_by_definition(values: &[f64], m: usize) -> f64 {
        let sum_f: f64 = (1..=m)
            .map(|k| cumulative_ratio(values, k, m).unwrap())
            .sum();
        2.0 / (m as f64 - 1.0) * (m as f64 - sum_f)
    }

    #[test]
    fn cumulative_ratio_examples() {
        let r = [2.0, 1.0, 1.0, 0.0];
        assert_eq!(cumulative_ratio(&r, 1, 4).unwrap(), 0.5);
        assert_eq!(cumulative_ratio(&r, 2, 4).unwrap(), 0.75);
        assert_eq!(cumulative_ratio(&r, 3, 4).unwrap(), 1.0);
        let uniform = [3.0; 5];
        for k in 1..=5 {
            assert!((cumulative_ratio(&uniform, k, 5).unwrap() - k as f64 / 5.0).abs() < 1e-15);
        }
        let single = [0.0, -4.0, 0.0];
        for k in 1..=3 {
            assert_eq!(cumulative_ratio(&single, k, 3).unwrap(), 1.0);
        }
    }

    #[test]
    fn e1_examples() {
        assert_eq!(evenness_e1(&[1.0; 4], 4).unwrap(), 1.0);
        assert_eq!(evenness_e1(&[5.0, 0.0, 0.0, 0.0], 4).unwrap(), 0.0);
        assert!((evenness_e1(&[2.0, 1.0, 1.0, 0.0], 4).unwrap() - 0.5).abs() < 1e-15);
        assert!((e1_by_definition(&[2.0, 1.0, 1.0, 0.0], 4) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn e2_examples() {
        assert_eq!(evenness_e2(&[0.7; 4], 4).unwrap(), 1.0);
        assert_eq!(evenness_e2(&[5.0, 0.0, 0.0, 0.0], 4).unwrap(), 0.25);
        assert_eq!(evenness_e2(&[2.0, 1.0, 1.0, 0.0], 4).unwrap(), 0.5);
    }

    #[test]
    fn error_cases() {
        assert!(matches!(
            evenness_e1(&[0.0; 4], 4),
            Err(Error::UndefinedEvenness)
        ));
        assert!(matches!(
            evenness_e2(&[0.0; 4], 4),
            Err(Error::UndefinedEvenness)
        ));
        assert!(evenness_e1(&[1.0; 4], 1).is_err());
        assert!(evenness_e2(&[1.0; 4], 5).is_err());
        assert!(cumulative_ratio(&[1.0; 4], 0, 4).is_err());
        assert!(cumulative_ratio(&[1.0; 4], 5, 4).is_err());
    }

    #[test]
    fn top_m_truncation_and_padding() {
        // only the 2 largest count with m = 2
        assert_eq!(evenness_e2(&[4.0, 0.1, -4.0, 0.2], 2).unwrap(), 1.0);
        // 2 non-zeros padded into a window of 4
        assert_eq!(evenness_e2(&[4.0, 0.0, -4.0, 0.0], 4).unwrap(), 0.5);
    }

    #[test]
    fn averages() {
        let same = vec![rv(vec![2.0, 1.0, 1.0, 0.0]); 3];
        assert_eq!(average_evenness(&same, EvennessMetric::E2, 4).unwrap(), 0.5);
        let pair = vec![rv(vec![1.0, 0.0, 0.0]), rv(vec![1.0, 1.0, 1.0])];
        assert_eq!(average_evenness(&pair, EvennessMetric::E1, 3).unwrap(), 0.5);
        let with_zero = vec![rv(vec![0.0; 3]), rv(vec![1.0, 1.0, 1.0])];
        assert_eq!(
            average_evenness(&with_zero, EvennessMetric::E1, 3).unwrap(),
            1.0
        );
        let report = evenness_report(&with_zero, 3).unwrap();
        assert_eq!(report.n_undefined, 1);
        assert_eq!(report.per_sample_e1[0], None);
        assert!(average_evenness(&[rv(vec![0.0; 3])], EvennessMetric::E1, 3).is_err());
        assert!(average_evenness(&[], EvennessMetric::E1, 3).is_err());
    }

    fn vector() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(prop_oneof![Just(0.0), -10.0..10.0f64], 2..40)
            .prop_filter("not all zero", |v| v.iter().any(|&x| x != 0.0))
    }

    proptest! {
        #[test]
        fn ranges_hold(v in vector(), m_frac in 0.0..1.0f64) {
            let m = 2 + ((v.len() - 2) as f64 * m_frac) as usize;
            let e1 = evenness_e1(&v, m).unwrap();
            let e2 = evenness_e2(&v, m).unwrap();
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&e1));
            prop_assert!(e2 >= 1.0 / m as f64 - 1e-12 && e2 <= 1.0 + 1e-12);
        }

        #[test]
        fn e1_matches_its_definition(v in vector()) {
            let m = v.len();
            prop_assert!((evenness_e1(&v, m).unwrap() - e1_by_definition(&v, m)).abs() < 1e-12);
        }

        #[test]
        fn monotone_concentration(v in vector(), frac in 0.0..1.0f64, pick in 0usize..40) {
            let m = v.len();
            let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
            let largest = (0..m).max_by(|&a, &b| mags[a].total_cmp(&mags[b]).then(b.cmp(&a))).unwrap();
            let donor = pick % m;
            prop_assume!(donor != largest);
            let before = evenness_e1(&mags, m).unwrap();
            let moved = mags[donor] * frac;
            mags[donor] -= moved;
            mags[largest] += moved;
            prop_assert!(evenness_e1(&mags, m).unwrap() <= before + 1e-12);
        }
    }
}
