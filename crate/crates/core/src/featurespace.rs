//! Sparse binary feature vectors and labelled datasets.
//!
//! A sample lives in `{0,1}^d` and is stored as the sorted set of its active
//! indices. Datasets are read from and written to the libsvm-style text
//! format (`<label> <idx>:1 ...`, 1-based indices on disk, 0-based in memory).

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Feature families of the Android static-analysis feature space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureSet {
    /// Hardware components.
    S1,
    /// Requested permissions.
    S2,
    /// Application components.
    S3,
    /// Filtered intents.
    S4,
    /// Restricted API calls.
    S5,
    /// Used permissions.
    S6,
    /// Suspicious API calls.
    S7,
    /// Network addresses.
    S8,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 8] = [
        FeatureSet::S1,
        FeatureSet::S2,
        FeatureSet::S3,
        FeatureSet::S4,
        FeatureSet::S5,
        FeatureSet::S6,
        FeatureSet::S7,
        FeatureSet::S8,
    ];
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub name: String,
    pub set: FeatureSet,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpace {
    dim: usize,
    descriptors: Option<Vec<FeatureDescriptor>>,
}

impl FeatureSpace {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig(
                "feature space dimension must be >= 1".into(),
            ));
        }
        Ok(Self {
            dim,
            descriptors: None,
        })
    }

    pub fn with_descriptors(descriptors: Vec<FeatureDescriptor>) -> Result<Self> {
        let mut space = Self::new(descriptors.len())?;
        space.descriptors = Some(descriptors);
        Ok(space)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn descriptor(&self, index: usize) -> Option<&FeatureDescriptor> {
        self.descriptors.as_ref().and_then(|d| d.get(index))
    }

    pub fn descriptors(&self) -> Option<&[FeatureDescriptor]> {
        self.descriptors.as_deref()
    }
}

/// A point of `{0,1}^d`, stored as its strictly increasing set of active indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SparseBinaryVector {
    dim: usize,
    indices: Vec<usize>,
}

impl SparseBinaryVector {
    /// Builds a vector from already sorted, duplicate-free indices.
    pub fn new(dim: usize, indices: Vec<usize>) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "sparse indices must be strictly increasing".into(),
            ));
        }
        if let Some(&last) = indices.last() {
            if last >= dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: last + 1,
                });
            }
        }
        Ok(Self { dim, indices })
    }

    /// Sorts and deduplicates before validating.
    pub fn from_unsorted(dim: usize, mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        Self::new(dim, indices)
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            indices: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.dim];
        for &i in &self.indices {
            dense[i] = 1.0;
        }
        dense
    }

    /// Reads back a dense vector, treating every coordinate `>= 0.5` as active.
    pub fn from_dense(values: &[f64]) -> Self {
        let indices = values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v >= 0.5)
            .map(|(i, _)| i)
            .collect();
        Self {
            dim: values.len(),
            indices,
        }
    }

    /// `Σ_{i ∈ x} values[i]`.
    pub fn dot(&self, values: &[f64]) -> f64 {
        self.indices.iter().map(|&i| values[i]).sum()
    }

    /// Size of the intersection of the two index sets.
    pub fn overlap(&self, other: &SparseBinaryVector) -> usize {
        let (mut a, mut b) = (
            self.indices.iter().peekable(),
            other.indices.iter().peekable(),
        );
        let mut count = 0;
        while let (Some(&&x), Some(&&y)) = (a.peek(), b.peek()) {
            match x.cmp(&y) {
                std::cmp::Ordering::Less => {
                    a.next();
                }
                std::cmp::Ordering::Greater => {
                    b.next();
                }
                std::cmp::Ordering::Equal => {
                    count += 1;
                    a.next();
                    b.next();
                }
            }
        }
        count
    }

    /// Squared Euclidean distance between two binary vectors, i.e. the size of
    /// the symmetric difference.
    pub fn squared_distance(&self, other: &SparseBinaryVector) -> usize {
        self.nnz() + other.nnz() - 2 * self.overlap(other)
    }

    /// Indices active in `self` but not in `base`.
    pub fn added_relative_to(&self, base: &SparseBinaryVector) -> Vec<usize> {
        self.indices
            .iter()
            .copied()
            .filter(|&i| !base.contains(i))
            .collect()
    }

    pub fn with_added(&self, extra: &[usize]) -> Result<Self> {
        let mut indices = self.indices.clone();
        indices.extend_from_slice(extra);
        Self::from_unsorted(self.dim, indices)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Benign,
    Malware,
}

impl Label {
    /// `+1` for malware, `-1` for benign.
    pub fn sign(self) -> f64 {
        match self {
            Label::Benign => -1.0,
            Label::Malware => 1.0,
        }
    }

    pub fn from_sign(value: i64) -> Option<Self> {
        match value {
            1 => Some(Label::Malware),
            -1 => Some(Label::Benign),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledDataset {
    space: FeatureSpace,
    samples: Vec<SparseBinaryVector>,
    labels: Vec<Label>,
}

impl LabeledDataset {
    pub fn new(
        space: FeatureSpace,
        samples: Vec<SparseBinaryVector>,
        labels: Vec<Label>,
    ) -> Result<Self> {
        if samples.len() != labels.len() {
            return Err(Error::InvalidConfig(format!(
                "{} samples but {} labels",
                samples.len(),
                labels.len()
            )));
        }
        for s in &samples {
            crate::error::ensure_dim(space.dim(), s.dim())?;
        }
        Ok(Self {
            space,
            samples,
            labels,
        })
    }

    pub fn space(&self) -> &FeatureSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[SparseBinaryVector] {
        &self.samples
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SparseBinaryVector, Label)> {
        self.samples.iter().zip(self.labels.iter().copied())
    }

    pub fn indices_of(&self, label: Label) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.labels[i] == label)
            .collect()
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn has_both_classes(&self) -> bool {
        self.count(Label::Malware) > 0 && self.count(Label::Benign) > 0
    }

    /// New dataset holding the samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            space: self.space.clone(),
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// Parses the sparse text format from any reader.
pub fn parse_dataset<R: BufRead>(reader: R, d_hint: Option<usize>) -> Result<LabeledDataset> {
    let mut rows: Vec<(Label, Vec<usize>)> = Vec::new();
    let mut max_index: Option<usize> = None;

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse {
            line: lineno,
            message,
        };
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().unwrap_or_default();
        let label = label_tok
            .parse::<i64>()
            .ok()
            .and_then(Label::from_sign)
            .ok_or_else(|| err(format!("label must be +1 or -1, found {label_tok:?}")))?;

        let mut indices = Vec::new();
        for tok in tokens {
            let (idx, value) = tok
                .split_once(':')
                .ok_or_else(|| err(format!("expected <index>:1, found {tok:?}")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| err(format!("non-integer feature index {idx:?}")))?;
            if idx == 0 {
                return Err(err("feature indices are 1-based".into()));
            }
            match value.parse::<f64>() {
                Ok(1.0) => {}
                _ => return Err(err(format!("feature value must be 1, found {value:?}"))),
            }
            let zero_based = idx - 1;
            max_index = Some(max_index.map_or(zero_based, |m| m.max(zero_based)));
            indices.push(zero_based);
        }
        rows.push((label, indices));
    }

    let seen = max_index.map_or(0, |m| m + 1);
    let dim = d_hint.unwrap_or(0).max(seen);
    if dim == 0 {
        return Err(Error::Empty(
            "dataset has no features and no dimension hint was given".into(),
        ));
    }
    let space = FeatureSpace::new(dim)?;
    let mut samples = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for (label, indices) in rows {
        samples.push(SparseBinaryVector::from_unsorted(dim, indices)?);
        labels.push(label);
    }
    LabeledDataset::new(space, samples, labels)
}

pub fn load_dataset(path: impl AsRef<Path>, d_hint: Option<usize>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(BufReader::new(file), d_hint)
}

pub fn write_dataset<W: Write>(mut writer: W, ds: &LabeledDataset) -> std::io::Result<()> {
    for (x, label) in ds.iter() {
        write!(
            writer,
            "{}",
            if label == Label::Malware { "+1" } else { "-1" }
        )?;
        for &i in x.indices() {
            write!(writer, " {}:1", i + 1)?;
        }
        writeln!(writer)?;
    }
    Ok(())
}

pub fn save_dataset(path: impl AsRef<Path>, ds: &LabeledDataset) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    write_dataset(&mut writer, ds).map_err(|e| Error::io(path, e))?;
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Class-conditional independent Bernoulli generator.
///
/// Features `0..n_strong` fire with probability `base_density + strong_rate_gap`
/// in malware and `base_density` in benign samples. The remaining features
/// alternate direction: even offsets favour malware and odd offsets favour
/// benign samples, each by `weak_rate_gap`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub d: usize,
    pub n_benign: usize,
    pub n_malware: usize,
    pub n_strong: usize,
    pub strong_rate_gap: f64,
    pub weak_rate_gap: f64,
    pub base_density: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            d: 1000,
            n_benign: 1500,
            n_malware: 1000,
            n_strong: 10,
            strong_rate_gap: 0.6,
            weak_rate_gap: 0.05,
            base_density: 0.02,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.d == 0 {
            return bad("d must be >= 1");
        }
        if self.n_strong > self.d {
            return bad("n_strong must not exceed d");
        }
        if self.n_benign + self.n_malware == 0 {
            return bad("at least one sample must be requested");
        }
        for (name, v) in [
            ("strong_rate_gap", self.strong_rate_gap),
            ("weak_rate_gap", self.weak_rate_gap),
            ("base_density", self.base_density),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1]")));
            }
        }
        Ok(())
    }

    /// Activation probability of `feature` for the given class.
    pub fn activation_probability(&self, feature: usize, label: Label) -> f64 {
        let (gap, favours_malware) = if feature < self.n_strong {
            (self.strong_rate_gap, true)
        } else {
            (
                self.weak_rate_gap,
                (feature - self.n_strong).is_multiple_of(2),
            )
        };
        let boosted = (label == Label::Malware) == favours_malware;
        if boosted {
            (self.base_density + gap).min(1.0)
        } else {
            self.base_density
        }
    }
}

pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<LabeledDataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut labels: Vec<Label> = std::iter::repeat_n(Label::Benign, cfg.n_benign)
        .chain(std::iter::repeat_n(Label::Malware, cfg.n_malware))
        .collect();
    labels.shuffle(&mut rng);

    let probs: [Vec<f64>; 2] = [Label::Benign, Label::Malware].map(|l| {
        (0..cfg.d)
            .map(|j| cfg.activation_probability(j, l))
            .collect()
    });

    let samples = labels
        .iter()
        .map(|&label| {
            let p = &probs[(label == Label::Malware) as usize];
            let indices = (0..cfg.d).filter(|&j| rng.random::<f64>() < p[j]).collect();
            SparseBinaryVector::new(cfg.d, indices)
        })
        .collect::<Result<Vec<_>>>()?;

    let descriptors = (0..cfg.d)
        .map(|j| {
            let set = FeatureSet::ALL[j % 8];
            FeatureDescriptor {
                name: format!("{set}::feature_{j}"),
                set,
            }
        })
        .collect();
    LabeledDataset::new(
        FeatureSpace::with_descriptors(descriptors)?,
        samples,
        labels,
    )
}

/// Stratified, seeded partition of sample positions into (train, test).
///
/// Each class contributes `round(train_fraction * class_count)` samples to the
/// training side. Positions are returned in ascending order.
pub fn split_indices(
    ds: &LabeledDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if ds.is_empty() {
        return Err(Error::Empty("cannot split an empty dataset".into()));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidConfig(
            "train_fraction must lie in (0, 1)".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for label in [Label::Benign, Label::Malware] {
        let mut idx = ds.indices_of(label);
        idx.shuffle(&mut rng);
        let take = (train_fraction * idx.len() as f64).round() as usize;
        train.extend_from_slice(&idx[..take]);
        test.extend_from_slice(&idx[take..]);
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "train_fraction {train_fraction} leaves one side of the split empty"
        )));
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split(
    ds: &LabeledDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let (train, test) = split_indices(ds, train_fraction, seed)?;
    Ok((ds.subset(&train), ds.subset(&test)))
}

/// Draws `k` distinct positions from `pool` (all of them if `k >= pool.len()`),
/// returned in ascending order.
pub fn sample_positions(pool: &[usize], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = if k >= pool.len() {
        pool.to_vec()
    } else {
        pool.choose_multiple(&mut rng, k).copied().collect()
    };
    picked.sort_unstable();
    picked
}
