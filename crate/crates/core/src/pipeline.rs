//! End-to-end experiments: train each classifier, fix the detection threshold
//! at a target false-positive rate, attack the test malware over a budget
//! grid, explain the clean samples, and correlate per-sample evenness with
//! per-sample robustness.
//!
//! Every repetition draws a fresh stratified split. Results are kept per
//! repetition and averaged (or pooled, for correlations) per classifier.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{attack_sweep, AttackConfig, AttackMethod, AttackSweep, SecurityCurve};
use crate::error::{Error, Result};
use crate::evenness::{evenness_e1, evenness_e2, EvennessMetric};
use crate::explain::{explain, AttributionMethod, DEFAULT_IG_STEPS};
use crate::featurespace::{
    generate_synthetic, load_dataset, sample_positions, split_indices, Label, LabeledDataset,
    SyntheticConfig,
};
use crate::models::{
    auc, detection_rate_from_scores, roc_from_scores, score_dataset, train_classifier, Classifier,
    ClassifierSpec, RocPoint,
};
use crate::robustness::{compensated_sum, RobustnessLoss, RobustnessScore};
use crate::stats::{correlation_suite, CorrelationMethod, CorrelationReport};

/// Where the samples come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetSource {
    Synthetic(SyntheticConfig),
    File {
        path: PathBuf,
        #[serde(default)]
        dim: Option<usize>,
    },
}

impl DatasetSource {
    pub fn load(&self) -> Result<LabeledDataset> {
        match self {
            DatasetSource::Synthetic(cfg) => generate_synthetic(cfg),
            DatasetSource::File { path, dim } => load_dataset(path, *dim),
        }
    }
}

/// PGD settings shared by every attack of an experiment. The budget and the
/// evasion threshold are filled in per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackSettings {
    pub eta: Option<f64>,
    pub tolerance: f64,
    pub max_iters: usize,
    pub patience: Option<usize>,
}

impl Default for AttackSettings {
    fn default() -> Self {
        let d = AttackConfig::default();
        Self {
            eta: d.eta,
            tolerance: d.tolerance,
            max_iters: d.max_iters,
            patience: d.patience,
        }
    }
}

impl AttackSettings {
    fn config(&self, threshold: f64) -> AttackConfig {
        AttackConfig {
            eta: self.eta,
            tolerance: self.tolerance,
            max_iters: self.max_iters,
            patience: self.patience,
            threshold,
            ..AttackConfig::default()
        }
    }
}

fn default_train_fraction() -> f64 {
    0.5
}
fn default_repetitions() -> usize {
    1
}
fn default_roster() -> Vec<ClassifierSpec> {
    Classifier::ALL
        .into_iter()
        .map(ClassifierSpec::preset)
        .collect()
}
fn default_eps_grid() -> Vec<usize> {
    (1..=50).collect()
}
fn default_fpr() -> f64 {
    0.01
}
fn default_methods() -> Vec<AttributionMethod> {
    AttributionMethod::ALL.to_vec()
}
fn default_ig_steps() -> usize {
    DEFAULT_IG_STEPS
}
fn default_m() -> usize {
    1000
}
fn default_scatter_samples() -> Option<usize> {
    Some(100)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_roster")]
    pub classifiers: Vec<ClassifierSpec>,
    #[serde(default = "default_eps_grid")]
    pub eps_grid: Vec<usize>,
    #[serde(default = "default_fpr")]
    pub fpr: f64,
    #[serde(default = "default_methods")]
    pub methods: Vec<AttributionMethod>,
    #[serde(default = "default_ig_steps")]
    pub ig_steps: usize,
    /// Evenness window, clamped to the feature dimension.
    #[serde(default = "default_m")]
    pub m: usize,
    /// Loss for robustness; each classifier's own loss family when unset.
    #[serde(default)]
    pub loss: Option<RobustnessLoss>,
    /// Number of test malware samples to attack; all of them when unset.
    #[serde(default)]
    pub n_attacked: Option<usize>,
    /// Also explain test benign samples and fold them into evenness means.
    #[serde(default)]
    pub include_benign_evenness: bool,
    #[serde(default)]
    pub attack: AttackSettings,
    /// Rows per classifier in the evenness/robustness scatter files.
    #[serde(default = "default_scatter_samples")]
    pub scatter_samples: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(dataset: DatasetSource) -> Self {
        Self {
            dataset,
            train_fraction: default_train_fraction(),
            seed: 0,
            repetitions: default_repetitions(),
            classifiers: default_roster(),
            eps_grid: default_eps_grid(),
            fpr: default_fpr(),
            methods: default_methods(),
            ig_steps: default_ig_steps(),
            m: default_m(),
            loss: None,
            n_attacked: None,
            include_benign_evenness: false,
            attack: AttackSettings::default(),
            scatter_samples: default_scatter_samples(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_toml(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.repetitions == 0 {
            return bad("repetitions must be >= 1".into());
        }
        if self.classifiers.is_empty() {
            return bad("classifier roster is empty".into());
        }
        let mut labels: Vec<&str> = self.classifiers.iter().map(|c| c.label()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return bad("classifier labels must be unique".into());
        }
        if self.eps_grid.is_empty() {
            return bad("eps_grid is empty".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad("train_fraction must lie in (0, 1)".into());
        }
        if !(0.0..=1.0).contains(&self.fpr) {
            return bad("fpr must lie in [0, 1]".into());
        }
        if self.methods.is_empty() {
            return bad("no attribution methods requested".into());
        }
        if self.ig_steps == 0 {
            return bad("ig_steps must be >= 1".into());
        }
        if self.m < 2 {
            return bad("m must be >= 2".into());
        }
        if self.n_attacked == Some(0) {
            return bad("n_attacked must be >= 1".into());
        }
        self.attack.config(0.0).validate()
    }

    fn loss_for(&self, classifier: Classifier) -> RobustnessLoss {
        self.loss
            .unwrap_or_else(|| RobustnessLoss::default_for(classifier))
    }

    /// Budgets of the security curve: the configured grid plus the clean point.
    fn curve_grid(&self) -> Vec<usize> {
        let mut grid = self.eps_grid.clone();
        if !grid.contains(&0) {
            grid.insert(0, 0);
        }
        grid
    }
}

/// SplitMix64 of `base` advanced by `stream` and `index`, so that every
/// repetition and classifier gets an independent, reproducible seed.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const STREAM_SPLIT: u64 = 1;
const STREAM_ATTACKED: u64 = 2;
const STREAM_TRAIN: u64 = 3;
const STREAM_SCATTER: u64 = 4;

/// Evenness of one sample's explanation under one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEvenness {
    pub method: AttributionMethod,
    pub e1: Option<f64>,
    pub e2: Option<f64>,
}

impl SampleEvenness {
    pub fn get(&self, metric: EvennessMetric) -> Option<f64> {
        match metric {
            EvennessMetric::E1 => self.e1,
            EvennessMetric::E2 => self.e2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    /// Position of the sample in the full dataset.
    pub sample_id: usize,
    pub clean_score: f64,
    /// Mean over the budget grid of `e^{-ℓ}`.
    pub robustness: f64,
    pub evenness: Vec<SampleEvenness>,
}

impl SampleRecord {
    pub fn evenness_of(&self, method: AttributionMethod, metric: EvennessMetric) -> Option<f64> {
        self.evenness
            .iter()
            .find(|e| e.method == method)
            .and_then(|e| e.get(metric))
    }
}

/// Correlations between one evenness measure and per-sample robustness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCell {
    pub method: AttributionMethod,
    pub metric: EvennessMetric,
    pub reports: Vec<CorrelationReport>,
}

impl CorrelationCell {
    pub fn report(&self, method: CorrelationMethod) -> Option<&CorrelationReport> {
        self.reports.iter().find(|r| r.method == method)
    }

    pub fn is_degenerate(&self) -> bool {
        self.reports.iter().all(|r| r.degenerate)
    }
}

/// Mean evenness over the samples where it is defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvennessMean {
    pub method: AttributionMethod,
    pub metric: EvennessMetric,
    pub mean: Option<f64>,
    pub n_defined: usize,
}

/// One classifier trained and analysed on one repetition's split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub repetition: usize,
    pub label: String,
    pub train_seed: u64,
    pub threshold: f64,
    pub auc: f64,
    pub detection_rate: f64,
    pub roc: Vec<RocPoint>,
    /// Post-attack scores over the curve grid (clean point included).
    pub sweep: AttackSweep,
    pub curve: SecurityCurve,
    pub robustness: RobustnessScore,
    /// Mean detection rate over the configured budget grid.
    pub attack_detection_rate: f64,
    pub samples: Vec<SampleRecord>,
    pub evenness: Vec<EvennessMean>,
    pub correlations: Vec<CorrelationCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub repetition: usize,
    pub label: String,
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierReport {
    pub label: String,
    pub classifier: Classifier,
    pub loss: RobustnessLoss,
    pub cells: Vec<CellResult>,
    pub mean_auc: f64,
    pub mean_detection_rate: f64,
    pub curve_epsilons: Vec<usize>,
    pub mean_curve: Vec<f64>,
    pub mean_robustness: f64,
    pub mean_attack_detection_rate: f64,
    /// Averaged over repetitions.
    pub evenness: Vec<EvennessMean>,
    /// Pooled over repetitions.
    pub correlations: Vec<CorrelationCell>,
}

impl ClassifierReport {
    pub fn correlation(
        &self,
        method: AttributionMethod,
        metric: EvennessMetric,
    ) -> Option<&CorrelationCell> {
        self.correlations
            .iter()
            .find(|c| c.method == method && c.metric == metric)
    }

    pub fn mean_evenness(&self, method: AttributionMethod, metric: EvennessMetric) -> Option<f64> {
        self.evenness
            .iter()
            .find(|e| e.method == method && e.metric == metric)
            .and_then(|e| e.mean)
    }

    fn samples(&self) -> impl Iterator<Item = (usize, &SampleRecord)> {
        self.cells
            .iter()
            .flat_map(|c| c.samples.iter().map(move |s| (c.repetition, s)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionPlan {
    pub repetition: usize,
    pub split_seed: u64,
    pub attacked_seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub attacked_ids: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub dim: usize,
    pub n_samples: usize,
    pub m_effective: usize,
    pub plans: Vec<RepetitionPlan>,
    pub classifiers: Vec<ClassifierReport>,
    pub failures: Vec<CellFailure>,
}

impl ExperimentReport {
    pub fn classifier(&self, label: &str) -> Option<&ClassifierReport> {
        self.classifiers.iter().find(|c| c.label == label)
    }
}

fn mean(values: &[f64]) -> f64 {
    compensated_sum(values) / values.len() as f64
}

fn defined_or_none(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedEvenness) => Ok(None),
        Err(e) => Err(e),
    }
}

fn correlate_defined(pairs: &[(f64, f64)]) -> Vec<CorrelationReport> {
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    correlation_suite(&xs, &ys).unwrap_or_else(|_| {
        CorrelationMethod::ALL
            .into_iter()
            .map(|method| CorrelationReport {
                method,
                coefficient: None,
                p_value: None,
                n: pairs.len(),
                degenerate: true,
            })
            .collect()
    })
}

fn correlation_cells<'a>(
    methods: &[AttributionMethod],
    samples: impl Iterator<Item = &'a SampleRecord> + Clone,
) -> Vec<CorrelationCell> {
    let mut cells = Vec::new();
    for &method in methods {
        for metric in EvennessMetric::ALL {
            let pairs: Vec<(f64, f64)> = samples
                .clone()
                .filter_map(|s| s.evenness_of(method, metric).map(|e| (e, s.robustness)))
                .collect();
            cells.push(CorrelationCell {
                method,
                metric,
                reports: correlate_defined(&pairs),
            });
        }
    }
    cells
}

fn evenness_means(methods: &[AttributionMethod], rows: &[&[SampleEvenness]]) -> Vec<EvennessMean> {
    let mut out = Vec::new();
    for &method in methods {
        for metric in EvennessMetric::ALL {
            let values: Vec<f64> = rows
                .iter()
                .filter_map(|r| {
                    r.iter()
                        .find(|e| e.method == method)
                        .and_then(|e| e.get(metric))
                })
                .collect();
            out.push(EvennessMean {
                method,
                metric,
                mean: (!values.is_empty()).then(|| mean(&values)),
                n_defined: values.len(),
            });
        }
    }
    out
}

struct Split {
    train: LabeledDataset,
    test: LabeledDataset,
}

fn sample_evenness(
    model: &crate::models::TrainedModel,
    x: &crate::featurespace::SparseBinaryVector,
    cfg: &ExperimentConfig,
    m: usize,
) -> Result<Vec<SampleEvenness>> {
    cfg.methods
        .iter()
        .map(|&method| {
            let r = explain(model, x, method, cfg.ig_steps)?;
            Ok(SampleEvenness {
                method,
                e1: defined_or_none(evenness_e1(&r.values, m))?,
                e2: defined_or_none(evenness_e2(&r.values, m))?,
            })
        })
        .collect()
}

fn run_cell(
    cfg: &ExperimentConfig,
    ds: &LabeledDataset,
    split: &Split,
    plan: &RepetitionPlan,
    spec: &ClassifierSpec,
    train_seed: u64,
    m: usize,
) -> Result<CellResult> {
    let model = train_classifier(spec, &split.train, train_seed)?;

    let scores = score_dataset(&model, &split.test)?;
    let mut benign = Vec::new();
    let mut malware = Vec::new();
    for (&s, &l) in scores.iter().zip(split.test.labels()) {
        match l {
            Label::Benign => benign.push(s),
            Label::Malware => malware.push(s),
        }
    }
    let (detection_rate, threshold) = detection_rate_from_scores(&benign, &malware, cfg.fpr)?;
    let roc = roc_from_scores(&benign, &malware)?;

    let attacked: Vec<_> = plan
        .attacked_ids
        .iter()
        .map(|&i| ds.samples()[i].clone())
        .collect();
    let attack_cfg = cfg.attack.config(threshold);
    let sweep = attack_sweep(
        &model,
        &attacked,
        &cfg.curve_grid(),
        AttackMethod::Pgd,
        &attack_cfg,
    )?;
    let curve = SecurityCurve::from_sweep(&sweep, threshold, Some(cfg.fpr));

    let grid_cols: Vec<usize> = (0..sweep.epsilons.len())
        .filter(|&e| cfg.eps_grid.contains(&sweep.epsilons[e]))
        .collect();
    let on_grid = AttackSweep {
        epsilons: grid_cols.iter().map(|&e| sweep.epsilons[e]).collect(),
        clean_scores: sweep.clean_scores.clone(),
        scores: grid_cols.iter().map(|&e| sweep.scores[e].clone()).collect(),
    };
    let loss = cfg.loss_for(spec.classifier);
    let robustness = RobustnessScore::from_sweep(&on_grid, loss)?;
    let attack_detection_rate = mean(
        &grid_cols
            .iter()
            .map(|&e| curve.detection_rates[e])
            .collect::<Vec<_>>(),
    );

    let per_sample_evenness: Vec<Vec<SampleEvenness>> = attacked
        .par_iter()
        .map(|x| sample_evenness(&model, x, cfg, m))
        .collect::<Result<_>>()?;
    let samples: Vec<SampleRecord> = plan
        .attacked_ids
        .iter()
        .zip(per_sample_evenness)
        .enumerate()
        .map(|(k, (&id, evenness))| SampleRecord {
            sample_id: id,
            clean_score: sweep.clean_scores[k],
            robustness: robustness.per_sample[k],
            evenness,
        })
        .collect();

    let benign_evenness: Vec<Vec<SampleEvenness>> = if cfg.include_benign_evenness {
        let benign_pos = split.test.indices_of(Label::Benign);
        let chosen = match cfg.n_attacked {
            Some(k) => sample_positions(&benign_pos, k, plan.attacked_seed),
            None => benign_pos,
        };
        chosen
            .par_iter()
            .map(|&p| sample_evenness(&model, &split.test.samples()[p], cfg, m))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let rows: Vec<&[SampleEvenness]> = samples
        .iter()
        .map(|s| s.evenness.as_slice())
        .chain(benign_evenness.iter().map(Vec::as_slice))
        .collect();

    Ok(CellResult {
        repetition: plan.repetition,
        label: spec.label().to_owned(),
        train_seed,
        threshold,
        auc: auc(&roc),
        detection_rate,
        roc,
        evenness: evenness_means(&cfg.methods, &rows),
        correlations: correlation_cells(&cfg.methods, samples.iter()),
        sweep,
        curve,
        robustness,
        attack_detection_rate,
        samples,
    })
}

fn aggregate(
    cfg: &ExperimentConfig,
    spec: &ClassifierSpec,
    cells: Vec<CellResult>,
) -> ClassifierReport {
    let curve_epsilons = cfg.curve_grid();
    let mean_curve = (0..curve_epsilons.len())
        .map(|e| {
            mean(
                &cells
                    .iter()
                    .map(|c| c.curve.detection_rates[e])
                    .collect::<Vec<_>>(),
            )
        })
        .collect();
    let mut evenness = Vec::new();
    for &method in &cfg.methods {
        for metric in EvennessMetric::ALL {
            let per_rep: Vec<f64> = cells
                .iter()
                .filter_map(|c| {
                    c.evenness
                        .iter()
                        .find(|e| e.method == method && e.metric == metric)
                        .and_then(|e| e.mean)
                })
                .collect();
            evenness.push(EvennessMean {
                method,
                metric,
                mean: (!per_rep.is_empty()).then(|| mean(&per_rep)),
                n_defined: cells
                    .iter()
                    .flat_map(|c| &c.evenness)
                    .filter(|e| e.method == method && e.metric == metric)
                    .map(|e| e.n_defined)
                    .sum(),
            });
        }
    }
    let correlations = correlation_cells(&cfg.methods, cells.iter().flat_map(|c| c.samples.iter()));
    let field = |f: fn(&CellResult) -> f64| mean(&cells.iter().map(f).collect::<Vec<_>>());
    ClassifierReport {
        label: spec.label().to_owned(),
        classifier: spec.classifier,
        loss: cfg.loss_for(spec.classifier),
        mean_auc: field(|c| c.auc),
        mean_detection_rate: field(|c| c.detection_rate),
        mean_robustness: field(|c| c.robustness.aggregate),
        mean_attack_detection_rate: field(|c| c.attack_detection_rate),
        curve_epsilons,
        mean_curve,
        evenness,
        correlations,
        cells,
    }
}

/// Runs every classifier on every repetition. A failing cell is recorded in
/// [`ExperimentReport::failures`] and does not stop the others.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let ds = cfg.dataset.load()?;
    let m = cfg.m.min(ds.dim());
    if m < 2 {
        return Err(Error::InvalidConfig(
            "feature dimension must be >= 2".into(),
        ));
    }

    let mut plans = Vec::new();
    let mut splits = Vec::new();
    for rep in 0..cfg.repetitions {
        let split_seed = derive_seed(cfg.seed, STREAM_SPLIT, rep as u64);
        let attacked_seed = derive_seed(cfg.seed, STREAM_ATTACKED, rep as u64);
        let (train_idx, test_idx) = split_indices(&ds, cfg.train_fraction, split_seed)?;
        let test_malware: Vec<usize> = test_idx
            .iter()
            .copied()
            .filter(|&i| ds.labels()[i] == Label::Malware)
            .collect();
        let attacked_ids = match cfg.n_attacked {
            Some(k) => sample_positions(&test_malware, k, attacked_seed),
            None => test_malware,
        };
        plans.push(RepetitionPlan {
            repetition: rep,
            split_seed,
            attacked_seed,
            n_train: train_idx.len(),
            n_test: test_idx.len(),
            attacked_ids,
        });
        splits.push(Split {
            train: ds.subset(&train_idx),
            test: ds.subset(&test_idx),
        });
    }

    let jobs: Vec<(usize, usize)> = (0..cfg.repetitions)
        .flat_map(|r| (0..cfg.classifiers.len()).map(move |c| (r, c)))
        .collect();
    let outcomes: Vec<Result<CellResult>> = jobs
        .par_iter()
        .map(|&(r, c)| {
            let train_seed = derive_seed(
                cfg.seed,
                STREAM_TRAIN,
                (r * cfg.classifiers.len() + c) as u64,
            );
            run_cell(
                cfg,
                &ds,
                &splits[r],
                &plans[r],
                &cfg.classifiers[c],
                train_seed,
                m,
            )
        })
        .collect();

    let mut per_classifier: Vec<Vec<CellResult>> = vec![Vec::new(); cfg.classifiers.len()];
    let mut failures = Vec::new();
    for (&(r, c), outcome) in jobs.iter().zip(outcomes) {
        match outcome {
            Ok(cell) => per_classifier[c].push(cell),
            Err(e) => failures.push(CellFailure {
                repetition: r,
                label: cfg.classifiers[c].label().to_owned(),
                kind: e.kind().to_owned(),
                message: e.to_string(),
            }),
        }
    }
    let classifiers = cfg
        .classifiers
        .iter()
        .zip(per_classifier)
        .filter(|(_, cells)| !cells.is_empty())
        .map(|(spec, cells)| aggregate(cfg, spec, cells))
        .collect();

    Ok(ExperimentReport {
        config: cfg.clone(),
        dim: ds.dim(),
        n_samples: ds.len(),
        m_effective: m,
        plans,
        classifiers,
        failures,
    })
}

/// Vertical axis of a scatter file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScatterAxis {
    /// One row per sample: evenness against per-sample robustness.
    Robustness,
    /// One row per classifier: mean evenness against the mean detection rate
    /// under attack.
    DetectionRate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterRequest {
    pub method: AttributionMethod,
    pub metric: EvennessMetric,
    pub axis: ScatterAxis,
    /// Restrict to one classifier label.
    pub classifier: Option<String>,
    /// Seeded random subset of this many rows per classifier (per-sample mode).
    pub subsample: Option<usize>,
    pub seed: u64,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "UNDEFINED".to_owned(), |x| x.to_string())
}

fn csv_string(header: &[&str], rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Plot-ready CSV for evenness against robustness or detection rate.
pub fn emit_scatter_data(report: &ExperimentReport, req: &ScatterRequest) -> Result<String> {
    if !report.config.methods.contains(&req.method) {
        return Err(Error::InvalidConfig(format!(
            "attribution method {} was not computed",
            req.method
        )));
    }
    let selected: Vec<&ClassifierReport> = match &req.classifier {
        Some(label) => vec![report
            .classifier(label)
            .ok_or_else(|| Error::InvalidConfig(format!("no results for classifier {label:?}")))?],
        None => report.classifiers.iter().collect(),
    };
    match req.axis {
        ScatterAxis::Robustness => {
            let mut rows = Vec::new();
            for (k, c) in selected.iter().enumerate() {
                let points: Vec<(usize, &SampleRecord, f64)> = c
                    .samples()
                    .filter_map(|(rep, s)| {
                        s.evenness_of(req.method, req.metric).map(|e| (rep, s, e))
                    })
                    .collect();
                let keep: Vec<usize> = match req.subsample {
                    Some(n) => sample_positions(
                        &(0..points.len()).collect::<Vec<_>>(),
                        n,
                        derive_seed(req.seed, STREAM_SCATTER, k as u64),
                    ),
                    None => (0..points.len()).collect(),
                };
                for i in keep {
                    let (rep, s, e) = points[i];
                    rows.push(vec![
                        c.label.clone(),
                        rep.to_string(),
                        s.sample_id.to_string(),
                        e.to_string(),
                        s.robustness.to_string(),
                    ]);
                }
            }
            csv_string(
                &[
                    "classifier",
                    "repetition",
                    "sample_id",
                    "evenness",
                    "robustness",
                ],
                rows,
            )
        }
        ScatterAxis::DetectionRate => {
            let rows = selected
                .iter()
                .map(|c| {
                    vec![
                        c.label.clone(),
                        fmt_opt(c.mean_evenness(req.method, req.metric)),
                        c.mean_attack_detection_rate.to_string(),
                    ]
                })
                .collect();
            csv_string(&["classifier", "evenness", "detection_rate"], rows)
        }
    }
}

fn write_csv(dir: &Path, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, csv_string(header, rows)?).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a ExperimentConfig,
    dataset: BTreeMap<&'static str, usize>,
    m_effective: usize,
    repetitions: Vec<ManifestRepetition<'a>>,
    conventions: Vec<&'static str>,
    failures: &'a [CellFailure],
    files: Vec<String>,
}

#[derive(Serialize)]
struct ManifestRepetition<'a> {
    plan: &'a RepetitionPlan,
    cells: Vec<ManifestCell<'a>>,
}

#[derive(Serialize)]
struct ManifestCell<'a> {
    label: &'a str,
    train_seed: u64,
    loss: RobustnessLoss,
    threshold: f64,
}

pub const CONVENTIONS: &[&str] = &[
    "detection threshold: smallest score threshold whose false-positive rate on the test benign samples is at most fpr",
    "attack: feature-addition PGD against the detection threshold; budget 0 is the clean sample",
    "robustness: mean of exp(-loss) over all attacked samples, successful or not, averaged over eps_grid",
    "per-sample robustness: mean over eps_grid of exp(-loss) for that sample",
    "explanations: computed on the clean attacked malware samples; integrated gradients use the all-zero baseline",
    "evenness: top-m magnitudes, m clamped to the feature dimension; undefined for all-zero attributions and excluded from means and correlations",
    "correlations: pooled over repetitions per classifier; per-repetition values in correlations.csv",
    "repetition aggregates: arithmetic means",
];

/// Writes every CSV and `manifest.json` into `dir` and returns the paths.
pub fn write_artifacts(report: &ExperimentReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let cfg = &report.config;
    let mut files = Vec::new();

    files.push(write_csv(
        dir,
        "summary.csv",
        &[
            "classifier",
            "repetitions",
            "auc",
            "detection_rate",
            "mean_attack_detection_rate",
            "robustness",
            "loss",
        ],
        report
            .classifiers
            .iter()
            .map(|c| {
                vec![
                    c.label.clone(),
                    c.cells.len().to_string(),
                    c.mean_auc.to_string(),
                    c.mean_detection_rate.to_string(),
                    c.mean_attack_detection_rate.to_string(),
                    c.mean_robustness.to_string(),
                    c.loss.to_string(),
                ]
            })
            .collect(),
    )?);

    let mut roc = Vec::new();
    let mut curves = Vec::new();
    let mut robustness = Vec::new();
    let mut adversarial = Vec::new();
    let mut samples = Vec::new();
    let mut correlations = Vec::new();
    let mut mean_curves = Vec::new();
    let corr_row = |scope: String, label: &str, cell: &CorrelationCell, r: &CorrelationReport| {
        vec![
            label.to_owned(),
            scope,
            cell.method.to_string(),
            cell.metric.to_string(),
            r.method.to_string(),
            fmt_opt(r.coefficient),
            fmt_opt(r.p_value),
            r.n.to_string(),
            r.degenerate.to_string(),
        ]
    };
    for c in &report.classifiers {
        for (e, rate) in c.curve_epsilons.iter().zip(&c.mean_curve) {
            mean_curves.push(vec![c.label.clone(), e.to_string(), rate.to_string()]);
        }
        for cell in &c.correlations {
            for r in &cell.reports {
                correlations.push(corr_row("pooled".into(), &c.label, cell, r));
            }
        }
        for cell in &c.cells {
            let rep = cell.repetition.to_string();
            for p in &cell.roc {
                roc.push(vec![
                    c.label.clone(),
                    rep.clone(),
                    p.fpr.to_string(),
                    p.tpr.to_string(),
                ]);
            }
            for (e, rate) in cell.curve.epsilons.iter().zip(&cell.curve.detection_rates) {
                curves.push(vec![
                    c.label.clone(),
                    rep.clone(),
                    e.to_string(),
                    rate.to_string(),
                ]);
            }
            for (e, r) in cell
                .robustness
                .epsilons
                .iter()
                .zip(&cell.robustness.per_eps)
            {
                robustness.push(vec![
                    c.label.clone(),
                    rep.clone(),
                    e.to_string(),
                    r.to_string(),
                ]);
            }
            for (k, s) in cell.samples.iter().enumerate() {
                for (e, row) in cell.sweep.epsilons.iter().zip(&cell.sweep.scores) {
                    adversarial.push(vec![
                        c.label.clone(),
                        rep.clone(),
                        s.sample_id.to_string(),
                        e.to_string(),
                        row[k].to_string(),
                    ]);
                }
                let mut row = vec![
                    c.label.clone(),
                    rep.clone(),
                    s.sample_id.to_string(),
                    s.clean_score.to_string(),
                    s.robustness.to_string(),
                ];
                for &method in &cfg.methods {
                    for metric in EvennessMetric::ALL {
                        row.push(fmt_opt(s.evenness_of(method, metric)));
                    }
                }
                samples.push(row);
            }
            for corr in &cell.correlations {
                for r in &corr.reports {
                    correlations.push(corr_row(format!("repetition {rep}"), &c.label, corr, r));
                }
            }
        }
    }

    files.push(write_csv(
        dir,
        "roc.csv",
        &["classifier", "repetition", "fpr", "tpr"],
        roc,
    )?);
    files.push(write_csv(
        dir,
        "security_curves.csv",
        &["classifier", "repetition", "eps", "detection_rate"],
        curves,
    )?);
    files.push(write_csv(
        dir,
        "security_curves_mean.csv",
        &["classifier", "eps", "detection_rate"],
        mean_curves,
    )?);
    files.push(write_csv(
        dir,
        "robustness.csv",
        &["classifier", "repetition", "eps", "R"],
        robustness,
    )?);
    files.push(write_csv(
        dir,
        "adversarial_scores.csv",
        &["classifier", "repetition", "sample_id", "eps", "score"],
        adversarial,
    )?);
    let mut sample_header: Vec<String> = [
        "classifier",
        "repetition",
        "sample_id",
        "clean_score",
        "R_sample",
    ]
    .map(String::from)
    .to_vec();
    for &method in &cfg.methods {
        for metric in EvennessMetric::ALL {
            sample_header.push(format!("{metric}_{method}"));
        }
    }
    let header: Vec<&str> = sample_header.iter().map(String::as_str).collect();
    files.push(write_csv(dir, "samples.csv", &header, samples)?);
    files.push(write_csv(
        dir,
        "correlations.csv",
        &[
            "classifier",
            "scope",
            "attribution",
            "metric",
            "correlation",
            "coefficient",
            "p_value",
            "n",
            "degenerate",
        ],
        correlations,
    )?);

    let mut evenness_rows = Vec::new();
    for c in &report.classifiers {
        for e in &c.evenness {
            evenness_rows.push(vec![
                c.label.clone(),
                e.method.to_string(),
                e.metric.to_string(),
                fmt_opt(e.mean),
                c.mean_attack_detection_rate.to_string(),
            ]);
        }
    }
    files.push(write_csv(
        dir,
        "evenness_vs_detection.csv",
        &[
            "classifier",
            "attribution",
            "metric",
            "mean_evenness",
            "mean_attack_detection_rate",
        ],
        evenness_rows,
    )?);

    for &method in &cfg.methods {
        for metric in EvennessMetric::ALL {
            let req = ScatterRequest {
                method,
                metric,
                axis: ScatterAxis::Robustness,
                classifier: None,
                subsample: cfg.scatter_samples,
                seed: cfg.seed,
            };
            let path = dir.join(format!("scatter_robustness_{method}_{metric}.csv"));
            fs::write(&path, emit_scatter_data(report, &req)?).map_err(|e| Error::io(&path, e))?;
            files.push(path);
        }
    }

    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        dataset: BTreeMap::from([("dim", report.dim), ("n_samples", report.n_samples)]),
        m_effective: report.m_effective,
        repetitions: report
            .plans
            .iter()
            .map(|plan| ManifestRepetition {
                plan,
                cells: report
                    .classifiers
                    .iter()
                    .flat_map(|c| c.cells.iter().map(move |cell| (c, cell)))
                    .filter(|(_, cell)| cell.repetition == plan.repetition)
                    .map(|(c, cell)| ManifestCell {
                        label: &cell.label,
                        train_seed: cell.train_seed,
                        loss: c.loss,
                        threshold: cell.threshold,
                    })
                    .collect(),
            })
            .collect(),
        conventions: CONVENTIONS.to_vec(),
        failures: &report.failures,
        files: files
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect(),
    };
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    files.push(path);
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            classifiers: vec![
                ClassifierSpec::preset(Classifier::Svm),
                ClassifierSpec::preset(Classifier::SecSvm),
            ],
            eps_grid: vec![1, 2, 4, 8],
            n_attacked: Some(30),
            ig_steps: 10,
            scatter_samples: Some(10),
            ..ExperimentConfig::new(DatasetSource::Synthetic(SyntheticConfig {
                d: 60,
                n_benign: 150,
                n_malware: 100,
                n_strong: 6,
                base_density: 0.05,
                seed: 3,
                ..Default::default()
            }))
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = small_config();
        cfg.classifiers.clear();
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
        let mut cfg = small_config();
        cfg.repetitions = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = small_config();
        cfg.classifiers
            .push(ClassifierSpec::preset(Classifier::Svm));
        assert!(cfg.validate().is_err());
        assert!(small_config().validate().is_ok());
    }

    #[test]
    fn toml_round_trip_with_defaults() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            seed = 7
            [dataset]
            kind = "synthetic"
            d = 50
            n_benign = 40
            n_malware = 30

            [[classifiers]]
            classifier = "svm"
            c = 0.5
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.eps_grid, (1..=50).collect::<Vec<_>>());
        assert_eq!(cfg.classifiers[0].c, Some(0.5));
        match &cfg.dataset {
            DatasetSource::Synthetic(s) => {
                assert_eq!(s.d, 50);
                assert_eq!(s.n_strong, SyntheticConfig::default().n_strong);
            }
            other => panic!("unexpected source {other:?}"),
        }
        assert!(ExperimentConfig::from_toml("seed = 1\nbogus = 2").is_err());
    }

    #[test]
    fn derived_seeds_are_distinct() {
        let mut seen: Vec<u64> = (0..3)
            .flat_map(|s| (0..20).map(move |i| derive_seed(0, s, i)))
            .collect();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 60);
    }

    #[test]
    fn small_experiment_structure() {
        let cfg = small_config();
        let report = run_experiment(&cfg).unwrap();
        assert!(report.failures.is_empty());
        assert_eq!(report.classifiers.len(), 2);
        for c in &report.classifiers {
            assert_eq!(c.cells.len(), 1);
            assert_eq!(c.mean_curve.len(), cfg.eps_grid.len() + 1);
            assert_eq!(c.cells[0].samples.len(), 30);
            let grad = c
                .correlation(AttributionMethod::Gradient, EvennessMetric::E1)
                .unwrap();
            assert!(grad.is_degenerate());
            assert!(c.cells[0]
                .robustness
                .per_eps
                .iter()
                .all(|&r| r > 0.0 && r <= 1.0));
        }
    }

    #[test]
    fn failing_cell_is_recorded() {
        let mut cfg = small_config();
        cfg.classifiers[0].c = Some(-1.0);
        let report = run_experiment(&cfg).unwrap();
        assert_eq!(report.failures.len(), 1);
        assert_eq!(report.failures[0].label, "svm");
        assert_eq!(report.classifiers.len(), 1);
    }

    #[test]
    fn scatter_modes() {
        let report = run_experiment(&small_config()).unwrap();
        let req = ScatterRequest {
            method: AttributionMethod::GradientInput,
            metric: EvennessMetric::E2,
            axis: ScatterAxis::Robustness,
            classifier: Some("svm".into()),
            subsample: Some(10),
            seed: 0,
        };
        let csv = emit_scatter_data(&report, &req).unwrap();
        assert_eq!(csv.lines().count(), 11);
        let per_classifier = emit_scatter_data(
            &report,
            &ScatterRequest {
                axis: ScatterAxis::DetectionRate,
                classifier: None,
                ..req.clone()
            },
        )
        .unwrap();
        assert_eq!(per_classifier.lines().count(), 3);
        let missing = ScatterRequest {
            classifier: Some("ridge".into()),
            ..req
        };
        assert!(emit_scatter_data(&report, &missing).is_err());
    }
}
