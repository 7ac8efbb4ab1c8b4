//! Command-line front end: dataset generation, training, attacks,
//! explanations, evenness, robustness, correlations and full experiments.
//!
//! Every subcommand that writes a file also writes `<out>.manifest.json` with
//! the arguments and conventions used. Failures print a JSON error object on
//! stderr and exit with status 1.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use robexplain::attack::{epsilon_min, run_attack, AttackConfig, AttackMethod};
use robexplain::evenness::{evenness_of_values, EvennessMetric};
use robexplain::explain::{explain, top_features, AttributionMethod, DEFAULT_IG_STEPS};
use robexplain::featurespace::{
    generate_synthetic, load_dataset, save_dataset, Label, LabeledDataset, SyntheticConfig,
};
use robexplain::models::{
    cross_validate, load_model, save_model, score_dataset, select_by_cv, threshold_at_fpr,
    train_classifier, Classifier, ClassifierSpec, DecisionFunction, TrainedModel,
};
use robexplain::pipeline::{run_experiment, write_artifacts, ExperimentConfig};
use robexplain::robustness::{aggregate_robustness, RobustnessLoss};
use robexplain::stats::{correlate, permutation_p_value, CorrelationMethod};
use robexplain::{Error, Result};

#[derive(Parser)]
#[command(
    name = "robexplain",
    version,
    about = "Evasion attacks, attributions and evenness analysis for sparse binary classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset in the sparse text format.
    Generate(GenerateArgs),
    /// Train one classifier and save it as JSON.
    Train(TrainArgs),
    /// Attack the malware samples of a dataset.
    Attack(AttackArgs),
    /// Compute per-sample attributions.
    Explain(ExplainArgs),
    /// Evenness of attributions written by `explain`.
    Evenness(EvennessArgs),
    /// Adversarial robustness over a budget grid.
    Robustness(RobustnessArgs),
    /// Correlate two CSV columns.
    Correlate(CorrelateArgs),
    /// Run a full experiment from a TOML config.
    Experiment(ExperimentArgs),
}

#[derive(Args, Serialize)]
struct GenerateArgs {
    /// TOML file with synthetic generator settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    n_benign: Option<usize>,
    #[arg(long)]
    n_malware: Option<usize>,
    #[arg(long)]
    n_strong: Option<usize>,
    #[arg(long)]
    strong_rate_gap: Option<f64>,
    #[arg(long)]
    weak_rate_gap: Option<f64>,
    #[arg(long)]
    base_density: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Feature dimension, if larger than the highest index in the file.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, default_value = "svm")]
    classifier: String,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Sec-SVM weight bound `w`, giving `-w <= w_k <= w`.
    #[arg(long)]
    bound: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    eta0: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Select `C` (or `α` for ridge) from `--grid` by stratified k-fold CV.
    #[arg(long)]
    cv_folds: Option<usize>,
    /// Candidate values for CV, most regularized first.
    #[arg(long, value_delimiter = ',')]
    grid: Vec<f64>,
    /// CV keeps the first candidate within this detection rate of the best.
    #[arg(long, default_value_t = 0.01)]
    cv_tolerance: f64,
    #[arg(long, default_value_t = 0.01)]
    fpr: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct AttackArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, conflicts_with = "epsilon_grid")]
    epsilon: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    epsilon_grid: Vec<usize>,
    /// Threshold at this false-positive rate on the benign samples of `--data`.
    #[arg(long, conflicts_with = "threshold")]
    fpr: Option<f64>,
    /// Fixed detection threshold; 0 when neither this nor `--fpr` is given.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, default_value = "pgd")]
    method: String,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct ExplainArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "integrated-gradients")]
    method: String,
    /// Integrated gradients path steps.
    #[arg(long, default_value_t = DEFAULT_IG_STEPS)]
    p: usize,
    /// Keep only the K largest-magnitude attributions per sample.
    #[arg(long)]
    top: Option<usize>,
    /// Explain benign samples too.
    #[arg(long)]
    all: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct EvennessArgs {
    /// CSV written by `explain`.
    #[arg(long)]
    relevances: PathBuf,
    /// `e1` or `e2`; both when omitted.
    #[arg(long)]
    metric: Option<String>,
    #[arg(long, default_value_t = 1000)]
    m: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct RobustnessArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,2,5,10,20,50")]
    eps_grid: Vec<usize>,
    /// `hinge` or `logistic`; defaults to the model's own loss family.
    #[arg(long)]
    loss: Option<String>,
    #[arg(long, conflicts_with = "threshold")]
    fpr: Option<f64>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, default_value = "pgd")]
    method: String,
    #[arg(long)]
    out: PathBuf,
    /// Per-sample robustness CSV; defaults to `<out stem>_samples.csv`.
    #[arg(long)]
    per_sample_out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct CorrelateArgs {
    /// `<csv path>:<column>`.
    #[arg(long)]
    x: String,
    /// `<csv path>:<column>`, rows aligned with `--x`.
    #[arg(long)]
    y: String,
    /// Pair rows by this key column instead of by position.
    #[arg(long)]
    on: Option<String>,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "pearson,spearman,kendall"
    )]
    methods: Vec<String>,
    /// Also report a permutation p-value from this many shuffles.
    #[arg(long)]
    permutation: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
            eprintln!("{report}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate(a) => generate(&a),
        Command::Train(a) => train(&a),
        Command::Attack(a) => attack(&a),
        Command::Explain(a) => explain_cmd(&a),
        Command::Evenness(a) => evenness(&a),
        Command::Robustness(a) => robustness(&a),
        Command::Correlate(a) => correlate_cmd(&a),
        Command::Experiment(a) => experiment(&a),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<T> {
    s.parse()
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn invalid(message: impl Into<String>) -> Error {
    Error::InvalidConfig(message.into())
}

fn sidecar(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// Writes `<out>.manifest.json` next to an output file.
fn write_manifest(
    out: &Path,
    command: &str,
    args: &impl Serialize,
    extra: serde_json::Value,
) -> Result<()> {
    let manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "args": args,
        "details": extra,
    });
    let path = sidecar(out);
    fs::write(&path, serde_json::to_string_pretty(&manifest)?)
        .map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn write_rows(out: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(out)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()
        .map_err(|e| invalid(format!("{}: {e}", out.display())))
}

fn load_pair(model: &Path, data: &Path) -> Result<(TrainedModel, LabeledDataset)> {
    let model = load_model(model)?;
    let ds = load_dataset(data, Some(model.dim()))?;
    if ds.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: ds.dim(),
        });
    }
    Ok((model, ds))
}

/// Threshold from `--threshold`, else from `--fpr` on the benign samples.
fn resolve_threshold(
    model: &TrainedModel,
    ds: &LabeledDataset,
    fpr: Option<f64>,
    threshold: Option<f64>,
) -> Result<f64> {
    match (threshold, fpr) {
        (Some(t), _) => Ok(t),
        (None, Some(fpr)) => {
            let benign = ds.subset(&ds.indices_of(Label::Benign));
            if benign.is_empty() {
                return Err(Error::NoBenign);
            }
            threshold_at_fpr(&score_dataset(model, &benign)?, fpr)
        }
        (None, None) => Ok(0.0),
    }
}

fn generate(a: &GenerateArgs) -> Result<()> {
    let mut cfg: SyntheticConfig = match &a.config {
        Some(path) => toml::from_str(&read_text(path)?).map_err(|e| invalid(e.to_string()))?,
        None => SyntheticConfig::default(),
    };
    macro_rules! apply {
        ($($field:ident),*) => { $( if let Some(v) = a.$field { cfg.$field = v; } )* };
    }
    apply!(
        d,
        n_benign,
        n_malware,
        n_strong,
        strong_rate_gap,
        weak_rate_gap,
        base_density,
        seed
    );
    let ds = generate_synthetic(&cfg)?;
    save_dataset(&a.out, &ds)?;
    write_manifest(
        &a.out,
        "generate",
        a,
        json!({ "synthetic": cfg, "n_samples": ds.len() }),
    )
}

fn train(a: &TrainArgs) -> Result<()> {
    let ds = load_dataset(&a.data, a.dim)?;
    let classifier: Classifier = parse(&a.classifier)?;
    let mut spec = ClassifierSpec::preset(classifier);
    spec.c = a.c;
    spec.alpha = a.alpha;
    spec.gamma = a.gamma;
    spec.bound = a.bound;
    spec.epochs = a.epochs;
    spec.eta0 = a.eta0;

    let mut cv_report = serde_json::Value::Null;
    if let Some(folds) = a.cv_folds {
        if a.grid.is_empty() {
            return Err(invalid("--cv-folds needs a non-empty --grid"));
        }
        let candidates: Vec<ClassifierSpec> = a
            .grid
            .iter()
            .map(|&v| {
                let mut s = spec.clone();
                if classifier == Classifier::Ridge {
                    s.alpha = Some(v);
                } else {
                    s.c = Some(v);
                }
                s
            })
            .collect();
        let results = cross_validate(&ds, &candidates, folds, a.fpr, a.seed)?;
        let chosen =
            select_by_cv(&results, a.cv_tolerance).ok_or_else(|| invalid("empty CV grid"))?;
        spec = chosen.spec.clone();
        cv_report = json!(results
            .iter()
            .map(|r| json!({ "c": r.spec.c, "alpha": r.spec.alpha, "fold_rates": r.fold_rates, "mean_rate": r.mean_rate }))
            .collect::<Vec<_>>());
    }

    let model = train_classifier(&spec, &ds, a.seed)?;
    save_model(&a.out, &model)?;
    write_manifest(
        &a.out,
        "train",
        a,
        json!({ "spec": spec, "cv": cv_report, "n_train": ds.len() }),
    )
}

fn attack(a: &AttackArgs) -> Result<()> {
    let (model, ds) = load_pair(&a.model, &a.data)?;
    let method: AttackMethod = parse(&a.method)?;
    let grid = match (a.epsilon, a.epsilon_grid.is_empty()) {
        (Some(e), _) => vec![e],
        (None, false) => a.epsilon_grid.clone(),
        (None, true) => return Err(invalid("give --epsilon or --epsilon-grid")),
    };
    let threshold = resolve_threshold(&model, &ds, a.fpr, a.threshold)?;
    let defaults = AttackConfig::default();
    let cfg = AttackConfig {
        threshold,
        max_iters: a.max_iters.unwrap_or(defaults.max_iters),
        ..defaults
    };
    let eps_max = grid.iter().copied().max().unwrap_or(0);

    let mut rows = Vec::new();
    for i in ds.indices_of(Label::Malware) {
        let x = &ds.samples()[i];
        let eps_min = epsilon_min(&model, x, eps_max, method, &cfg)?;
        for &eps in &grid {
            let r = run_attack(&model, x, method, &cfg.with_epsilon(eps))?;
            rows.push(vec![
                i.to_string(),
                eps.to_string(),
                r.score_before.to_string(),
                r.score_after.to_string(),
                r.evaded.to_string(),
                eps_min.to_string(),
            ]);
        }
    }
    write_rows(
        &a.out,
        &[
            "sample_id",
            "eps",
            "score_before",
            "score_after",
            "evaded",
            "eps_min",
        ],
        &rows,
    )?;
    write_manifest(
        &a.out,
        "attack",
        a,
        json!({ "threshold": threshold, "attack": cfg, "eps_min_search_max": eps_max }),
    )
}

fn explain_cmd(a: &ExplainArgs) -> Result<()> {
    let (model, ds) = load_pair(&a.model, &a.data)?;
    let method: AttributionMethod = parse(&a.method)?;
    let ids: Vec<usize> = if a.all {
        (0..ds.len()).collect()
    } else {
        ds.indices_of(Label::Malware)
    };
    let dim = model.dim().to_string();
    let mut rows = Vec::new();
    for i in ids {
        let r = explain(&model, &ds.samples()[i], method, a.p)?;
        let ranked = top_features(&r, a.top.unwrap_or(r.dim()));
        if ranked.is_empty() {
            // keeps all-zero attributions visible to `evenness`
            rows.push(vec![
                i.to_string(),
                method.to_string(),
                dim.clone(),
                "0".into(),
                String::new(),
                "0".into(),
                "0".into(),
            ]);
        }
        for (rank, f) in ranked.iter().enumerate() {
            rows.push(vec![
                i.to_string(),
                method.to_string(),
                dim.clone(),
                (rank + 1).to_string(),
                f.index.to_string(),
                f.relevance.to_string(),
                f.percent.to_string(),
            ]);
        }
    }
    write_rows(
        &a.out,
        &[
            "sample_id",
            "method",
            "dim",
            "rank",
            "feature",
            "relevance",
            "percent",
        ],
        &rows,
    )?;
    write_manifest(
        &a.out,
        "explain",
        a,
        json!({ "baseline": "zero", "feature_indices": "0-based" }),
    )
}

/// A dense attribution vector keyed by `(method, sample_id)`.
type KeyedRelevance = ((String, usize), Vec<f64>);

/// Rebuilds dense attribution vectors from `explain` output in file order.
fn read_relevances(path: &Path) -> Result<Vec<KeyedRelevance>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out: Vec<KeyedRelevance> = Vec::new();
    let mut position: BTreeMap<(String, usize), usize> = BTreeMap::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = |k: usize| rec.get(k).unwrap_or("");
        let bad = |what: &str| Error::Parse {
            line: line + 2,
            message: format!("bad {what}"),
        };
        let sample: usize = field(0).parse().map_err(|_| bad("sample_id"))?;
        let method = field(1).to_owned();
        let dim: usize = field(2).parse().map_err(|_| bad("dim"))?;
        let key = (method, sample);
        let slot = *position.entry(key.clone()).or_insert_with(|| {
            out.push((key, vec![0.0; dim]));
            out.len() - 1
        });
        if !field(4).is_empty() {
            let feature: usize = field(4).parse().map_err(|_| bad("feature"))?;
            let value: f64 = field(5).parse().map_err(|_| bad("relevance"))?;
            let v = &mut out[slot].1;
            if feature >= v.len() {
                return Err(bad("feature index"));
            }
            v[feature] = value;
        }
    }
    Ok(out)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "UNDEFINED".to_owned(), |x| x.to_string())
}

fn evenness(a: &EvennessArgs) -> Result<()> {
    let metrics: Vec<EvennessMetric> = match &a.metric {
        Some(m) => vec![parse(m)?],
        None => EvennessMetric::ALL.to_vec(),
    };
    let vectors = read_relevances(&a.relevances)?;
    if vectors.is_empty() {
        return Err(Error::Empty("no attributions".into()));
    }
    let dim = vectors[0].1.len();
    let m = a.m.min(dim);

    let mut methods: Vec<&str> = vectors.iter().map(|((meth, _), _)| meth.as_str()).collect();
    methods.dedup();
    let mut rows = Vec::new();
    let mut footer = Vec::new();
    for meth in methods {
        let group: Vec<&((String, usize), Vec<f64>)> =
            vectors.iter().filter(|((k, _), _)| k == meth).collect();
        let report =
            evenness_of_values(group.iter().map(|(_, v)| v.as_slice()), m, parse(meth).ok())?;
        for (j, ((_, id), _)) in group.iter().enumerate() {
            let mut row = vec![id.to_string(), meth.to_owned()];
            for metric in &metrics {
                row.push(fmt_opt(match metric {
                    EvennessMetric::E1 => report.per_sample_e1[j],
                    EvennessMetric::E2 => report.per_sample_e2[j],
                }));
            }
            row.push(report.per_sample_e2[j].is_some().to_string());
            rows.push(row);
        }
        let mut row = vec!["mean".to_owned(), meth.to_owned()];
        for metric in &metrics {
            row.push(fmt_opt(match metric {
                EvennessMetric::E1 => report.mean_e1,
                EvennessMetric::E2 => report.mean_e2,
            }));
        }
        row.push((group.len() - report.n_undefined).to_string());
        footer.push(row);
    }
    rows.extend(footer);

    let mut header = vec!["sample_id".to_owned(), "method".to_owned()];
    header.extend(metrics.iter().map(|m| m.to_string()));
    header.push("defined".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_rows(&a.out, &header, &rows)?;
    write_manifest(
        &a.out,
        "evenness",
        a,
        json!({ "m_effective": m, "footer": "rows with sample_id 'mean' hold averages over defined samples; their last column counts defined samples" }),
    )
}

fn robustness(a: &RobustnessArgs) -> Result<()> {
    let (model, ds) = load_pair(&a.model, &a.data)?;
    let method: AttackMethod = parse(&a.method)?;
    let loss = match &a.loss {
        Some(l) => parse(l)?,
        None => match model
            .metadata
            .classifier
            .as_deref()
            .map(parse::<Classifier>)
        {
            Some(Ok(c)) => RobustnessLoss::default_for(c),
            _ => RobustnessLoss::Hinge,
        },
    };
    let threshold = resolve_threshold(&model, &ds, a.fpr, a.threshold)?;
    let ids = ds.indices_of(Label::Malware);
    let malware: Vec<_> = ids.iter().map(|&i| ds.samples()[i].clone()).collect();
    let cfg = AttackConfig {
        threshold,
        ..AttackConfig::default()
    };
    let score = aggregate_robustness(&model, &malware, &a.eps_grid, method, &cfg, loss)?;

    let mut rows: Vec<Vec<String>> = score
        .epsilons
        .iter()
        .zip(&score.per_eps)
        .map(|(e, r)| vec![e.to_string(), r.to_string()])
        .collect();
    rows.push(vec!["aggregate".into(), score.aggregate.to_string()]);
    write_rows(&a.out, &["eps", "R"], &rows)?;

    let per_sample_path = a.per_sample_out.clone().unwrap_or_else(|| {
        let stem = a
            .out
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        a.out.with_file_name(format!("{stem}_samples.csv"))
    });
    let rows: Vec<Vec<String>> = ids
        .iter()
        .zip(&score.per_sample)
        .map(|(i, r)| vec![i.to_string(), r.to_string()])
        .collect();
    write_rows(&per_sample_path, &["sample_id", "R_sample"], &rows)?;
    write_manifest(
        &a.out,
        "robustness",
        a,
        json!({ "loss": loss, "threshold": threshold, "per_sample_file": per_sample_path }),
    )
}

/// Reads `<path>:<column>` as `(key, value)` rows, keeping `None` for
/// non-numeric cells. The key is the `on` column, or the row position.
fn read_column(spec: &str, on: Option<&str>) -> Result<Vec<(String, Option<f64>)>> {
    let (path, column) = spec
        .rsplit_once(':')
        .ok_or_else(|| invalid(format!("expected <csv path>:<column>, got {spec:?}")))?;
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| invalid(format!("{path}: no column {name:?}")))
    };
    let idx = find(column)?;
    let key = on.map(find).transpose()?;
    r.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec?;
            let k = match key {
                Some(k) => rec.get(k).unwrap_or("").to_owned(),
                None => i.to_string(),
            };
            let v = rec
                .get(idx)
                .and_then(|v| v.parse::<f64>().ok())
                .filter(|v| v.is_finite());
            Ok((k, v))
        })
        .collect()
}

fn correlate_cmd(a: &CorrelateArgs) -> Result<()> {
    let xs = read_column(&a.x, a.on.as_deref())?;
    let ys = read_column(&a.y, a.on.as_deref())?;
    if a.on.is_none() && xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    let mut y_by_key: BTreeMap<String, Option<f64>> = BTreeMap::new();
    for (k, v) in ys {
        y_by_key.entry(k).or_insert(v);
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = xs
        .into_iter()
        .filter_map(|(k, x)| Some((x?, (*y_by_key.get(&k)?)?)))
        .unzip();
    let methods = a
        .methods
        .iter()
        .map(|m| parse::<CorrelationMethod>(m))
        .collect::<Result<Vec<_>>>()?;

    let mut header = vec!["method", "coefficient", "p_value", "n", "degenerate"];
    if a.permutation.is_some() {
        header.push("permutation_p_value");
    }
    let mut rows = Vec::new();
    for method in methods {
        let r = correlate(&xs, &ys, method)?;
        let mut row = vec![
            method.to_string(),
            fmt_opt(r.coefficient),
            fmt_opt(r.p_value),
            r.n.to_string(),
            r.degenerate.to_string(),
        ];
        if let Some(n) = a.permutation {
            row.push(fmt_opt(permutation_p_value(&xs, &ys, method, n, a.seed)?));
        }
        rows.push(row);
    }
    write_rows(&a.out, &header, &rows)?;
    write_manifest(
        &a.out,
        "correlate",
        a,
        json!({ "n_pairs": xs.len(), "dropped": "rows without a partner or where either value is missing or not a finite number" }),
    )
}

fn experiment(a: &ExperimentArgs) -> Result<()> {
    let cfg = ExperimentConfig::load(&a.config)?;
    let report = run_experiment(&cfg)?;
    write_artifacts(&report, &a.out)?;
    Ok(())
}
