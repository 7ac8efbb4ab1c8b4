//! A small end-to-end experiment: train, threshold, attack, explain, score
//! evenness and robustness, correlate, and write every artifact.

use robexplain::evenness::EvennessMetric;
use robexplain::explain::AttributionMethod;
use robexplain::featurespace::SyntheticConfig;
use robexplain::models::{Classifier, ClassifierSpec};
use robexplain::pipeline::{
    emit_scatter_data, run_experiment, write_artifacts, DatasetSource, ExperimentConfig,
    ScatterAxis, ScatterRequest,
};
use robexplain::stats::CorrelationMethod;
use robexplain::Result;

pub fn main() -> Result<()> {
    let mut cfg = ExperimentConfig::new(DatasetSource::Synthetic(SyntheticConfig {
        d: 300,
        n_benign: 400,
        n_malware: 300,
        n_strong: 15,
        strong_rate_gap: 0.2,
        weak_rate_gap: 0.02,
        base_density: 0.02,
        seed: 1,
    }));
    cfg.classifiers = [Classifier::Svm, Classifier::SecSvm, Classifier::Logistic]
        .into_iter()
        .map(ClassifierSpec::preset)
        .collect();
    cfg.eps_grid = (1..=20).collect();
    cfg.n_attacked = Some(60);
    cfg.ig_steps = 50;
    cfg.m = 100;
    let report = run_experiment(&cfg)?;

    for c in &report.classifiers {
        let spearman = |method| {
            c.correlation(method, EvennessMetric::E2)
                .and_then(|cell| cell.report(CorrelationMethod::Spearman))
                .and_then(|r| r.coefficient)
                .map_or_else(|| "UNDEFINED".to_owned(), |v| format!("{v:+.3}"))
        };
        println!(
            "{:>9}: AUC {:.3}, R {:.3}, Spearman(E2, R) gradient {} / gradient*input {} / IG {}",
            c.label,
            c.mean_auc,
            c.mean_robustness,
            spearman(AttributionMethod::Gradient),
            spearman(AttributionMethod::GradientInput),
            spearman(AttributionMethod::IntegratedGradients),
        );
    }

    let per_classifier = emit_scatter_data(
        &report,
        &ScatterRequest {
            method: AttributionMethod::IntegratedGradients,
            metric: EvennessMetric::E1,
            axis: ScatterAxis::DetectionRate,
            classifier: None,
            subsample: None,
            seed: 0,
        },
    )?;
    print!("{per_classifier}");

    let dir = std::env::temp_dir().join("robexplain-full-experiment");
    let files = write_artifacts(&report, &dir)?;
    println!("wrote {} files to {}", files.len(), dir.display());
    Ok(())
}
