//! Picks the SVM regularization strength by stratified k-fold
//! cross-validation, preferring the most regularized near-best candidate.

use robexplain::featurespace::{generate_synthetic, SyntheticConfig};
use robexplain::models::{cross_validate, select_by_cv, Classifier, ClassifierSpec};
use robexplain::Result;

pub fn main() -> Result<()> {
    let ds = generate_synthetic(&SyntheticConfig {
        d: 200,
        n_benign: 300,
        n_malware: 200,
        n_strong: 20,
        strong_rate_gap: 0.1,
        weak_rate_gap: 0.02,
        base_density: 0.03,
        seed: 4,
    })?;
    let candidates: Vec<ClassifierSpec> = [0.01, 0.1, 1.0, 10.0]
        .into_iter()
        .map(|c| ClassifierSpec {
            c: Some(c),
            ..ClassifierSpec::preset(Classifier::Svm)
        })
        .collect();
    let results = cross_validate(&ds, &candidates, 3, 0.01, 0)?;
    for r in &results {
        println!(
            "C = {:>5}: mean detection rate {:.3} {:?}",
            r.spec.c.unwrap_or_default(),
            r.mean_rate,
            r.fold_rates
        );
    }
    if let Some(best) = select_by_cv(&results, 0.01) {
        println!("selected C = {}", best.spec.c.unwrap_or_default());
    }
    Ok(())
}
