//! Trains every classifier preset and reports its ROC area and detection
//! rate at 1% false positives on held-out data.

use robexplain::featurespace::{generate_synthetic, split, SyntheticConfig};
use robexplain::models::{
    auc, detection_rate_at_fpr, model_from_json, model_to_json, roc_curve, train_classifier,
    Classifier, ClassifierSpec,
};
use robexplain::Result;

pub fn main() -> Result<()> {
    let ds = generate_synthetic(&SyntheticConfig {
        d: 300,
        n_benign: 400,
        n_malware: 300,
        n_strong: 30,
        strong_rate_gap: 0.15,
        weak_rate_gap: 0.02,
        base_density: 0.03,
        seed: 1,
    })?;
    let (train, test) = split(&ds, 0.5, 2)?;

    for classifier in Classifier::ALL {
        let model = train_classifier(&ClassifierSpec::preset(classifier), &train, 3)?;
        let roc = roc_curve(&model, &test)?;
        let (rate, threshold) = detection_rate_at_fpr(&model, &test, 0.01)?;
        println!(
            "{classifier:>8}: AUC {:.4}, detection rate {:.3} at threshold {:.3}",
            auc(&roc),
            rate,
            threshold
        );
        let restored = model_from_json(&model_to_json(&model)?)?;
        assert_eq!(restored, model);
    }
    Ok(())
}
