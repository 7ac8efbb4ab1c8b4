//! Adversarial robustness of a plain SVM and a Sec-SVM over a budget grid.

use robexplain::attack::{AttackConfig, AttackMethod};
use robexplain::featurespace::{generate_synthetic, split, Label, SyntheticConfig};
use robexplain::models::{detection_rate_at_fpr, train_classifier, Classifier, ClassifierSpec};
use robexplain::robustness::{aggregate_robustness, RobustnessLoss};
use robexplain::Result;

pub fn main() -> Result<()> {
    let ds = generate_synthetic(&SyntheticConfig {
        d: 400,
        n_benign: 1000,
        n_malware: 600,
        n_strong: 40,
        strong_rate_gap: 0.1,
        weak_rate_gap: 0.08,
        base_density: 0.2,
        seed: 2,
    })?;
    let (train, test) = split(&ds, 0.5, 0)?;
    let malware: Vec<_> = test
        .iter()
        .filter(|(_, y)| *y == Label::Malware)
        .map(|(x, _)| x.clone())
        .take(50)
        .collect();
    let grid = [1, 5, 10, 20, 40];

    for classifier in [Classifier::Svm, Classifier::SecSvm] {
        let model = train_classifier(&ClassifierSpec::preset(classifier), &train, 0)?;
        let (rate, threshold) = detection_rate_at_fpr(&model, &test, 0.01)?;
        println!("{classifier:>8}: clean detection rate {rate:.3}");
        let cfg = AttackConfig {
            threshold,
            ..AttackConfig::default()
        };
        let r = aggregate_robustness(
            &model,
            &malware,
            &grid,
            AttackMethod::Pgd,
            &cfg,
            RobustnessLoss::Hinge,
        )?;
        let per_eps: Vec<String> = r.per_eps.iter().map(|v| format!("{v:.3}")).collect();
        println!(
            "{classifier:>8}: R per budget [{}], aggregate {:.3}",
            per_eps.join(", "),
            r.aggregate
        );
    }
    Ok(())
}
