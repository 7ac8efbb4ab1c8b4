//! Feature-addition evasion: PGD against the exact greedy attack on a linear
//! SVM, minimal evasion budgets, and a security evaluation curve.

use robexplain::attack::{
    epsilon_min, pgd_evasion, security_evaluation, AttackConfig, AttackMethod,
};
use robexplain::featurespace::{generate_synthetic, split, Label, SyntheticConfig};
use robexplain::models::{detection_rate_at_fpr, train_classifier, Classifier, ClassifierSpec};
use robexplain::Result;

pub fn main() -> Result<()> {
    let ds = generate_synthetic(&SyntheticConfig {
        d: 400,
        n_benign: 400,
        n_malware: 300,
        n_strong: 20,
        strong_rate_gap: 0.3,
        weak_rate_gap: 0.02,
        base_density: 0.02,
        seed: 3,
    })?;
    let (train, test) = split(&ds, 0.5, 1)?;
    let model = train_classifier(&ClassifierSpec::preset(Classifier::Svm), &train, 0)?;
    let (_, threshold) = detection_rate_at_fpr(&model, &test, 0.01)?;
    let malware: Vec<_> = test
        .iter()
        .filter(|(_, y)| *y == Label::Malware)
        .map(|(x, _)| x.clone())
        .take(40)
        .collect();

    let cfg = AttackConfig {
        threshold,
        ..AttackConfig::default()
    };
    let x = &malware[0];
    let r = pgd_evasion(&model, x, &cfg.with_epsilon(5))?;
    println!(
        "one sample: score {:.3} -> {:.3} after adding {:?} in {} iterations",
        r.score_before, r.score_after, r.added_indices, r.iterations
    );

    let mut agree = 0;
    for x in &malware {
        let pgd = epsilon_min(&model, x, 50, AttackMethod::Pgd, &cfg)?;
        let greedy = epsilon_min(&model, x, 50, AttackMethod::Greedy, &cfg)?;
        agree += usize::from(pgd == greedy);
    }
    println!(
        "PGD and greedy minimal budgets agree on {agree}/{} samples",
        malware.len()
    );

    let grid: Vec<usize> = (0..=20).collect();
    let curve = security_evaluation(&model, &malware, &grid, threshold, AttackMethod::Pgd, &cfg)?;
    for (eps, rate) in curve.epsilons.iter().zip(&curve.detection_rates).step_by(5) {
        println!("eps {eps:>2}: detection rate {rate:.3}");
    }
    println!("curve area {:.2}", curve.area());
    Ok(())
}
