//! Gradient, Gradient*Input and integrated gradients on a linear and an RBF
//! model, with the top features of one sample as relevance percentages.

use robexplain::explain::{explain, top_features, AttributionMethod};
use robexplain::featurespace::{generate_synthetic, split, Label, SyntheticConfig};
use robexplain::models::{score, train_classifier, Classifier, ClassifierSpec, DecisionFunction};
use robexplain::Result;

pub fn main() -> Result<()> {
    let ds = generate_synthetic(&SyntheticConfig {
        d: 200,
        n_benign: 300,
        n_malware: 200,
        n_strong: 10,
        strong_rate_gap: 0.4,
        weak_rate_gap: 0.03,
        base_density: 0.03,
        seed: 5,
    })?;
    let (train, test) = split(&ds, 0.5, 0)?;
    let x = test
        .iter()
        .find(|(_, y)| *y == Label::Malware)
        .map(|(x, _)| x.clone())
        .expect("test side has malware");

    for classifier in [Classifier::Svm, Classifier::SvmRbf] {
        let model = train_classifier(&ClassifierSpec::preset(classifier), &train, 0)?;
        println!("{classifier}: f(x) = {:.4}", score(&model, &x)?);
        for method in AttributionMethod::ALL {
            let r = explain(&model, &x, method, 200)?;
            let top: Vec<String> = top_features(&r, 3)
                .iter()
                .map(|f| format!("#{} {:+.1}%", f.index, f.percent))
                .collect();
            println!("  {method:>20}: {}", top.join(", "));
        }
        // integrated gradients sum to f(x) - f(0) up to the path discretization
        let ig = explain(&model, &x, AttributionMethod::IntegratedGradients, 1000)?;
        let gap = model.score_dense(&x.to_dense()) - model.score_dense(&vec![0.0; x.dim()]);
        println!(
            "  completeness: sum {:.6} vs f(x) - f(0) {:.6}",
            ig.values.iter().sum::<f64>(),
            gap
        );
    }
    Ok(())
}
