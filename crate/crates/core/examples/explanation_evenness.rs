//! Evenness of attributions: E1 from the cumulative concentration curve and
//! E2 from the l1/l-infinity ratio of the top-m magnitudes.

use robexplain::evenness::{
    average_evenness, cumulative_ratio, evenness_e1, evenness_e2, evenness_report, EvennessMetric,
};
use robexplain::explain::{explain, AttributionMethod};
use robexplain::featurespace::{generate_synthetic, split, Label, SyntheticConfig};
use robexplain::models::{train_classifier, Classifier, ClassifierSpec};
use robexplain::Result;

pub fn main() -> Result<()> {
    let uniform = [1.0; 4];
    let one_hot = [0.0, 3.0, 0.0, 0.0];
    let mixed = [2.0, -1.0, 1.0, 0.0];
    for (name, v) in [
        ("uniform", &uniform[..]),
        ("one-hot", &one_hot[..]),
        ("mixed", &mixed[..]),
    ] {
        println!(
            "{name:>8}: E1 {:.3}, E2 {:.3}",
            evenness_e1(v, 4)?,
            evenness_e2(v, 4)?
        );
    }
    println!("F(mixed, 1) = {:.3}", cumulative_ratio(&mixed, 1, 4)?);

    let ds = generate_synthetic(&SyntheticConfig {
        d: 200,
        n_benign: 300,
        n_malware: 200,
        seed: 9,
        ..SyntheticConfig::default()
    })?;
    let (train, test) = split(&ds, 0.5, 0)?;
    let malware: Vec<_> = test
        .iter()
        .filter(|(_, y)| *y == Label::Malware)
        .map(|(x, _)| x.clone())
        .collect();
    for classifier in [Classifier::Svm, Classifier::SecSvm] {
        let model = train_classifier(&ClassifierSpec::preset(classifier), &train, 0)?;
        let relevances = malware
            .iter()
            .map(|x| explain(&model, x, AttributionMethod::GradientInput, 1))
            .collect::<Result<Vec<_>>>()?;
        let report = evenness_report(&relevances, 50)?;
        println!(
            "{classifier:>8}: mean E1 {:.3}, mean E2 {:.3}, {} undefined, average E2 {:.3}",
            report.mean_e1.unwrap_or(f64::NAN),
            report.mean_e2.unwrap_or(f64::NAN),
            report.n_undefined,
            average_evenness(&relevances, EvennessMetric::E2, 50)?
        );
    }
    Ok(())
}
