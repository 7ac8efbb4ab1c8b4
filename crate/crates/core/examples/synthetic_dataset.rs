//! Generates a synthetic dataset, round-trips it through the sparse text
//! format and splits it into stratified train and test sides.

use robexplain::featurespace::{
    generate_synthetic, parse_dataset, split, write_dataset, Label, SyntheticConfig,
};
use robexplain::Result;

pub fn main() -> Result<()> {
    let cfg = SyntheticConfig {
        d: 300,
        n_benign: 400,
        n_malware: 200,
        n_strong: 20,
        strong_rate_gap: 0.3,
        weak_rate_gap: 0.02,
        base_density: 0.03,
        seed: 7,
    };
    let ds = generate_synthetic(&cfg)?;
    let mean_nnz = ds.samples().iter().map(|x| x.nnz()).sum::<usize>() as f64 / ds.len() as f64;
    println!(
        "{} samples, d = {}, {:.1} active features per sample",
        ds.len(),
        ds.dim(),
        mean_nnz
    );

    let mut text = Vec::new();
    write_dataset(&mut text, &ds).expect("writing to memory");
    let reloaded = parse_dataset(text.as_slice(), Some(ds.dim()))?;
    assert_eq!(reloaded.samples(), ds.samples());
    println!(
        "first line: {}",
        String::from_utf8_lossy(&text).lines().next().unwrap_or("")
    );

    let (train, test) = split(&ds, 0.6, 1)?;
    for (name, side) in [("train", &train), ("test", &test)] {
        println!(
            "{name}: {} benign, {} malware",
            side.count(Label::Benign),
            side.count(Label::Malware)
        );
    }
    Ok(())
}
