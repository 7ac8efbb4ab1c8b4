//! Pearson, Spearman and Kendall correlations with asymptotic and
//! permutation p-values.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robexplain::stats::{correlation_suite, pair_counts, permutation_p_value, CorrelationMethod};
use robexplain::Result;

pub fn main() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let xs: Vec<f64> = (0..60).map(|_| rng.random::<f64>()).collect();
    let ys: Vec<f64> = xs.iter().map(|x| x + 0.5 * rng.random::<f64>()).collect();

    for r in correlation_suite(&xs, &ys)? {
        println!(
            "{:>8}: coefficient {:.3}, p-value {:.2e}, n {}",
            r.method,
            r.coefficient.unwrap_or(f64::NAN),
            r.p_value.unwrap_or(f64::NAN),
            r.n
        );
    }
    let p = permutation_p_value(&xs, &ys, CorrelationMethod::Spearman, 999, 0)?;
    println!("Spearman permutation p-value {:.4}", p.unwrap_or(f64::NAN));

    let counts = pair_counts(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]);
    println!("pairs of (1,2,3) vs (1,3,2): {counts:?}");

    let constant = correlation_suite(&[0.1; 5], &[1.0, 2.0, 3.0, 4.0, 5.0])?;
    println!(
        "constant input degenerate: {}",
        constant.iter().all(|r| r.degenerate)
    );
    Ok(())
}
