//! Integrated gradients against closed-form path sums and the completeness
//! axiom.

mod common;

use common::{random_linear, random_rbf, random_sparse, rng};
use robexplain::explain::{attribution_gradient_input, attribution_integrated_gradients};
use robexplain::models::DecisionFunction;

#[test]
fn ig_matches_the_closed_form_path_sum() {
    let mut r = rng(41);
    for _ in 0..20 {
        let case = random_rbf(&mut r, 16, 6, 0.3, 0.05);
        let x = random_sparse(&mut r, 16, 0.4);
        for p in [1, 7, 100] {
            let ig = attribution_integrated_gradients(&case.model, &x, None, p).unwrap();
            let oracle = case.integrated_gradients(&x, p);
            for (a, b) in ig.values.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-10, "p={p}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn ig_converges_to_completeness_at_first_order() {
    let mut r = rng(42);
    for _ in 0..10 {
        let case = random_rbf(&mut r, 20, 10, 0.3, 0.01);
        let x = random_sparse(&mut r, 20, 0.3);
        let gap = case.model.score_dense(&x.to_dense()) - case.model.score_dense(&[0.0; 20]);
        let reference: f64 = case.integrated_gradients(&x, 1_000_000).iter().sum();
        assert!((reference - gap).abs() <= 1e-5 * gap.abs().max(1.0));
        let error = |p: usize| {
            let sum: f64 = attribution_integrated_gradients(&case.model, &x, None, p)
                .unwrap()
                .values
                .iter()
                .sum();
            (sum - gap).abs()
        };
        // the right-endpoint rule has error c/p + O(1/p²)
        assert!(error(1000) <= 0.11 * error(100) + 1e-12);
    }
}

#[test]
fn ig_on_linear_models_is_gradient_times_input() {
    let mut r = rng(43);
    for _ in 0..30 {
        let m = random_linear(&mut r, 25);
        let x = random_sparse(&mut r, 25, 0.3);
        let gi = attribution_gradient_input(&m, &x).unwrap();
        for p in [1, 10, 100] {
            let ig = attribution_integrated_gradients(&m, &x, None, p).unwrap();
            let diff = ig
                .values
                .iter()
                .zip(&gi.values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(diff < 1e-12);
        }
    }
}

#[test]
fn attributions_vanish_on_absent_features() {
    let mut r = rng(44);
    let case = random_rbf(&mut r, 12, 5, 0.4, 0.1);
    let x = random_sparse(&mut r, 12, 0.3);
    let ig = attribution_integrated_gradients(&case.model, &x, None, 50).unwrap();
    for i in 0..12 {
        if !x.contains(i) {
            assert_eq!(ig.values[i], 0.0);
        }
    }
}
