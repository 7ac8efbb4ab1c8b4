//! Attacks against exhaustive search and the exact greedy attack.

mod common;

use common::{brute_force_min_score, random_linear, random_rbf, random_sparse, rng};
use proptest::prelude::*;
use robexplain::attack::{
    epsilon_min, greedy_linear_evasion, pgd_evasion, project, AttackConfig, AttackMethod,
    EpsilonMin,
};
use robexplain::featurespace::SparseBinaryVector;
use robexplain::models::{DecisionFunction, LinearModel};

fn never_evades() -> AttackConfig {
    AttackConfig {
        threshold: f64::NEG_INFINITY,
        ..AttackConfig::default()
    }
}

#[test]
fn greedy_is_optimal_on_linear_models() {
    let mut r = rng(51);
    for _ in 0..40 {
        let m = random_linear(&mut r, 9);
        let x = random_sparse(&mut r, 9, 0.3);
        for eps in 1..=3 {
            let g = greedy_linear_evasion(&m, &x, eps, f64::NEG_INFINITY).unwrap();
            let best = brute_force_min_score(&m, &x, eps);
            assert!((g.score_after - best).abs() < 1e-12);
        }
    }
}

#[test]
fn pgd_never_beats_exhaustive_search_on_rbf_models() {
    let mut r = rng(52);
    for _ in 0..30 {
        let case = random_rbf(&mut r, 8, 6, 0.4, 0.5);
        let x = random_sparse(&mut r, 8, 0.3);
        let cfg = never_evades().with_epsilon(2);
        let res = pgd_evasion(&case.model, &x, &cfg).unwrap();
        let best = brute_force_min_score(&case.model, &x, 2);
        assert!(res.score_after >= best - 1e-12);
        assert!(res.is_feasible(&x, &cfg));
        assert_eq!(res.score_after, case.model.score_sparse(&res.adversarial));
    }
}

#[test]
fn pgd_reaches_the_linear_optimum() {
    let mut r = rng(53);
    for _ in 0..40 {
        let m = random_linear(&mut r, 30);
        let x = random_sparse(&mut r, 30, 0.2);
        for eps in [1, 3, 6] {
            let p = pgd_evasion(&m, &x, &never_evades().with_epsilon(eps)).unwrap();
            let g = greedy_linear_evasion(&m, &x, eps, f64::NEG_INFINITY).unwrap();
            assert!((p.score_after - g.score_after).abs() < 1e-9);
        }
    }
}

fn linear_and_sample() -> impl Strategy<Value = (LinearModel, SparseBinaryVector)> {
    (2usize..24).prop_flat_map(|d| {
        (
            prop::collection::vec(-3.0f64..3.0, d),
            -2.0f64..2.0,
            prop::collection::vec(any::<bool>(), d),
        )
            .prop_map(move |(w, b, bits)| {
                let x = SparseBinaryVector::from_dense(
                    &bits
                        .iter()
                        .map(|&v| f64::from(u8::from(v)))
                        .collect::<Vec<_>>(),
                );
                (LinearModel::new(w, b).unwrap(), x)
            })
    })
}

proptest! {
    #[test]
    fn projection_is_feasible_and_idempotent(
        values in prop::collection::vec(-1.0f64..2.0, 1..30),
        bits in prop::collection::vec(any::<bool>(), 30),
        eps in 1usize..6,
    ) {
        let d = values.len();
        let x = SparseBinaryVector::from_dense(&bits[..d].iter().map(|&v| f64::from(u8::from(v))).collect::<Vec<_>>());
        let cfg = AttackConfig::default().with_epsilon(eps);
        let p = project(&values, &x, &cfg).unwrap();
        prop_assert!(p.added_relative_to(&x).len() <= eps);
        prop_assert!(x.added_relative_to(&p).is_empty());
        prop_assert_eq!(project(&p.to_dense(), &x, &cfg).unwrap(), p);
    }

    #[test]
    fn pgd_budget_is_never_below_greedy((m, x) in linear_and_sample(), eps_max in 1usize..8) {
        let cfg = AttackConfig::default();
        let greedy = epsilon_min(&m, &x, eps_max, AttackMethod::Greedy, &cfg).unwrap();
        let pgd = epsilon_min(&m, &x, eps_max, AttackMethod::Pgd, &cfg).unwrap();
        match (greedy, pgd) {
            (EpsilonMin::Evadable(g), EpsilonMin::Evadable(p)) => prop_assert!(p >= g),
            (EpsilonMin::NotEvadable, other) => prop_assert_eq!(other, EpsilonMin::NotEvadable),
            (EpsilonMin::Evadable(_), EpsilonMin::NotEvadable) => {}
        }
    }

    #[test]
    fn attacks_only_add_features((m, x) in linear_and_sample(), eps in 1usize..5) {
        let cfg = never_evades().with_epsilon(eps);
        let r = pgd_evasion(&m, &x, &cfg).unwrap();
        prop_assert!(r.is_feasible(&x, &cfg));
        prop_assert!(r.score_after <= r.score_before);
        prop_assert!(r.score_trace.windows(2).all(|w| w[1] <= w[0]));
    }
}
