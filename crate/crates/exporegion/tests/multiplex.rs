//! Simulator consistency: the empirical alarm rates track the analytic
//! aggregation within binomial error, and realized message lengths track
//! the flag-bit accounting.

use exporegion::multiplex_calculus::{
    aggregate_type1, aggregate_type1_exact, aggregate_type2, expected_lengths, simulate,
    MultiplexPlan, SubschemeSummary,
};
use exporegion::source_model::{dsbs, make_dsbs_example};

#[test]
fn empirical_alpha_tracks_the_aggregation_bound() {
    // the bound exceeds the exact mean by (1 - coverage) * alpha(n), which
    // stays inside three binomial standard errors at these parameters
    let plan = MultiplexPlan::equal_epsilon(2, 0.1, &[0.5, 0.5], &[0.16, 0.34], 1.0).unwrap();
    let src = make_dsbs_example();
    let rep = simulate(&plan, &src, 10_000, 100_000, 0).unwrap();
    let bound = aggregate_type1(&plan, 10_000).unwrap();
    for ((&hat, &exact), &bnd) in rep.alpha_hat.iter().zip(&rep.alpha_analytic).zip(&bound) {
        let se = (exact * (1.0 - exact) / 100_000.0).sqrt();
        assert!(
            (hat - bnd).abs() <= 3.0 * se + 0.1 * 0.02,
            "alpha_hat {hat} vs bound {bnd} (se {se})"
        );
        assert!((hat - exact).abs() <= 3.0 * se);
    }
}

#[test]
fn realized_lengths_match_the_accounting_within_three_ses() {
    let plan = MultiplexPlan::equal_epsilon(2, 0.1, &[0.5, 0.5], &[0.16, 0.34], 1.0).unwrap();
    let src = make_dsbs_example();
    let n = 10_000u64;
    let trials = 100_000u64;
    let rep = simulate(&plan, &src, n, trials, 0).unwrap();
    let expected = expected_lengths(&plan, n).unwrap();
    // per-trial length is n*R12 * Bern(0.9) + flags
    let payload = 10_000.0 * 0.5 / 0.9;
    let sd = payload * (0.9f64 * 0.1).sqrt();
    let se = sd / (trials as f64).sqrt();
    for (l, (got, want)) in rep.mean_length.iter().zip(&expected).enumerate() {
        assert!(
            (got - want).abs() <= 3.0 * se,
            "link {}: {got} vs {want} (se {se})",
            l + 1
        );
    }
}

#[test]
fn nested_k3_plan_respects_budgets_under_simulation() {
    let eps = [0.3, 0.2, 0.1];
    let plan = MultiplexPlan::nested(3, &eps, &[0.5, 0.5, 0.5], &[0.1, 0.2, 0.3]).unwrap();
    let src = dsbs(0.4, &[0.8, 0.8, 0.8]).unwrap();
    let n = 10_000u64;
    let trials = 50_000u64;
    let rep = simulate(&plan, &src, n, trials, 1).unwrap();
    assert_eq!(rep.budget_ok, Some(vec![true, true, true]));
    // lengths stay within the per-link budget + flags up to sampling noise:
    // payload is n*R/0.9 on a 0.9-probability event
    let payload = n as f64 * 0.5 / 0.9;
    let se = payload * (0.9f64 * 0.1).sqrt() / (trials as f64).sqrt();
    let expected = expected_lengths(&plan, n).unwrap();
    for (l, (got, want)) in rep.mean_length.iter().zip(&expected).enumerate() {
        assert!((want - (n as f64 * 0.5 + 3.0)).abs() < 1e-9);
        assert!(
            *got <= want + 3.0 * se,
            "link {}: {got} vs {want} + 3*{se}",
            l + 1
        );
    }
}

#[test]
fn exponent_aggregation_ignores_sigma_values() {
    // exponents depend only on which subsets are active, not their masses
    let mut a = MultiplexPlan::equal_epsilon(2, 0.1, &[0.5, 0.5], &[0.16, 0.34], 1.0).unwrap();
    a.sigma.insert("1".to_string(), 0.05);
    a.subschemes.insert(
        "1".to_string(),
        SubschemeSummary {
            thetas: [(1usize, 0.1f64)].into_iter().collect(),
            rates: vec![0.2],
            alpha: None,
        },
    );
    let t_before = aggregate_type2(&a).unwrap();
    a.sigma.insert("1".to_string(), 0.01);
    a.sigma.insert("12".to_string(), 0.7);
    let t_after = aggregate_type2(&a).unwrap();
    assert_eq!(t_before, t_after);
}

#[test]
fn exact_mean_is_below_the_bound() {
    let plan = MultiplexPlan::equal_epsilon(2, 0.1, &[0.5, 0.5], &[0.16, 0.34], 1.0).unwrap();
    for n in [100u64, 10_000, 1_000_000] {
        let exact = aggregate_type1_exact(&plan, n).unwrap();
        let bound = aggregate_type1(&plan, n).unwrap();
        for (e, b) in exact.iter().zip(&bound) {
            assert!(e <= b);
        }
    }
}

#[test]
fn flags_only_for_empty_sigma() {
    let plan = MultiplexPlan {
        k: 3,
        sigma: Default::default(),
        subschemes: Default::default(),
        alpha_model: Default::default(),
        epsilons: None,
    };
    let lengths = expected_lengths(&plan, 5_000).unwrap();
    assert_eq!(lengths, vec![3.0, 3.0, 3.0]);
}
