//! Property tests for the eta solver: the curve-level contract (zero at
//! zero, monotone, midpoint-concave, saturating) plus rate-bound and
//! cardinality-monotonicity properties on random binary chains.

use exporegion::eta_solver::{
    aux_information, eta_curve, eta_eval, eta_oracle, AuxChannel, EtaEnvelope, SolverConfig,
};
use exporegion::source_model::{dsbs, make_dsbs_example};
use proptest::prelude::*;

fn quick_cfg() -> SolverConfig {
    SolverConfig {
        restarts: 6,
        lambda_samples: 17,
        ..SolverConfig::default()
    }
}

fn flip_strategy() -> impl Strategy<Value = f64> {
    // stay away from 0.5 where the link carries no information
    prop_oneof![0.05f64..0.42, 0.58f64..0.95]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn eta_never_exceeds_rate_or_saturation(
        p0 in 0.1f64..0.9,
        f1 in flip_strategy(),
        f2 in flip_strategy(),
        r in 0.0f64..1.2,
    ) {
        let src = dsbs(p0, &[f1, f2]).unwrap();
        let cfg = quick_cfg();
        for l in 1..=2usize {
            let v = eta_eval(&src, l, r, &cfg).unwrap();
            let sat = src.link_mutual_information(l).unwrap();
            prop_assert!(v >= 0.0);
            prop_assert!(v <= r + 1e-9, "eta({r}) = {v} exceeds the rate");
            prop_assert!(v <= sat + 1e-9);
        }
    }

    #[test]
    fn curve_is_monotone_and_midpoint_concave(
        p0 in 0.1f64..0.9,
        f1 in flip_strategy(),
        f2 in flip_strategy(),
    ) {
        let src = dsbs(p0, &[f1, f2]).unwrap();
        let cfg = quick_cfg();
        let h = src.marginal(0).unwrap().entropy();
        let grid: Vec<f64> = (0..=8).map(|i| h * i as f64 / 8.0).collect();
        let curve = eta_curve(&src, 1, &grid, &cfg).unwrap();
        prop_assert!(curve.samples[0].1.abs() < 1e-12);
        for w in curve.samples.windows(2) {
            prop_assert!(w[1].1 >= w[0].1 - 1e-6);
        }
        for w in curve.samples.windows(3) {
            prop_assert!(w[1].1 >= 0.5 * (w[0].1 + w[2].1) - 1e-6);
        }
        let last = curve.samples.last().unwrap().1;
        prop_assert!((last - curve.saturation_value).abs() < 1e-9);
    }

}

#[test]
fn larger_u_alphabet_never_hurts() {
    // enlarging the auxiliary alphabet enlarges the feasible set
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
    for _ in 0..6 {
        let p0 = 0.15 + 0.7 * rng.gen::<f64>();
        let flip = 0.05 + 0.37 * rng.gen::<f64>();
        let r = 0.05 + 0.75 * rng.gen::<f64>();
        let src = dsbs(p0, &[flip]).unwrap();
        let cfg = SolverConfig::default();
        let u2 = eta_eval(&src, 1, r, &cfg.with_u_size(2)).unwrap();
        let u3 = eta_eval(&src, 1, r, &cfg.with_u_size(3)).unwrap();
        assert!(u3 >= u2 - 1e-6, "u3 = {u3} below u2 = {u2} at rate {r}");
    }
}

#[test]
fn envelope_dominates_hand_built_channels() {
    // every auxiliary channel yields a feasible (rate, value) pair; the
    // solved trade-off must lie (weakly) above all of them
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
    for _ in 0..4 {
        let p0 = 0.15 + 0.7 * rng.gen::<f64>();
        let flip = 0.05 + 0.35 * rng.gen::<f64>();
        let src = dsbs(p0, &[flip]).unwrap();
        let env = EtaEnvelope::solve(&src, 1, &SolverConfig::default()).unwrap();
        for _ in 0..50 {
            let mut row = || {
                let (a, b): (f64, f64) = (rng.gen(), rng.gen());
                vec![a * b, a * (1.0 - b), 1.0 - a]
            };
            let aux = AuxChannel::new(vec![row(), row()]).unwrap();
            let (rate, value) = aux_information(&src, 1, &aux).unwrap();
            assert!(
                env.eval(rate) >= value - 1e-3,
                "envelope {} below feasible point ({rate}, {value})",
                env.eval(rate)
            );
        }
    }
}

#[test]
fn saturation_grid_gives_constant_curve() {
    let src = make_dsbs_example();
    let cfg = quick_cfg();
    let h = src.marginal(0).unwrap().entropy();
    let sat = src.link_mutual_information(1).unwrap();
    let grid = [h, h + 0.2, h + 1.0, h + 5.0];
    let curve = eta_curve(&src, 1, &grid, &cfg).unwrap();
    for (_, v) in &curve.samples {
        assert!((v - sat).abs() < 1e-12);
    }
}

#[test]
fn first_and_second_link_curves_are_close_for_the_symmetric_example() {
    // the two link channels are the same flip, so the curves track each
    // other within 0.01 over [0, 1]
    let src = make_dsbs_example();
    let cfg = SolverConfig::default();
    let e1 = EtaEnvelope::solve(&src, 1, &cfg).unwrap();
    let e2 = EtaEnvelope::solve(&src, 2, &cfg).unwrap();
    for i in 0..=20 {
        let r = i as f64 / 20.0;
        assert!(
            (e1.eval(r) - e2.eval(r)).abs() < 0.01,
            "curves split at R = {r}: {} vs {}",
            e1.eval(r),
            e2.eval(r)
        );
    }
}

#[test]
fn oracle_agrees_with_solver_at_reference_rates() {
    let src = make_dsbs_example();
    let cfg = SolverConfig::default();
    for (l, r) in [(1usize, 0.5 / 0.95), (1, 0.5 / 0.85), (2, 0.5 / 0.95)] {
        let solver = eta_eval(&src, l, r, &cfg).unwrap();
        let oracle = eta_oracle(&src, l, r, 400, 2).unwrap();
        assert!(
            (solver - oracle).abs() <= 1e-3,
            "link {l} rate {r}: solver {solver} vs oracle {oracle}"
        );
    }
}

#[test]
fn coarse_three_letter_oracle_never_beats_solver_materially() {
    // supports the open cardinality question: |U| = 3 shows no gain over
    // the solver's envelope on the canonical binary example
    let src = make_dsbs_example();
    let cfg = SolverConfig::default();
    let r = 0.5 / 0.95;
    let solver = eta_eval(&src, 1, r, &cfg).unwrap();
    let oracle3 = eta_oracle(&src, 1, r, 40, 3).unwrap();
    assert!(
        oracle3 <= solver + 1e-3,
        "u3 oracle {oracle3} above solver {solver}"
    );
}

#[test]
fn solver_config_json_round_trip() {
    let text =
        r#"{"restarts": 12, "lambda_samples": 33, "tol": 1e-8, "u_size": "auto", "seed": 3}"#;
    let cfg: SolverConfig = serde_json::from_str(text).unwrap();
    assert_eq!(cfg.restarts, 12);
    assert_eq!(cfg.u_size, exporegion::eta_solver::USize::Auto);
    let text = r#"{"u_size": 2}"#;
    let cfg: SolverConfig = serde_json::from_str(text).unwrap();
    assert_eq!(cfg.u_size, exporegion::eta_solver::USize::Fixed(2));
    assert_eq!(cfg.restarts, 32); // default
    assert!(serde_json::from_str::<SolverConfig>(r#"{"u_size": "most"}"#).is_err());
}
