//! Elimination-engine tests: projection soundness against an interval
//! oracle, order independence, witness validity, and the reproduction of
//! the hand-derived reduced systems.

use exporegion::linear_feasibility::{
    delta_split_system, k3_reduced_conditions, parse_decimal, rat_int, sigma_system, Feasibility,
    InequalitySystem, Rat, Relation,
};
use num_traits::Zero;
use proptest::prelude::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn r(s: &str) -> Rat {
    parse_decimal(s).unwrap()
}

/// Interval oracle: a point over the kept variables extends to the full
/// system iff max(lower bounds) <= min(upper bounds) for the eliminated
/// variable, computed directly from the original rows.
fn extends(sys: &InequalitySystem, var_idx: usize, partial: &[Rat]) -> bool {
    let mut lo: Option<Rat> = None;
    let mut hi: Option<Rat> = None;
    for row in sys.rows() {
        // bring the row into >= form(s)
        let mut forms: Vec<(Vec<Rat>, Rat)> = Vec::new();
        let neg = |v: &Vec<Rat>| v.iter().map(|c| -c.clone()).collect::<Vec<Rat>>();
        match row.relation {
            Relation::Ge => forms.push((row.coeffs.clone(), row.constant.clone())),
            Relation::Le => forms.push((neg(&row.coeffs), -row.constant.clone())),
            Relation::Eq => {
                forms.push((row.coeffs.clone(), row.constant.clone()));
                forms.push((neg(&row.coeffs), -row.constant.clone()));
            }
        }
        for (coeffs, constant) in forms {
            let a = coeffs[var_idx].clone();
            let mut rest = constant;
            let mut pi = 0;
            for (j, c) in coeffs.iter().enumerate() {
                if j == var_idx {
                    continue;
                }
                rest -= c.clone() * partial[pi].clone();
                pi += 1;
            }
            if a.is_zero() {
                if rest > Rat::zero() {
                    return false; // unsatisfiable independent of the variable
                }
                continue;
            }
            let bound = rest / a.clone();
            if a > Rat::zero() {
                lo = Some(match lo {
                    Some(l) if l >= bound => l,
                    _ => bound,
                });
            } else {
                hi = Some(match hi {
                    Some(h) if h <= bound => h,
                    _ => bound,
                });
            }
        }
    }
    match (lo, hi) {
        (Some(l), Some(h)) => l <= h,
        _ => true,
    }
}

fn arb_system() -> impl Strategy<Value = InequalitySystem> {
    let coeff = -2i64..=2;
    let konst = -2i64..=2;
    (2usize..=4, 3usize..=7).prop_flat_map(move |(nv, nr)| {
        let row = (
            proptest::collection::vec(coeff.clone(), nv),
            konst.clone(),
            0u8..3,
        )
            .prop_map(move |(cs, k, rel)| {
                let rel = match rel {
                    0 => Relation::Le,
                    1 => Relation::Ge,
                    _ => Relation::Eq,
                };
                (cs, rel, k)
            });
        proptest::collection::vec(row, nr).prop_map(move |rows| {
            let vars: Vec<String> = (0..nv).map(|i| format!("x{i}")).collect();
            let mut sys = InequalitySystem::new(vars);
            for (cs, rel, k) in rows {
                sys.push_row(cs.into_iter().map(rat_int).collect(), rel, rat_int(k))
                    .unwrap();
            }
            sys
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn projection_preserves_the_solution_set(sys in arb_system()) {
        let var = sys.variables()[0].clone();
        let projected = sys.eliminate(&var).unwrap();
        // dense rational sample over the remaining variables
        let nv = projected.variables().len();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..40 {
            let point: Vec<Rat> = (0..nv)
                .map(|_| Rat::new(rng.gen_range(-8i64..=8).into(), 4.into()))
                .collect();
            let in_projection = projected.check_point(&point).unwrap();
            let has_extension = extends(&sys, 0, &point);
            prop_assert_eq!(in_projection, has_extension,
                "projection and interval oracle disagree at {:?}", point);
        }
    }

    #[test]
    fn feasibility_verdict_is_order_independent(sys in arb_system()) {
        let names: Vec<String> = sys.variables().to_vec();
        let fwd: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let rev: Vec<&str> = names.iter().rev().map(|s| s.as_str()).collect();
        let constants_ok = |s: &InequalitySystem| {
            !s.rows().iter().any(|r| {
                r.coeffs.iter().all(|c| c.is_zero()) && r.constant > Rat::zero()
            })
        };
        let a = constants_ok(&sys.eliminate_all(&fwd).unwrap());
        let b = constants_ok(&sys.eliminate_all(&rev).unwrap());
        prop_assert_eq!(a, b);
        prop_assert_eq!(a, sys.is_feasible().unwrap().is_feasible());
    }

    #[test]
    fn witnesses_satisfy_original_systems(sys in arb_system()) {
        if let Feasibility::Feasible { witness } = sys.is_feasible().unwrap() {
            let point: Vec<Rat> = sys
                .variables()
                .iter()
                .map(|v| witness.iter().find(|(n, _)| n == v).unwrap().1.clone())
                .collect();
            prop_assert!(sys.check_point(&point).unwrap());
        }
    }
}

#[test]
fn k1_sigma_feasibility_with_witness() {
    let sys = sigma_system(1, &[r("0.2")]).unwrap();
    match sys.is_feasible().unwrap() {
        Feasibility::Feasible { witness } => {
            assert!(witness[0].1 >= r("0.8") && witness[0].1 <= rat_int(1));
        }
        Feasibility::Infeasible => panic!("K=1 system must be feasible"),
    }
}

#[test]
fn zero_epsilons_force_the_full_subset() {
    // at eps = 0 the only feasible sigma puts all mass on {1,2}
    let sys = sigma_system(2, &[Rat::zero(), Rat::zero()]).unwrap();
    match sys.is_feasible().unwrap() {
        Feasibility::Feasible { witness } => {
            for (name, v) in witness {
                if name == "s_12" {
                    assert_eq!(v, rat_int(1), "{name}");
                } else {
                    assert_eq!(v, Rat::zero(), "{name}");
                }
            }
        }
        Feasibility::Infeasible => panic!("must be feasible"),
    }
}

#[test]
fn k2_epsilon_ordered_point_is_feasible() {
    // s_1 = eps2 - eps1, s_12 = 1 - eps2, s_2 = 0 satisfies the constraints
    let sys = sigma_system(2, &[r("0.05"), r("0.15")]).unwrap();
    assert!(sys
        .check_point(&[r("0.1"), Rat::zero(), r("0.85")])
        .unwrap());
    assert!(sys.is_feasible().unwrap().is_feasible());
}

#[test]
fn nested_delta_system_is_feasible_at_the_nested_point() {
    // sigma given by the sorted epsilon differences funds the nested
    // families; the witness must satisfy the original system
    let eps = [r("0.15"), r("0.10"), r("0.05")];
    let sys = delta_split_system(3, &eps).unwrap();
    // fix sigma variables to the nested masses by adding equality rows
    let mut pinned = sys.clone();
    let masses = [
        ("s_123", r("0.85")),
        ("s_23", r("0.05")),
        ("s_3", r("0.05")),
    ];
    for v in sys.variables().iter().filter(|v| v.starts_with("s_")) {
        let val = masses
            .iter()
            .find(|(n, _)| n == v)
            .map(|(_, x)| x.clone())
            .unwrap_or_else(Rat::zero);
        let coeffs: Vec<Rat> = sys
            .variables()
            .iter()
            .map(|w| if w == v { rat_int(1) } else { Rat::zero() })
            .collect();
        pinned.push_row(coeffs, Relation::Eq, val).unwrap();
    }
    match pinned.is_feasible().unwrap() {
        Feasibility::Feasible { witness } => {
            let point: Vec<Rat> = pinned
                .variables()
                .iter()
                .map(|v| witness.iter().find(|(n, _)| n == v).unwrap().1.clone())
                .collect();
            assert!(pinned.check_point(&point).unwrap());
        }
        Feasibility::Infeasible => panic!("nested sigma must fund the families"),
    }
}

#[test]
fn k3_delta_projection_matches_reduced_conditions_on_samples() {
    // smaller-sample version of the acceptance reproduction, different eps
    let eps = [r("0.2"), r("0.1"), r("0.05")];
    let full = delta_split_system(3, &eps).unwrap();
    let dvars: Vec<String> = full
        .variables()
        .iter()
        .filter(|v| v.starts_with("d_"))
        .cloned()
        .collect();
    let dnames: Vec<&str> = dvars.iter().map(|s| s.as_str()).collect();
    let projected = full.eliminate_all_greedy(&dnames).unwrap();
    let reduced = k3_reduced_conditions(&eps).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..800 {
        let nums: Vec<i64> = (0..7).map(|_| rng.gen_range(0..=16)).collect();
        assert_eq!(
            projected.check_point_scaled(&nums, 16).unwrap(),
            reduced.check_point_scaled(&nums, 16).unwrap(),
            "disagree at {nums:?}"
        );
    }
}

#[test]
fn two_hop_split_system_reduces_to_pairwise_conditions() {
    // the five splitting variables project onto exactly the two pairwise
    // coverage conditions (eps1 < eps2)
    let (e1, e2) = (r("0.05"), r("0.15"));
    let one = rat_int(1);
    let vars = ["s_1", "s_2", "s_12", "a1", "a12", "b1", "b12", "c12"];
    let mut sys = InequalitySystem::new(vars.iter().map(|s| s.to_string()).collect());
    let row = |names: &[(&str, i64)]| -> Vec<Rat> {
        vars.iter()
            .map(|v| {
                names
                    .iter()
                    .find(|(n, _)| n == v)
                    .map(|(_, c)| rat_int(*c))
                    .unwrap_or_else(Rat::zero)
            })
            .collect()
    };
    for v in &vars {
        sys.push_row(row(&[(v, 1)]), Relation::Ge, Rat::zero())
            .unwrap();
    }
    sys.push_row(
        row(&[("a1", 1), ("a12", 1), ("s_1", -1)]),
        Relation::Le,
        Rat::zero(),
    )
    .unwrap();
    sys.push_row(
        row(&[("b1", 1), ("b12", 1), ("s_12", -1)]),
        Relation::Le,
        Rat::zero(),
    )
    .unwrap();
    sys.push_row(row(&[("c12", 1), ("s_2", -1)]), Relation::Le, Rat::zero())
        .unwrap();
    sys.push_row(
        row(&[("a12", 1), ("b12", 1)]),
        Relation::Eq,
        one.clone() - e2.clone(),
    )
    .unwrap();
    sys.push_row(
        row(&[("b12", 1), ("c12", 1)]),
        Relation::Eq,
        one.clone() - e2.clone(),
    )
    .unwrap();
    sys.push_row(
        row(&[("a1", 1), ("b1", 1)]),
        Relation::Eq,
        e2.clone() - e1.clone(),
    )
    .unwrap();

    let projected = sys
        .eliminate_all_greedy(&["a1", "a12", "b1", "b12", "c12"])
        .unwrap();

    // expected: sigma >= 0, s_1 + s_12 >= 1 - e1, s_2 + s_12 >= 1 - e2
    let mut expect = InequalitySystem::new(vec![
        "s_1".to_string(),
        "s_2".to_string(),
        "s_12".to_string(),
    ]);
    let e = |a: i64, b: i64, c: i64| vec![rat_int(a), rat_int(b), rat_int(c)];
    expect
        .push_row(e(1, 0, 0), Relation::Ge, Rat::zero())
        .unwrap();
    expect
        .push_row(e(0, 1, 0), Relation::Ge, Rat::zero())
        .unwrap();
    expect
        .push_row(e(0, 0, 1), Relation::Ge, Rat::zero())
        .unwrap();
    expect
        .push_row(e(1, 0, 1), Relation::Ge, one.clone() - e1)
        .unwrap();
    expect.push_row(e(0, 1, 1), Relation::Ge, one - e2).unwrap();

    let sigma_idx: Vec<usize> = ["s_1", "s_2", "s_12"]
        .iter()
        .map(|v| projected.variables().iter().position(|w| w == v).unwrap())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..2000 {
        let vals: Vec<i64> = (0..3).map(|_| rng.gen_range(0..=20)).collect();
        let mut nums = vec![0i64; projected.variables().len()];
        for (slot, &v) in sigma_idx.iter().zip(&vals) {
            nums[*slot] = v;
        }
        assert_eq!(
            projected.check_point_scaled(&nums, 20).unwrap(),
            expect.check_point_scaled(&vals, 20).unwrap(),
            "disagree at {vals:?}"
        );
    }
}

#[test]
fn blowup_guard_names_the_cap() {
    // a dense random-ish system wide enough to trip the cap quickly
    let nv = 16;
    let vars: Vec<String> = (0..nv).map(|i| format!("x{i}")).collect();
    let mut sys = InequalitySystem::new(vars.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..700 {
        let coeffs: Vec<Rat> = (0..nv).map(|_| rat_int(rng.gen_range(-3i64..=3))).collect();
        sys.push_row(coeffs, Relation::Ge, rat_int(rng.gen_range(-2i64..=2)))
            .unwrap();
    }
    let names: Vec<&str> = vars.iter().map(|s| s.as_str()).collect();
    match sys.eliminate_all(&names) {
        Err(exporegion::Error::RowBlowup { cap, .. }) => assert_eq!(cap, 100_000),
        Ok(_) => (), // dominance may keep it small; nothing to assert then
        Err(other) => panic!("unexpected error {other}"),
    }
}
