//! The acceptance gate: one test per criterion, each printing its pass/fail
//! line (visible with `cargo test --test acceptance -- --nocapture`).

use exporegion::acceptance::{self, CriterionOutcome};

fn run(f: fn() -> CriterionOutcome) {
    let outcome = f();
    println!("{}", outcome.line());
    assert!(outcome.passed, "{}", outcome.line());
}

#[test]
fn criterion_01_mutual_informations() {
    run(acceptance::criterion_1_mutual_informations);
}

#[test]
fn criterion_02_eta_values() {
    run(acceptance::criterion_2_eta_values);
}

#[test]
fn criterion_03_frontier_eps1_below_eps2() {
    run(acceptance::criterion_3_frontier_low_high);
}

#[test]
fn criterion_04_frontier_eps1_above_eps2() {
    run(acceptance::criterion_4_frontier_high_low);
}

#[test]
fn criterion_05_region_containment() {
    run(acceptance::criterion_5_containment);
}

#[test]
fn criterion_06_property_suite() {
    run(acceptance::criterion_6_property_suite);
}

#[test]
fn criterion_07_cross_evaluators() {
    run(acceptance::criterion_7_cross_evaluators);
}

#[test]
fn criterion_08_mass_shifting() {
    run(acceptance::criterion_8_mass_shifting);
}

#[test]
fn criterion_09_fme_reproduction() {
    run(acceptance::criterion_9_fme_reproduction);
}

#[test]
fn criterion_10_simulator() {
    run(acceptance::criterion_10_simulator);
}
