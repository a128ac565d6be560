//! The numeric reproduction gate: ten checks covering the mutual
//! informations of the canonical two-hop binary example, the eta solver
//! against its brute-force oracle, the three frontier-shape
//! reproductions, cross-evaluator equivalences, the mass-shifting property,
//! the K=3 elimination reproduction, and the Monte-Carlo simulator.
//!
//! Each check returns a [`CriterionOutcome`]; the CLI `check` command and
//! the `acceptance` integration-test target both drive these functions and
//! print one pass/fail line per criterion.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::eta_solver::{eta_curve, eta_eval, eta_oracle, SolverConfig};
use crate::exponent_regions::{
    expected_rate_frontier_k2, general_region_frontier, nested_frontier, nested_plan,
    region_contains, Allocation, FrontierPoint, GeneralScanConfig, Instance, RegionContext,
    RegionFrontier,
};
use crate::linear_feasibility::{delta_split_system, k3_reduced_conditions, parse_decimal, Rat};
use crate::multiplex_calculus::{simulate, MultiplexPlan};
use crate::source_model::{dsbs, make_dsbs_example, MarkovChainSource};
use crate::subset::SubsetMask;

#[derive(Debug, Clone)]
pub struct CriterionOutcome {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub details: String,
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        format!(
            "criterion {:2} {:<28} {}  {}",
            self.id,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.details
        )
    }
}

struct Check {
    passed: bool,
    notes: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Check {
            passed: true,
            notes: Vec::new(),
        }
    }

    fn close(&mut self, label: &str, got: f64, want: f64, tol: f64) {
        let ok = (got - want).abs() <= tol;
        if !ok {
            self.passed = false;
        }
        self.notes.push(format!(
            "{label}={got:.6}{}",
            if ok {
                String::new()
            } else {
                format!(" (want {want:.6}±{tol})")
            }
        ));
    }

    fn is_true(&mut self, label: &str, ok: bool) {
        if !ok {
            self.passed = false;
        }
        self.notes
            .push(format!("{label}={}", if ok { "ok" } else { "VIOLATED" }));
    }

    fn runtime(&mut self, started: Instant, budget_s: f64) {
        let secs = started.elapsed().as_secs_f64();
        if secs > budget_s {
            self.passed = false;
        }
        self.notes.push(format!("{secs:.1}s/{budget_s:.0}s"));
    }

    fn outcome(self, id: usize, name: &'static str) -> CriterionOutcome {
        CriterionOutcome {
            id,
            name,
            passed: self.passed,
            details: self.notes.join("; "),
        }
    }
}

/// Run every criterion in order.
pub fn run_all() -> Vec<CriterionOutcome> {
    vec![
        criterion_1_mutual_informations(),
        criterion_2_eta_values(),
        criterion_3_frontier_low_high(),
        criterion_4_frontier_high_low(),
        criterion_5_containment(),
        criterion_6_property_suite(),
        criterion_7_cross_evaluators(),
        criterion_8_mass_shifting(),
        criterion_9_fme_reproduction(),
        criterion_10_simulator(),
    ]
}

fn two_hop_context() -> (MarkovChainSource, RegionContext) {
    let source = make_dsbs_example();
    let ctx = RegionContext::new(&source, &SolverConfig::default()).expect("solver runs");
    (source, ctx)
}

pub fn criterion_1_mutual_informations() -> CriterionOutcome {
    let started = Instant::now();
    let mut c = Check::new();
    let src = make_dsbs_example();
    c.close(
        "I(Y0;Y1)",
        src.link_mutual_information(1).unwrap(),
        0.26766,
        1e-4,
    );
    c.close(
        "I(Y1;Y2)",
        src.link_mutual_information(2).unwrap(),
        0.27433,
        1e-4,
    );
    c.runtime(started, 1.0);
    c.outcome(1, "mutual informations")
}

pub fn criterion_2_eta_values() -> CriterionOutcome {
    let started = Instant::now();
    let mut c = Check::new();
    let src = make_dsbs_example();
    let cfg = SolverConfig::default();
    let r95 = 0.5 / 0.95;
    let r85 = 0.5 / 0.85;
    c.close(
        "eta1(0.52632)",
        eta_eval(&src, 1, r95, &cfg).unwrap(),
        0.169743,
        2e-3,
    );
    c.close(
        "eta1(0.58824)",
        eta_eval(&src, 1, r85, &cfg).unwrap(),
        0.186760,
        2e-3,
    );
    c.close(
        "eta2(0.52632)",
        eta_eval(&src, 2, r95, &cfg).unwrap(),
        0.171143,
        2e-3,
    );
    c.runtime(started, 30.0);
    c.outcome(2, "eta point values")
}

pub fn criterion_3_frontier_low_high() -> CriterionOutcome {
    let mut c = Check::new();
    let (source, ctx) = two_hop_context();
    let inst = Instance::new(source, vec![0.5, 0.5], vec![0.05, 0.15]).unwrap();
    let f = expected_rate_frontier_k2(&inst, &ctx, 64).unwrap();

    let intercept = f.max_theta(2).unwrap_or(0.0);
    c.close("theta2-intercept", intercept, 0.375149, 3e-3);

    let end = f.points.last().unwrap();
    c.close("theta1-max", end.thetas[0], 0.169743, 3e-3);
    c.close("theta2-at-theta1-max", end.thetas[1], 0.358133, 3e-3);

    let nonincreasing = f
        .points
        .windows(2)
        .all(|w| w[1].thetas[1] <= w[0].thetas[1] + 1e-12);
    c.is_true("nonincreasing", nonincreasing);

    // sub-optimal single-rate choice: both first-link rates R1/(1-eps1)
    let corner = [
        ctx.eta(1, 0.5 / 0.95),
        ctx.eta(1, 0.5 / 0.95) + ctx.eta(2, 0.5 / 0.85),
    ];
    c.is_true("dominates-single-rate", f.dominates(&corner, 3e-3));
    c.outcome(3, "frontier (eps1 < eps2)")
}

pub fn criterion_4_frontier_high_low() -> CriterionOutcome {
    let mut c = Check::new();
    let (source, ctx) = two_hop_context();
    let inst = Instance::new(source, vec![0.5, 0.5], vec![0.15, 0.05]).unwrap();
    let f = expected_rate_frontier_k2(&inst, &ctx, 64).unwrap();

    let flat = f.max_theta(2).unwrap_or(0.0);
    c.close("flat-top", flat, 0.340886, 3e-3);
    // the top stays flat through theta1 = 0.169743
    let at_corner = f.max_theta_given(2, 1, 0.169743, 3e-3).unwrap_or(0.0);
    c.close("flat-top-through-0.169743", at_corner, 0.340886, 3e-3);

    let end = f.points.last().unwrap();
    c.close("theta1-max", end.thetas[0], 0.186760, 3e-3);
    c.close("theta2-endpoint", end.thetas[1], 0.272352, 3e-3);

    // rate-sharing on the first link only: one common second-link rate
    let eta2_boost = ctx.eta(2, 0.5 / 0.95);
    let mut sub = Vec::new();
    for i in 0..=32 {
        let r121 = 0.5 / 0.95 + (0.5 / 0.85 - 0.5 / 0.95) * i as f64 / 32.0;
        let r21 = ((0.5 - 0.85 * r121) / 0.10).clamp(0.0, ctx.rate_cap(1));
        sub.push(FrontierPoint::new(vec![
            ctx.eta(1, r121),
            ctx.eta(1, r121).min(ctx.eta(1, r21)) + eta2_boost,
        ]));
    }
    let sub = RegionFrontier::new(2, sub);
    c.is_true(
        "dominates-first-link-sharing",
        region_contains(&f, &sub, 3e-3).unwrap(),
    );

    let rect = [
        ctx.eta(1, 0.5 / 0.95),
        ctx.eta(1, 0.5 / 0.95) + ctx.eta(2, 0.5 / 0.95),
    ];
    c.is_true("dominates-boosted-rectangle", f.dominates(&rect, 3e-3));
    c.outcome(4, "frontier (eps1 > eps2)")
}

pub fn criterion_5_containment() -> CriterionOutcome {
    let mut c = Check::new();
    let (source, ctx) = two_hop_context();
    let wide = Instance::new(source.clone(), vec![0.5, 0.5], vec![0.15, 0.05]).unwrap();
    let skew = Instance::new(source, vec![0.25, 0.75], vec![0.15, 0.05]).unwrap();
    let fa = expected_rate_frontier_k2(&wide, &ctx, 64).unwrap();
    let fb = expected_rate_frontier_k2(&skew, &ctx, 64).unwrap();
    c.is_true(
        "skew-inside-symmetric",
        region_contains(&fa, &fb, 3e-3).unwrap(),
    );
    c.outcome(5, "region containment")
}

pub fn criterion_6_property_suite() -> CriterionOutcome {
    let started = Instant::now();
    let mut c = Check::new();
    let cfg = SolverConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(600);
    for case in 0..5 {
        let p0 = 0.15 + 0.7 * rng.gen::<f64>();
        let flip = |r: &mut ChaCha8Rng| {
            let f = 0.05 + 0.37 * r.gen::<f64>();
            if r.gen::<bool>() {
                f
            } else {
                1.0 - f
            }
        };
        let src = dsbs(p0, &[flip(&mut rng), flip(&mut rng)]).unwrap();
        for l in 1..=2usize {
            let h = src.marginal(l - 1).unwrap().entropy();
            let sat = src.link_mutual_information(l).unwrap();
            let grid: Vec<f64> = (0..9).map(|i| h * i as f64 / 8.0).collect();
            let curve = eta_curve(&src, l, &grid, &cfg).unwrap();
            let zero_ok = curve.samples[0].1.abs() < 1e-12;
            let mono_ok = curve.samples.windows(2).all(|w| w[1].1 >= w[0].1 - 1e-6);
            let concave_ok = curve.samples.windows(3).all(|w| {
                let mid = 0.5 * (w[0].1 + w[2].1);
                w[1].1 >= mid - 1e-6
            });
            let sat_ok = (eta_eval(&src, l, h + 0.5, &cfg).unwrap() - sat).abs() < 1e-9;
            c.is_true(
                &format!("case{case}-l{l}-curve-contract"),
                zero_ok && mono_ok && concave_ok && sat_ok,
            );

            // oracle agreement at an interior rate
            let r = 0.45 * h;
            let solver = eta_eval(&src, l, r, &cfg).unwrap();
            let oracle = eta_oracle(&src, l, r, 400, 2).unwrap();
            c.close(
                &format!("case{case}-l{l}-oracle-gap"),
                solver - oracle,
                0.0,
                1e-3,
            );
        }
    }
    c.runtime(started, 120.0);
    c.outcome(6, "eta curve property suite")
}

fn subsample(f: &RegionFrontier, n: usize) -> RegionFrontier {
    if f.points.len() <= n {
        return f.clone();
    }
    let step = (f.points.len() - 1) as f64 / (n - 1) as f64;
    let points = (0..n)
        .map(|i| f.points[(i as f64 * step).round() as usize].clone())
        .collect();
    RegionFrontier { k: f.k, points }
}

pub fn criterion_7_cross_evaluators() -> CriterionOutcome {
    let mut c = Check::new();
    // K = 2: the grid evaluator against the closed-form scan
    let (source, ctx) = two_hop_context();
    let inst = Instance::new(source, vec![0.5, 0.5], vec![0.05, 0.15]).unwrap();
    let t2 = expected_rate_frontier_k2(&inst, &ctx, 64).unwrap();
    let t3 = general_region_frontier(&inst, &ctx, &GeneralScanConfig::for_k(2)).unwrap();
    let a = region_contains(&t3, &subsample(&t2, 32), 3e-3).unwrap();
    let b = region_contains(&t2, &subsample(&t3, 32), 3e-3).unwrap();
    c.is_true("k2-grid-covers-closed-form", a);
    c.is_true("k2-closed-form-covers-grid", b);

    // K = 3: the nested parametrization against the grid evaluator
    let source3 = dsbs(0.4, &[0.8, 0.8, 0.8]).unwrap();
    let ctx3 = RegionContext::new(&source3, &SolverConfig::default()).unwrap();
    let inst3 = Instance::new(source3, vec![0.5, 0.5, 0.5], vec![0.15, 0.05, 0.10]).unwrap();
    let conj = nested_frontier(&inst3, &ctx3, 10).unwrap();
    let grid = general_region_frontier(&inst3, &ctx3, &GeneralScanConfig::for_k(3)).unwrap();
    let a3 = region_contains(&grid, &subsample(&conj, 16), 3e-3).unwrap();
    let b3 = region_contains(&conj, &subsample(&grid, 16), 3e-3).unwrap();
    c.is_true("k3-grid-covers-nested", a3);
    c.is_true("k3-nested-covers-grid", b3);
    c.outcome(7, "cross-evaluator equivalence")
}

pub fn criterion_8_mass_shifting() -> CriterionOutcome {
    let mut c = Check::new();
    let source = dsbs(0.4, &[0.8, 0.8, 0.8]).unwrap();
    let cfg = SolverConfig {
        restarts: 8,
        lambda_samples: 17,
        ..SolverConfig::default()
    };
    let ctx = RegionContext::new(&source, &cfg).unwrap();
    let inst = Instance::new(source, vec![0.5, 0.5, 0.5], vec![0.2, 0.1, 0.25]).unwrap();
    let subsets: Vec<SubsetMask> = SubsetMask::nonempty_subsets(3).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(800);
    let mut failures = 0usize;
    let mut tried = 0usize;
    while tried < 100 {
        let alloc = random_feasible_allocation(&inst, &ctx, &mut rng);
        // random nested pair
        let sup = subsets[rng.gen_range(0..subsets.len())];
        if alloc.sigma_of(sup) <= 0.0 || sup.len() < 2 {
            continue;
        }
        let subs: Vec<SubsetMask> = subsets
            .iter()
            .copied()
            .filter(|m| *m != sup && sup.is_superset_of(*m))
            .collect();
        let sub = subs[rng.gen_range(0..subs.len())];
        let max = alloc.max_mass_shift(&inst, sub, sup).unwrap();
        if max <= 1e-12 {
            continue;
        }
        tried += 1;
        let gamma = max * rng.gen::<f64>();
        let before = alloc.theta_bounds(3, &ctx);
        let shifted = alloc.mass_shift(&inst, sub, sup, gamma, &ctx).unwrap();
        let feasible = shifted.check(&inst).is_ok();
        let after = shifted.theta_bounds(3, &ctx);
        let no_drop = after.iter().zip(&before).all(|(a, b)| *a >= b - 1e-9);
        if !(feasible && no_drop) {
            failures += 1;
        }
    }
    c.is_true("100-random-shifts", failures == 0);
    c.outcome(8, "mass-shifting property")
}

fn random_feasible_allocation(
    inst: &Instance,
    ctx: &RegionContext,
    rng: &mut ChaCha8Rng,
) -> Allocation {
    let k = inst.k();
    let mut alloc = Allocation::default();
    // start from the nested masses (always feasible) and spread a random
    // share of the leftover over random subsets
    let plan = nested_plan(&inst.epsilons);
    for (mask, mass) in &plan {
        alloc.sigma.insert(*mask, *mass);
    }
    let leftover: f64 = 1.0 - plan.iter().map(|(_, m)| *m).sum::<f64>();
    let subsets: Vec<SubsetMask> = SubsetMask::nonempty_subsets(k).collect();
    let mut budget = leftover * rng.gen::<f64>();
    while budget > 1e-6 {
        let m = subsets[rng.gen_range(0..subsets.len())];
        let add = budget * rng.gen::<f64>();
        *alloc.sigma.entry(m).or_insert(0.0) += add;
        budget -= add;
    }
    // random rate shares per link
    for l in 1..=k {
        let sharers: Vec<SubsetMask> = alloc
            .sigma
            .iter()
            .filter(|(m, &s)| s > 0.0 && m.max_index() >= l)
            .map(|(m, _)| *m)
            .collect();
        let mut weights: Vec<f64> = (0..sharers.len()).map(|_| rng.gen::<f64>()).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total.max(1e-12));
        for (m, w) in sharers.iter().zip(weights) {
            let s = alloc.sigma_of(*m);
            alloc.set_rate(*m, l, (w * inst.rates[l - 1] / s).min(ctx.rate_cap(l)));
        }
        // zero-mass subsets run unconstrained
        for m in SubsetMask::nonempty_subsets(k) {
            if alloc.sigma_of(m) == 0.0 && m.max_index() >= l {
                alloc.set_rate(m, l, ctx.rate_cap(l));
            }
        }
    }
    alloc
}

pub fn criterion_9_fme_reproduction() -> CriterionOutcome {
    let started = Instant::now();
    let mut c = Check::new();
    let eps: Vec<Rat> = ["0.15", "0.10", "0.05"]
        .iter()
        .map(|s| parse_decimal(s).unwrap())
        .collect();
    let full = delta_split_system(3, &eps).unwrap();
    let dvars: Vec<String> = full
        .variables()
        .iter()
        .filter(|v| v.starts_with("d_"))
        .cloned()
        .collect();
    let dnames: Vec<&str> = dvars.iter().map(|s| s.as_str()).collect();
    let projected = match full.eliminate_all_greedy(&dnames) {
        Ok(p) => p,
        Err(e) => {
            c.is_true(&format!("elimination ({e})"), false);
            return c.outcome(9, "fme reproduction");
        }
    };
    let reduced = k3_reduced_conditions(&eps).unwrap();

    // mutual implication on sampled sigma points (exact arithmetic on
    // numerators over a common denominator of 32)
    let mut rng = ChaCha8Rng::seed_from_u64(900);
    let mut mismatches = 0usize;
    for _ in 0..10_000 {
        let nums: Vec<i64> = (0..7).map(|_| rng.gen_range(0..=32)).collect();
        let a = projected.check_point_scaled(&nums, 32).unwrap();
        let b = reduced.check_point_scaled(&nums, 32).unwrap();
        if a != b {
            mismatches += 1;
        }
    }
    c.is_true("mutually-implied-on-1e4-samples", mismatches == 0);
    c.notes
        .push(format!("projected-rows={}", projected.rows().len()));
    c.runtime(started, 10.0);
    c.outcome(9, "fme reproduction")
}

pub fn criterion_10_simulator() -> CriterionOutcome {
    let mut c = Check::new();
    let src = make_dsbs_example();
    let thetas = [0.16, 0.34];
    // margin below 1 keeps the realized mean length strictly inside the
    // budget; at margin 1 the mean sits exactly on the cap and the sampled
    // mean lands above it half the time
    let plan = MultiplexPlan::equal_epsilon(2, 0.1, &[0.5, 0.5], &thetas, 0.995).unwrap();
    let rep = simulate(&plan, &src, 10_000, 100_000, 0).unwrap();
    for kc in 0..2 {
        let within =
            (rep.alpha_hat[kc] - rep.alpha_analytic[kc]).abs() <= rep.alpha_ci_halfwidth[kc];
        c.is_true(&format!("alpha{}-within-ci", kc + 1), within);
        c.is_true(
            &format!("len{}-within-budget", kc + 1),
            rep.mean_length[kc] <= 10_000.0 * 0.5 + 2.0,
        );
    }
    c.outcome(10, "multiplex simulator")
}

pub fn all_passed(outcomes: &[CriterionOutcome]) -> bool {
    outcomes.iter().all(|o| o.passed)
}
