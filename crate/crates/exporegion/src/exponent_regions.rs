//! Exponents-region evaluators.
//!
//! Four views of the same object, in increasing generality:
//!
//! * max-rate K=2 rectangle: corner `(eta1(R1), eta1(R1) + eta2(R2))`,
//!   independent of the type-I budgets;
//! * max-rate K-hop hyperrectangle (vanishing type-I only):
//!   `theta_k = sum_{l<=k} eta_l(R_l)`;
//! * expected-rate K=2 frontier, split into the three epsilon cases, each a
//!   one-dimensional scan of the first-link rate split (the third case adds
//!   an inner max over the second-link split);
//! * the general sigma-allocation region for K hops, evaluated by a grid
//!   heuristic over subset masses plus the nested (K+1)-subscheme
//!   parametrization, which is exact for K <= 3.
//!
//! All evaluators read `eta` from precomputed per-link envelopes
//! ([`RegionContext`]); since the envelopes are concave and nondecreasing by
//! construction, the mass-shifting and simplification arguments that hold
//! for the true curves hold verbatim for the computed ones.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::eta_solver::{EtaEnvelope, SolverConfig};
use crate::source_model::MarkovChainSource;
use crate::subset::SubsetMask;
use crate::{Error, Result};

const FEAS_TOL: f64 = 1e-9;

/// A problem instance: source, per-link expected-rate budgets, per-center
/// type-I error budgets.
#[derive(Debug, Clone)]
pub struct Instance {
    pub source: MarkovChainSource,
    pub rates: Vec<f64>,
    pub epsilons: Vec<f64>,
}

impl Instance {
    pub fn new(source: MarkovChainSource, rates: Vec<f64>, epsilons: Vec<f64>) -> Result<Self> {
        let k = source.k_hops();
        if rates.len() != k || epsilons.len() != k {
            return Err(Error::InvalidArgument(format!(
                "need {k} rates and {k} epsilons, got {} and {}",
                rates.len(),
                epsilons.len()
            )));
        }
        if rates.iter().any(|&r| r < 0.0 || !r.is_finite()) {
            return Err(Error::InvalidArgument("rates must be nonnegative".into()));
        }
        if epsilons.iter().any(|&e| !(0.0..1.0).contains(&e)) {
            return Err(Error::InvalidArgument("epsilons must lie in [0,1)".into()));
        }
        Ok(Instance {
            source,
            rates,
            epsilons,
        })
    }

    pub fn k(&self) -> usize {
        self.rates.len()
    }
}

/// Precomputed per-link eta envelopes for one source.
#[derive(Debug, Clone)]
pub struct RegionContext {
    envelopes: Vec<EtaEnvelope>,
}

impl RegionContext {
    pub fn new(source: &MarkovChainSource, cfg: &SolverConfig) -> Result<Self> {
        let envelopes = (1..=source.k_hops())
            .map(|l| EtaEnvelope::solve(source, l, cfg))
            .collect::<Result<Vec<_>>>()?;
        Ok(RegionContext { envelopes })
    }

    pub fn k(&self) -> usize {
        self.envelopes.len()
    }

    /// `eta_l(r)`, `1 <= l <= K`.
    pub fn eta(&self, l: usize, r: f64) -> f64 {
        self.envelopes[l - 1].eval(r)
    }

    /// Rate beyond which `eta_l` is flat; stands in for an infinite rate.
    pub fn rate_cap(&self, l: usize) -> f64 {
        self.envelopes[l - 1].saturation_rate
    }

    pub fn saturation_value(&self, l: usize) -> f64 {
        self.envelopes[l - 1].saturation_value
    }

    pub fn envelope(&self, l: usize) -> &EtaEnvelope {
        &self.envelopes[l - 1]
    }
}

// ---------------------------------------------------------------------------
// allocations (Theorem-3 witnesses)
// ---------------------------------------------------------------------------

/// A sigma/rate allocation witnessing a point of the general region: cell
/// probabilities per nonempty subset of centers, and per-(subset, link)
/// rates for links up to the subset's largest member.
///
/// Subsets absent from `sigma` (or with zero mass) are understood to run at
/// unconstrained rate — their exponent sums saturate and never bind; a
/// subset with positive mass and a missing rate entry contributes rate 0 on
/// that link.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(try_from = "AllocationWire", into = "AllocationWire")]
pub struct Allocation {
    pub sigma: BTreeMap<SubsetMask, f64>,
    pub rates: BTreeMap<(SubsetMask, usize), f64>,
}

/// JSON shape: `{"sigma": {"12": 0.85}, "rates": {"12": {"1": 0.58, "2": 0.58}}}`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct AllocationWire {
    #[serde(default)]
    sigma: BTreeMap<String, f64>,
    #[serde(default)]
    rates: BTreeMap<String, BTreeMap<String, f64>>,
}

impl From<Allocation> for AllocationWire {
    fn from(a: Allocation) -> Self {
        let sigma = a.sigma.iter().map(|(m, &v)| (m.label(), v)).collect();
        let mut rates: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
        for (&(m, l), &r) in &a.rates {
            rates.entry(m.label()).or_default().insert(l.to_string(), r);
        }
        AllocationWire { sigma, rates }
    }
}

impl TryFrom<AllocationWire> for Allocation {
    type Error = Error;

    fn try_from(w: AllocationWire) -> Result<Self> {
        let mut out = Allocation::default();
        for (label, v) in w.sigma {
            out.sigma.insert(SubsetMask::parse_label(&label)?, v);
        }
        for (label, links) in w.rates {
            let mask = SubsetMask::parse_label(&label)?;
            for (l, r) in links {
                let l: usize = l
                    .parse()
                    .map_err(|_| Error::SpecError(format!("bad link index `{l}`")))?;
                out.rates.insert((mask, l), r);
            }
        }
        Ok(out)
    }
}

impl Allocation {
    pub fn sigma_of(&self, m: SubsetMask) -> f64 {
        self.sigma.get(&m).copied().unwrap_or(0.0)
    }

    pub fn rate_of(&self, m: SubsetMask, l: usize, ctx: &RegionContext) -> f64 {
        match self.rates.get(&(m, l)) {
            Some(&r) => r,
            None => {
                if self.sigma_of(m) > 0.0 {
                    0.0
                } else {
                    ctx.rate_cap(l)
                }
            }
        }
    }

    pub fn set_rate(&mut self, m: SubsetMask, l: usize, r: f64) {
        self.rates.insert((m, l), r);
    }

    /// All allocation invariants: mass at most 1, the per-subset type-I
    /// constraints, and the per-link rate budgets, within `FEAS_TOL`.
    pub fn check(&self, instance: &Instance) -> std::result::Result<(), String> {
        let k = instance.k();
        if self.sigma.values().any(|&s| s < -FEAS_TOL) {
            return Err("negative sigma".into());
        }
        if self.sigma.keys().any(|m| m.is_empty() || m.max_index() > k) {
            return Err("sigma subset out of range".into());
        }
        if self
            .rates
            .keys()
            .any(|(m, l)| *l == 0 || *l > m.max_index())
        {
            return Err("rate link index above subset maximum".into());
        }
        let total: f64 = self.sigma.values().sum();
        if total > 1.0 + FEAS_TOL {
            return Err(format!("sigma sums to {total} > 1"));
        }
        for s in SubsetMask::nonempty_subsets(k) {
            let bound = 1.0 - s.indices().map(|c| instance.epsilons[c - 1]).sum::<f64>();
            if bound <= 0.0 {
                continue;
            }
            let mass: f64 = self
                .sigma
                .iter()
                .filter(|(m, _)| m.is_superset_of(s))
                .map(|(_, &v)| v)
                .sum();
            if mass < bound - FEAS_TOL {
                return Err(format!("subset {s} holds mass {mass:.9}, needs {bound:.9}"));
            }
        }
        for l in 1..=k {
            let used: f64 = self
                .sigma
                .iter()
                .filter(|(m, _)| m.max_index() >= l)
                .map(|(m, &sig)| sig * self.rates.get(&(*m, l)).copied().unwrap_or(0.0))
                .sum();
            if used > instance.rates[l - 1] + FEAS_TOL {
                return Err(format!(
                    "link {l} budget {:.9} exceeded by {used:.9}",
                    instance.rates[l - 1]
                ));
            }
        }
        Ok(())
    }

    /// The exponent bounds `theta_k = min_{I : k in I} sum_{l<=k} eta_l(R_{I,l})`.
    pub fn theta_bounds(&self, k: usize, ctx: &RegionContext) -> Vec<f64> {
        (1..=k)
            .map(|center| {
                SubsetMask::nonempty_subsets(k)
                    .filter(|m| m.contains(center))
                    .map(|m| {
                        (1..=center)
                            .map(|l| ctx.eta(l, self.rate_of(m, l, ctx)))
                            .sum::<f64>()
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    /// Largest mass that may move from `sup` onto its subset `sub` while the
    /// slack conditions stay satisfied.
    pub fn max_mass_shift(
        &self,
        instance: &Instance,
        sub: SubsetMask,
        sup: SubsetMask,
    ) -> Result<f64> {
        if !sup.is_superset_of(sub) || sub.is_empty() {
            return Err(Error::InvalidArgument(
                "shift requires a nonempty subset pair sub <= sup".into(),
            ));
        }
        let k = instance.k();
        let mut gamma: f64 = self.sigma_of(sup);
        for s in SubsetMask::nonempty_subsets(k) {
            if !sup.is_superset_of(s) || sub.is_superset_of(s) {
                continue;
            }
            let bound = 1.0 - s.indices().map(|c| instance.epsilons[c - 1]).sum::<f64>();
            let mass: f64 = self
                .sigma
                .iter()
                .filter(|(m, _)| m.is_superset_of(s))
                .map(|(_, &v)| v)
                .sum();
            gamma = gamma.min(mass - bound.max(0.0));
        }
        Ok(gamma.max(0.0))
    }

    /// Move mass `gamma` from `sup` onto `sub`, mixing the rates so that all
    /// constraints and exponent bounds are preserved.
    pub fn mass_shift(
        &self,
        instance: &Instance,
        sub: SubsetMask,
        sup: SubsetMask,
        gamma: f64,
        ctx: &RegionContext,
    ) -> Result<Allocation> {
        if gamma < 0.0 || gamma > self.sigma_of(sup) + FEAS_TOL {
            return Err(Error::InvalidArgument(format!(
                "gamma {gamma} outside [0, sigma_sup]"
            )));
        }
        let max = self.max_mass_shift(instance, sub, sup)?;
        if gamma > max + FEAS_TOL {
            return Err(Error::InvalidArgument(format!(
                "gamma {gamma} exceeds admissible shift {max}"
            )));
        }
        let mut out = self.clone();
        let old_sub = self.sigma_of(sub);
        let new_sub = old_sub + gamma;
        out.sigma.insert(sub, new_sub);
        out.sigma.insert(sup, (self.sigma_of(sup) - gamma).max(0.0));
        if new_sub > 0.0 {
            for l in 1..=sub.max_index() {
                let mixed = (old_sub * self.rate_of(sub, l, ctx)
                    + gamma * self.rate_of(sup, l, ctx))
                    / new_sub;
                out.set_rate(sub, l, mixed);
            }
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// frontiers
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub thetas: Vec<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
}

impl FrontierPoint {
    pub fn new(thetas: Vec<f64>) -> Self {
        FrontierPoint {
            thetas,
            params: BTreeMap::new(),
        }
    }

    pub fn with_params(thetas: Vec<f64>, params: BTreeMap<String, f64>) -> Self {
        FrontierPoint { thetas, params }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionFrontier {
    pub k: usize,
    pub points: Vec<FrontierPoint>,
}

impl RegionFrontier {
    pub fn new(k: usize, points: Vec<FrontierPoint>) -> Self {
        let mut points = pareto_filter(points);
        sort_frontier(&mut points);
        RegionFrontier { k, points }
    }

    /// True when some frontier point dominates `theta` within `tol`.
    pub fn dominates(&self, theta: &[f64], tol: f64) -> bool {
        self.points
            .iter()
            .any(|p| p.thetas.iter().zip(theta).all(|(a, b)| *a >= *b - tol))
    }

    /// Largest `theta_j` over the frontier subject to `theta_i >= floor - tol`.
    pub fn max_theta_given(&self, j: usize, i: usize, floor: f64, tol: f64) -> Option<f64> {
        self.points
            .iter()
            .filter(|p| p.thetas[i - 1] >= floor - tol)
            .map(|p| p.thetas[j - 1])
            .max_by(f64::total_cmp)
    }

    pub fn max_theta(&self, j: usize) -> Option<f64> {
        self.points
            .iter()
            .map(|p| p.thetas[j - 1])
            .max_by(f64::total_cmp)
    }
}

fn dominates_strict(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y) && a.iter().zip(b).any(|(x, y)| x > y)
}

/// Keep the points not componentwise dominated by any other (duplicates
/// collapse to one).
pub fn pareto_filter(points: Vec<FrontierPoint>) -> Vec<FrontierPoint> {
    let mut sorted = points;
    // descending by theta_1 then the rest; ties keep first
    sorted.sort_by(|a, b| {
        b.thetas
            .iter()
            .zip(&a.thetas)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| *o != std::cmp::Ordering::Equal)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut kept: Vec<FrontierPoint> = Vec::new();
    for p in sorted {
        if kept
            .iter()
            .any(|q| q.thetas == p.thetas || dominates_strict(&q.thetas, &p.thetas))
        {
            continue;
        }
        kept.push(p);
    }
    kept
}

fn sort_frontier(points: &mut [FrontierPoint]) {
    points.sort_by(|a, b| {
        a.thetas
            .iter()
            .zip(&b.thetas)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| *o != std::cmp::Ordering::Equal)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
}

/// Every point of `b` dominated (within `tol`) by some point of `a`.
pub fn region_contains(a: &RegionFrontier, b: &RegionFrontier, tol: f64) -> Result<bool> {
    if a.k != b.k {
        return Err(Error::InvalidArgument(format!(
            "mismatched dimensions {} vs {}",
            a.k, b.k
        )));
    }
    Ok(b.points.iter().all(|p| a.dominates(&p.thetas, tol)))
}

// ---------------------------------------------------------------------------
// max-rate regions
// ---------------------------------------------------------------------------

/// Corner of the two-hop max-rate rectangle (independent of the epsilons).
pub fn max_rate_region_k2(instance: &Instance, ctx: &RegionContext) -> Result<(f64, f64)> {
    if instance.k() != 2 {
        return Err(Error::InvalidArgument(format!(
            "K = {}, need 2",
            instance.k()
        )));
    }
    let t1 = ctx.eta(1, instance.rates[0]);
    let t2 = t1 + ctx.eta(2, instance.rates[1]);
    Ok((t1, t2))
}

/// Corner of the K-hop max-rate hyperrectangle; proven only for vanishing
/// type-I errors, so nonzero epsilons are rejected.
pub fn max_rate_region_khop(instance: &Instance, ctx: &RegionContext) -> Result<Vec<f64>> {
    if instance.epsilons.iter().any(|&e| e != 0.0) {
        return Err(Error::InvalidArgument(
            "max-rate K-hop corner requires all epsilons = 0".into(),
        ));
    }
    let mut acc = 0.0;
    Ok((1..=instance.k())
        .map(|l| {
            acc += ctx.eta(l, instance.rates[l - 1]);
            acc
        })
        .collect())
}

/// Largest exponent achievable at center `k` in isolation:
/// `sum_{l<=k} eta_l(R_l / (1 - eps_k))`.
pub fn theta_max(instance: &Instance, ctx: &RegionContext, k: usize) -> Result<f64> {
    if k == 0 || k > instance.k() {
        return Err(Error::IndexOutOfRange(format!(
            "center {k} outside 1..={}",
            instance.k()
        )));
    }
    let denom = 1.0 - instance.epsilons[k - 1];
    Ok((1..=k)
        .map(|l| ctx.eta(l, instance.rates[l - 1] / denom))
        .sum())
}

// ---------------------------------------------------------------------------
// expected-rate frontier, K = 2
// ---------------------------------------------------------------------------

/// The two-hop expected-rate Pareto frontier; the shape depends on the
/// ordering of the two type-I budgets.
pub fn expected_rate_frontier_k2(
    instance: &Instance,
    ctx: &RegionContext,
    n_samples: usize,
) -> Result<RegionFrontier> {
    if instance.k() != 2 {
        return Err(Error::InvalidArgument(format!(
            "K = {}, need 2",
            instance.k()
        )));
    }
    let n = n_samples.max(2);
    let (r1, r2) = (instance.rates[0], instance.rates[1]);
    let (e1, e2) = (instance.epsilons[0], instance.epsilons[1]);
    let cap1 = ctx.rate_cap(1);

    let mut points: Vec<FrontierPoint> = Vec::new();
    if e1 == e2 {
        // rectangle corner with both links boosted by (1-eps)^-1
        let b1 = r1 / (1.0 - e1);
        let b2 = r2 / (1.0 - e1);
        let t1 = ctx.eta(1, b1);
        let t2 = t1 + ctx.eta(2, b2);
        let mut params = BTreeMap::new();
        params.insert("R_12_1".into(), b1);
        params.insert("R_12_2".into(), b2);
        points.push(FrontierPoint::with_params(vec![t1, t2], params));
    } else if e1 < e2 {
        // scan the first-link rate of the both-centers subscheme; the
        // leftover budget funds the center-1-only subscheme
        let lo = r1 / (1.0 - e1);
        let hi = r1 / (1.0 - e2);
        let eta2_boosted = ctx.eta(2, r2 / (1.0 - e2));
        for r121 in scan_grid(lo, hi, n) {
            let r11 = ((r1 - (1.0 - e2) * r121) / (e2 - e1)).clamp(0.0, cap1);
            let t1 = ctx.eta(1, r11).min(ctx.eta(1, r121));
            let t2 = ctx.eta(1, r121) + eta2_boosted;
            let mut params = BTreeMap::new();
            params.insert("R_12_1".into(), r121);
            params.insert("R_1_1".into(), r11);
            points.push(FrontierPoint::with_params(vec![t1, t2], params));
        }
    } else {
        // scan the first-link rate of the both-centers subscheme; the
        // leftover funds the center-2-only subscheme, and the second link
        // splits between the two subschemes by an inner max-min
        let lo = r1 / (1.0 - e2);
        let hi = r1 / (1.0 - e1);
        for r121 in scan_grid(lo, hi, n) {
            let r21 = ((r1 - (1.0 - e1) * r121) / (e1 - e2)).clamp(0.0, cap1);
            let head12 = ctx.eta(1, r121);
            let head2 = ctx.eta(1, r21);
            let (t2, r122, r22) = split_second_link(ctx, r2, e1, e2, head12, head2);
            let mut params = BTreeMap::new();
            params.insert("R_12_1".into(), r121);
            params.insert("R_2_1".into(), r21);
            params.insert("R_12_2".into(), r122);
            params.insert("R_2_2".into(), r22);
            points.push(FrontierPoint::with_params(vec![head12, t2], params));
        }
    }
    Ok(RegionFrontier::new(2, points))
}

/// Dense grid on `[lo, hi]` plus a coarse sweep below `lo`; covers the
/// saturated regime where the closed-form endpoints are not unique.
fn scan_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut grid: Vec<f64> = (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect();
    let coarse = (n / 8).max(3);
    grid.extend((0..coarse).map(|i| lo * i as f64 / coarse as f64));
    grid
}

/// max over `(1-e1) R_{12,2} + (e1-e2) R_{2,2} <= r2` of
/// `min(head12 + eta2(R_{12,2}), head2 + eta2(R_{2,2}))`, for `e1 > e2`.
fn split_second_link(
    ctx: &RegionContext,
    r2: f64,
    e1: f64,
    e2: f64,
    head12: f64,
    head2: f64,
) -> (f64, f64, f64) {
    let hi = r2 / (1.0 - e1);
    let other = |t: f64| ((r2 - (1.0 - e1) * t) / (e1 - e2)).clamp(0.0, ctx.rate_cap(2));
    let a = |t: f64| head12 + ctx.eta(2, t);
    let b = |t: f64| head2 + ctx.eta(2, other(t));
    // a is nondecreasing, b nonincreasing: the max-min sits at an endpoint
    // or at the crossing, found by bisection
    let mut best = (f64::NEG_INFINITY, 0.0);
    let mut consider = |t: f64| {
        let v = a(t).min(b(t));
        if v > best.0 {
            best = (v, t);
        }
    };
    consider(0.0);
    consider(hi);
    for i in 0..=32 {
        consider(hi * i as f64 / 32.0);
    }
    if a(0.0) < b(0.0) && a(hi) > b(hi) {
        let (mut lo_t, mut hi_t) = (0.0, hi);
        for _ in 0..60 {
            let mid = 0.5 * (lo_t + hi_t);
            if a(mid) < b(mid) {
                lo_t = mid;
            } else {
                hi_t = mid;
            }
        }
        consider(lo_t);
        consider(hi_t);
    }
    let t = best.1;
    (best.0, t, other(t))
}

// ---------------------------------------------------------------------------
// general-K region
// ---------------------------------------------------------------------------

/// Membership test against a concrete allocation witness: all allocation
/// invariants plus `theta_k <= min_{I : k in I} sum_{l<=k} eta_l(R_{I,l})`.
pub fn general_region_feasible(
    instance: &Instance,
    ctx: &RegionContext,
    alloc: &Allocation,
    thetas: &[f64],
) -> Result<bool> {
    if thetas.len() != instance.k() {
        return Err(Error::InvalidArgument(format!(
            "{} thetas for K = {}",
            thetas.len(),
            instance.k()
        )));
    }
    if alloc.sigma.keys().any(|m| m.max_index() > instance.k()) {
        return Err(Error::IndexOutOfRange("allocation subset beyond K".into()));
    }
    if alloc.check(instance).is_err() {
        return Ok(false);
    }
    let bounds = alloc.theta_bounds(instance.k(), ctx);
    Ok(thetas.iter().zip(&bounds).all(|(t, b)| *t <= b + FEAS_TOL))
}

/// Stable descending permutation of the epsilons; `pi[0]` is the 1-based
/// index of the largest.
pub fn epsilon_permutation(epsilons: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (1..=epsilons.len()).collect();
    idx.sort_by(|&a, &b| epsilons[b - 1].total_cmp(&epsilons[a - 1]).then(a.cmp(&b)));
    idx
}

/// Nested subscheme families and their multiplexing masses:
/// `J_i = {pi(i..)}` with mass `eps_{pi(i-1)} - eps_{pi(i)}`, `eps_{pi(0)} = 1`.
pub fn nested_plan(epsilons: &[f64]) -> Vec<(SubsetMask, f64)> {
    let pi = epsilon_permutation(epsilons);
    let mut out = Vec::with_capacity(pi.len());
    let mut prev = 1.0;
    for i in 0..pi.len() {
        let mask = SubsetMask::from_indices(&pi[i..]).expect("validated indices");
        let cur = epsilons[pi[i] - 1];
        out.push((mask, prev - cur));
        prev = cur;
    }
    out
}

/// Enumerate allocations over the nested families: per link, the budget is
/// split among the active subschemes on a simplex grid; inactive subschemes
/// run at the rate cap. Returns (allocation, scan parameters).
fn nested_candidates(
    instance: &Instance,
    ctx: &RegionContext,
    n_samples: usize,
) -> Vec<(Allocation, BTreeMap<String, f64>)> {
    let k = instance.k();
    let plan = nested_plan(&instance.epsilons);
    let active: Vec<usize> = (0..k).filter(|&i| plan[i].1 > 1e-14).collect();

    // per-link sharers among active subschemes
    let sharers: Vec<Vec<usize>> = (1..=k)
        .map(|l| {
            active
                .iter()
                .copied()
                .filter(|&i| plan[i].0.max_index() >= l)
                .collect()
        })
        .collect();

    // choose a per-link resolution so that the combination count stays sane
    let mut res = n_samples.max(1);
    loop {
        let combos: f64 = sharers
            .iter()
            .map(|s| simplex_grid_len(res, s.len()) as f64)
            .product();
        if combos <= 250_000.0 || res <= 2 {
            break;
        }
        res -= 1;
    }

    let link_shares: Vec<Vec<Vec<f64>>> =
        sharers.iter().map(|s| simplex_grid(res, s.len())).collect();

    let mut out = Vec::new();
    let mut idx = vec![0usize; k];
    loop {
        let mut alloc = Allocation::default();
        let mut params = BTreeMap::new();
        for &(mask, mass) in &plan {
            alloc.sigma.insert(mask, mass);
            if mass <= 1e-14 {
                for l in 1..=mask.max_index() {
                    alloc.set_rate(mask, l, ctx.rate_cap(l));
                }
            }
        }
        for l in 1..=k {
            let share = &link_shares[l - 1][idx[l - 1]];
            for (pos, &i) in sharers[l - 1].iter().enumerate() {
                let (mask, mass) = plan[i];
                let r = (share[pos] * instance.rates[l - 1] / mass).min(ctx.rate_cap(l));
                alloc.set_rate(mask, l, r);
                params.insert(format!("share_l{l}_s{}", i + 1), share[pos]);
            }
        }
        out.push((alloc, params));
        // odometer over links
        let mut pos = 0;
        loop {
            if pos == k {
                return append_directed(instance, ctx, &plan, out);
            }
            idx[pos] += 1;
            if idx[pos] < link_shares[pos].len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// Add, for each center, the allocation that boosts every covering
/// subscheme to `R_l / (1 - eps_k)` on the first k links (the single-center
/// optimum), with leftover links split proportionally.
fn append_directed(
    instance: &Instance,
    ctx: &RegionContext,
    plan: &[(SubsetMask, f64)],
    mut out: Vec<(Allocation, BTreeMap<String, f64>)>,
) -> Vec<(Allocation, BTreeMap<String, f64>)> {
    let k = instance.k();
    for center in 1..=k {
        let boost = 1.0 / (1.0 - instance.epsilons[center - 1]);
        let mut alloc = Allocation::default();
        for &(mask, mass) in plan {
            alloc.sigma.insert(mask, mass);
        }
        for l in 1..=k {
            for &(mask, mass) in plan {
                if mask.max_index() < l {
                    continue;
                }
                if mass <= 1e-14 {
                    alloc.set_rate(mask, l, ctx.rate_cap(l));
                } else if l <= center && mask.contains(center) {
                    alloc.set_rate(
                        mask,
                        l,
                        (instance.rates[l - 1] * boost).min(ctx.rate_cap(l)),
                    );
                } else if l <= center {
                    alloc.set_rate(mask, l, 0.0);
                } else {
                    // links beyond the favored center: spread uniformly
                    let sharers_mass: f64 = plan
                        .iter()
                        .filter(|(m, s)| *s > 1e-14 && m.max_index() >= l)
                        .map(|(_, s)| s)
                        .sum();
                    let r = if sharers_mass > 0.0 {
                        (instance.rates[l - 1] / sharers_mass).min(ctx.rate_cap(l))
                    } else {
                        ctx.rate_cap(l)
                    };
                    alloc.set_rate(mask, l, r);
                }
            }
        }
        let mut params = BTreeMap::new();
        params.insert("favored_center".into(), center as f64);
        out.push((alloc, params));
    }
    out
}

fn simplex_grid_len(res: usize, dims: usize) -> usize {
    match dims {
        0 | 1 => 1,
        _ => {
            // C(res + dims - 1, dims - 1)
            let mut acc = 1usize;
            for i in 1..dims {
                acc = acc.saturating_mul(res + i) / i;
            }
            acc
        }
    }
}

/// All nonnegative share vectors of length `dims` summing to one on a grid
/// with `res` steps, in a deterministic order.
fn simplex_grid(res: usize, dims: usize) -> Vec<Vec<f64>> {
    match dims {
        0 => vec![vec![]],
        1 => vec![vec![1.0]],
        _ => {
            let mut counts = Vec::new();
            let mut prefix = Vec::new();
            compositions_exact(dims, res, &mut prefix, &mut counts);
            counts
                .into_iter()
                .map(|c| c.into_iter().map(|v| v as f64 / res as f64).collect())
                .collect()
        }
    }
}

fn compositions_exact(
    dims: usize,
    left: usize,
    prefix: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if prefix.len() == dims - 1 {
        prefix.push(left);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for c in 0..=left {
        prefix.push(c);
        compositions_exact(dims, left - c, prefix, out);
        prefix.pop();
    }
}

/// The (K+1)-subscheme simplified frontier, with ties in the epsilons
/// broken by stable index order. Exact for K <= 3; beyond that it remains
/// an achievable inner bound (believed tight, not proven here).
pub fn nested_frontier(
    instance: &Instance,
    ctx: &RegionContext,
    n_samples: usize,
) -> Result<RegionFrontier> {
    if instance.k() < 2 {
        return Err(Error::InvalidArgument("need K >= 2".into()));
    }
    let k = instance.k();
    let points = nested_candidates(instance, ctx, n_samples)
        .into_iter()
        .map(|(alloc, params)| FrontierPoint::with_params(alloc.theta_bounds(k, ctx), params))
        .collect();
    Ok(RegionFrontier::new(k, points))
}

/// Scan budget for the general-region grid search.
#[derive(Debug, Clone)]
pub struct GeneralScanConfig {
    /// sigma simplex step (1/32 for K = 2, 1/8 for K = 3 by default)
    pub sigma_step: f64,
    /// samples for the nested-family rate scan
    pub nested_samples: usize,
    /// hard cap on enumerated sigma vectors
    pub max_sigma_points: usize,
}

impl GeneralScanConfig {
    pub fn for_k(k: usize) -> Self {
        GeneralScanConfig {
            sigma_step: if k <= 2 { 1.0 / 32.0 } else { 1.0 / 8.0 },
            nested_samples: if k <= 2 { 64 } else { 10 },
            max_sigma_points: 20_000,
        }
    }
}

/// Grid-search evaluation of the general sigma-allocation region for
/// K <= 4. The search is a heuristic inner approximation: it enumerates
/// sigma vectors on a simplex grid (filtered by the type-I constraints),
/// applies a small family of rate rules plus the mass-shifting improvement,
/// and always includes the nested-family scan, which is exact for K <= 3.
pub fn general_region_frontier(
    instance: &Instance,
    ctx: &RegionContext,
    scan: &GeneralScanConfig,
) -> Result<RegionFrontier> {
    let k = instance.k();
    if k > 4 {
        return Err(Error::InvalidArgument(format!(
            "grid evaluator limited to K <= 4, got {k}"
        )));
    }
    let mut points: Vec<FrontierPoint> = Vec::new();

    // nested-family candidates carry the frontier; the generic grid explores
    // the rest of the sigma polytope
    let mut allocs: Vec<Allocation> = Vec::new();
    for (alloc, params) in nested_candidates(instance, ctx, scan.nested_samples) {
        points.push(FrontierPoint::with_params(
            alloc.theta_bounds(k, ctx),
            params,
        ));
        allocs.push(alloc);
    }

    let subsets: Vec<SubsetMask> = SubsetMask::nonempty_subsets(k).collect();
    let steps = (1.0 / scan.sigma_step).round() as usize;
    let mut sigma_points: Vec<Vec<usize>> = Vec::new();
    enumerate_compositions(
        subsets.len(),
        steps,
        scan.max_sigma_points,
        &mut Vec::new(),
        &mut sigma_points,
    );
    for counts in sigma_points {
        let sigma: Vec<f64> = counts.iter().map(|&c| c as f64 / steps as f64).collect();
        if !sigma_feasible(&sigma, &subsets, &instance.epsilons) {
            continue;
        }
        for alloc in rate_rules(instance, ctx, &subsets, &sigma) {
            points.push(FrontierPoint::new(alloc.theta_bounds(k, ctx)));
            allocs.push(alloc);
        }
    }

    // one pass of mass shifting toward smaller subsets
    for alloc in allocs {
        for &sup in &subsets {
            if alloc.sigma_of(sup) <= 0.0 {
                continue;
            }
            for &sub in &subsets {
                if sub == sup || !sup.is_superset_of(sub) {
                    continue;
                }
                if let Ok(gamma) = alloc.max_mass_shift(instance, sub, sup) {
                    if gamma > 1e-12 {
                        if let Ok(shifted) = alloc.mass_shift(instance, sub, sup, gamma, ctx) {
                            points.push(FrontierPoint::new(shifted.theta_bounds(k, ctx)));
                        }
                    }
                }
            }
        }
    }

    Ok(RegionFrontier::new(k, points))
}

fn enumerate_compositions(
    vars: usize,
    budget: usize,
    cap: usize,
    prefix: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if out.len() >= cap {
        return;
    }
    if prefix.len() == vars {
        out.push(prefix.clone());
        return;
    }
    let used: usize = prefix.iter().sum();
    for c in 0..=(budget - used) {
        prefix.push(c);
        enumerate_compositions(vars, budget, cap, prefix, out);
        prefix.pop();
    }
}

fn sigma_feasible(sigma: &[f64], subsets: &[SubsetMask], epsilons: &[f64]) -> bool {
    let k = epsilons.len();
    let total: f64 = sigma.iter().sum();
    if total > 1.0 + 1e-12 {
        return false;
    }
    for s in SubsetMask::nonempty_subsets(k) {
        let bound = 1.0 - s.indices().map(|c| epsilons[c - 1]).sum::<f64>();
        if bound <= 0.0 {
            continue;
        }
        let mass: f64 = subsets
            .iter()
            .zip(sigma)
            .filter(|(m, _)| m.is_superset_of(s))
            .map(|(_, &v)| v)
            .sum();
        if mass < bound - 1e-12 {
            return false;
        }
    }
    true
}

/// A few informative rate allocations for a fixed sigma vector: the uniform
/// boost, and one center-favoring rule per center.
fn rate_rules(
    instance: &Instance,
    ctx: &RegionContext,
    subsets: &[SubsetMask],
    sigma: &[f64],
) -> Vec<Allocation> {
    let k = instance.k();
    let base: BTreeMap<SubsetMask, f64> = subsets
        .iter()
        .copied()
        .zip(sigma.iter().copied())
        .filter(|(_, s)| *s > 0.0)
        .collect();
    let mut out = Vec::new();
    for favored in 0..=k {
        let mut alloc = Allocation {
            sigma: base.clone(),
            rates: BTreeMap::new(),
        };
        for l in 1..=k {
            let eligible = |m: &SubsetMask| {
                m.max_index() >= l && (favored == 0 || l > favored || m.contains(favored))
            };
            let mass: f64 = subsets
                .iter()
                .zip(sigma)
                .filter(|(m, &s)| s > 0.0 && eligible(m))
                .map(|(_, &s)| s)
                .sum();
            for (m, &s) in subsets.iter().zip(sigma) {
                if m.max_index() < l {
                    continue;
                }
                let r = if s <= 0.0 {
                    ctx.rate_cap(l)
                } else if eligible(m) && mass > 0.0 {
                    (instance.rates[l - 1] / mass).min(ctx.rate_cap(l))
                } else {
                    0.0
                };
                alloc.set_rate(*m, l, r);
            }
        }
        out.push(alloc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source_model::make_dsbs_example;

    fn fixture() -> (Instance, RegionContext) {
        let source = make_dsbs_example();
        let cfg = SolverConfig {
            restarts: 8,
            lambda_samples: 33,
            ..SolverConfig::default()
        };
        let ctx = RegionContext::new(&source, &cfg).unwrap();
        let instance = Instance::new(source, vec![0.5, 0.5], vec![0.05, 0.15]).unwrap();
        (instance, ctx)
    }

    #[test]
    fn instance_validation() {
        let source = make_dsbs_example();
        assert!(Instance::new(source.clone(), vec![0.5], vec![0.0, 0.0]).is_err());
        assert!(Instance::new(source.clone(), vec![0.5, 0.5], vec![0.0, 1.0]).is_err());
        assert!(Instance::new(source, vec![-0.5, 0.5], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn max_rate_zero_rates_give_origin() {
        let (inst, ctx) = fixture();
        let inst0 = Instance::new(inst.source.clone(), vec![0.0, 0.0], vec![0.0, 0.0]).unwrap();
        let (t1, t2) = max_rate_region_k2(&inst0, &ctx).unwrap();
        assert_eq!((t1, t2), (0.0, 0.0));
    }

    #[test]
    fn max_rate_saturates_at_sum_of_link_informations() {
        let (inst, ctx) = fixture();
        let inst = Instance::new(inst.source.clone(), vec![10.0, 10.0], vec![0.0, 0.0]).unwrap();
        let (t1, t2) = max_rate_region_k2(&inst, &ctx).unwrap();
        assert!((t1 - 0.26766).abs() < 2e-3, "{t1}");
        assert!((t2 - 0.54199).abs() < 2e-3, "{t2}");
        // K-hop corner agrees with the K=2 special case
        let corner = max_rate_region_khop(&inst, &ctx).unwrap();
        assert!((corner[0] - t1).abs() < 1e-12);
        assert!((corner[1] - t2).abs() < 1e-12);
    }

    #[test]
    fn khop_corner_rejects_nonzero_epsilon() {
        let (inst, ctx) = fixture();
        assert!(max_rate_region_khop(&inst, &ctx).is_err());
    }

    #[test]
    fn equal_epsilon_frontier_is_the_boosted_rectangle() {
        let (inst, ctx) = fixture();
        let inst = Instance::new(inst.source.clone(), vec![0.5, 0.5], vec![0.1, 0.1]).unwrap();
        let f = expected_rate_frontier_k2(&inst, &ctx, 16).unwrap();
        assert_eq!(f.points.len(), 1);
        let boosted = Instance::new(
            inst.source.clone(),
            vec![0.5 / 0.9, 0.5 / 0.9],
            vec![0.0, 0.0],
        )
        .unwrap();
        let (t1, t2) = max_rate_region_k2(&boosted, &ctx).unwrap();
        assert!((f.points[0].thetas[0] - t1).abs() < 1e-12);
        assert!((f.points[0].thetas[1] - t2).abs() < 1e-12);
    }

    #[test]
    fn zero_epsilon_frontier_matches_max_rate_corner() {
        let (inst, ctx) = fixture();
        let inst = Instance::new(inst.source.clone(), vec![0.5, 0.5], vec![0.0, 0.0]).unwrap();
        let f = expected_rate_frontier_k2(&inst, &ctx, 8).unwrap();
        let (t1, t2) = max_rate_region_k2(&inst, &ctx).unwrap();
        assert!((f.points[0].thetas[0] - t1).abs() < 1e-12);
        assert!((f.points[0].thetas[1] - t2).abs() < 1e-12);
    }

    #[test]
    fn frontier_is_pareto_sorted_for_k2() {
        let (inst, ctx) = fixture();
        let f = expected_rate_frontier_k2(&inst, &ctx, 32).unwrap();
        for w in f.points.windows(2) {
            assert!(w[0].thetas[0] <= w[1].thetas[0]);
            assert!(w[0].thetas[1] >= w[1].thetas[1] - 1e-12);
        }
    }

    #[test]
    fn pareto_filter_is_idempotent() {
        let pts = vec![
            FrontierPoint::new(vec![0.1, 0.9]),
            FrontierPoint::new(vec![0.2, 0.5]),
            FrontierPoint::new(vec![0.15, 0.5]),
            FrontierPoint::new(vec![0.1, 0.9]),
            FrontierPoint::new(vec![0.05, 0.95]),
        ];
        let once = pareto_filter(pts);
        let twice = pareto_filter(once.clone());
        let a: Vec<&Vec<f64>> = once.iter().map(|p| &p.thetas).collect();
        let b: Vec<&Vec<f64>> = twice.iter().map(|p| &p.thetas).collect();
        assert_eq!(a, b);
        assert_eq!(once.len(), 3);
    }

    #[test]
    fn single_subscheme_allocation_is_feasible() {
        let (inst, ctx) = fixture();
        let inst = Instance::new(inst.source.clone(), vec![0.5, 0.5], vec![0.0, 0.0]).unwrap();
        let full = SubsetMask::full(2);
        let mut alloc = Allocation::default();
        alloc.sigma.insert(full, 1.0);
        alloc.set_rate(full, 1, 0.5);
        alloc.set_rate(full, 2, 0.5);
        let thetas = alloc.theta_bounds(2, &ctx);
        assert!(general_region_feasible(&inst, &ctx, &alloc, &thetas).unwrap());
        let expected = ctx.eta(1, 0.5) + ctx.eta(2, 0.5);
        assert!((thetas[1] - expected).abs() < 1e-12);
    }

    #[test]
    fn oversubscribed_sigma_is_infeasible() {
        let (inst, ctx) = fixture();
        let mut alloc = Allocation::default();
        alloc.sigma.insert(SubsetMask::full(2), 0.9);
        alloc
            .sigma
            .insert(SubsetMask::from_indices(&[1]).unwrap(), 0.4);
        assert!(!general_region_feasible(&inst, &ctx, &alloc, &[0.0, 0.0]).unwrap());
    }

    #[test]
    fn region_contains_itself() {
        let (inst, ctx) = fixture();
        let f = expected_rate_frontier_k2(&inst, &ctx, 16).unwrap();
        assert!(region_contains(&f, &f, 1e-12).unwrap());
    }

    #[test]
    fn epsilon_permutation_is_stable_descending() {
        assert_eq!(epsilon_permutation(&[0.05, 0.15]), vec![2, 1]);
        assert_eq!(epsilon_permutation(&[0.15, 0.05]), vec![1, 2]);
        assert_eq!(epsilon_permutation(&[0.1, 0.1, 0.05]), vec![1, 2, 3]);
    }

    #[test]
    fn nested_plan_masses_telescope() {
        let plan = nested_plan(&[0.05, 0.15]);
        // pi = (2, 1): J1 = {1,2} mass 1 - 0.15, J2 = {1} mass 0.15 - 0.05
        assert_eq!(plan[0].0, SubsetMask::full(2));
        assert!((plan[0].1 - 0.85).abs() < 1e-15);
        assert_eq!(plan[1].0, SubsetMask::from_indices(&[1]).unwrap());
        assert!((plan[1].1 - 0.10).abs() < 1e-15);
        let total: f64 = plan.iter().map(|(_, m)| m).sum();
        assert!((total - 0.95).abs() < 1e-15);
    }

    #[test]
    fn equal_epsilon_ties_collapse_multiplex_probabilities() {
        let plan = nested_plan(&[0.1, 0.1]);
        assert!((plan[0].1 - 0.9).abs() < 1e-15);
        assert_eq!(plan[1].1, 0.0);
    }
}
