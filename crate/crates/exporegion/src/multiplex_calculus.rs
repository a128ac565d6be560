//! Bookkeeping and Monte-Carlo validation of the multiplexing scheme.
//!
//! A plan partitions the transmitter's observation space into cells, one per
//! nonempty subset of decision centers (plus a discard cell); cell `I` runs
//! a subscheme serving exactly the centers in `I` and is summarized by its
//! per-center type-I sequence, its per-center type-II exponents, and its
//! per-link maximum rates. Every message carries K flag bits announcing the
//! cell.
//!
//! Cell membership is realized by an independent categorical draw: only the
//! cell probabilities are constrained, so any partition achieving them is
//! admissible, and the randomized realization avoids constructing explicit
//! sequence sets.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::source_model::MarkovChainSource;
use crate::subset::SubsetMask;
use crate::{Error, Result};

/// Decaying type-I model for an abstracted subscheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlphaModel {
    /// `alpha(n) = min(1, c / sqrt(n))`
    InvSqrt {
        c: f64,
    },
    /// `alpha(n) = min(1, c * n^-p)`, `p > 0`
    Power {
        c: f64,
        p: f64,
    },
    Zero,
}

impl Default for AlphaModel {
    fn default() -> Self {
        AlphaModel::InvSqrt { c: 2.0 }
    }
}

impl AlphaModel {
    pub fn eval(&self, n: u64) -> f64 {
        let n = n.max(1) as f64;
        match *self {
            AlphaModel::InvSqrt { c } => (c / n.sqrt()).min(1.0),
            AlphaModel::Power { c, p } => (c * n.powf(-p)).min(1.0),
            AlphaModel::Zero => 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            AlphaModel::InvSqrt { c } => c.is_finite() && c >= 0.0,
            AlphaModel::Power { c, p } => c.is_finite() && c >= 0.0 && p > 0.0,
            AlphaModel::Zero => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidPlan(
                "alpha model must vanish as n grows".into(),
            ))
        }
    }
}

/// Abstract summary of the subscheme run in one cell.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SubschemeSummary {
    /// type-II exponent promised to each served center
    #[serde(default)]
    pub thetas: BTreeMap<usize, f64>,
    /// per-link maximum rates, links `1..=l*`
    #[serde(default)]
    pub rates: Vec<f64>,
    /// per-subscheme type-I model override
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<AlphaModel>,
}

/// A multiplexing plan over K centers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiplexPlan {
    pub k: usize,
    /// cell probabilities keyed by subset label ("12" = {1,2}); the discard
    /// cell implicitly holds the leftover mass
    pub sigma: BTreeMap<String, f64>,
    #[serde(default)]
    pub subschemes: BTreeMap<String, SubschemeSummary>,
    #[serde(default)]
    pub alpha_model: AlphaModel,
    /// per-center type-I budgets used by budget checks, when known
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
}

impl MultiplexPlan {
    pub fn from_json(text: &str) -> Result<Self> {
        let plan: MultiplexPlan = serde_json::from_str(text)?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    /// Equal-epsilon canonical plan: one cell serving every center with
    /// probability `1 - eps`, rates boosted by `(1 - eps)^-1` scaled by
    /// `margin` (1.0 uses the budget exactly in expectation).
    pub fn equal_epsilon(
        k: usize,
        eps: f64,
        link_rates: &[f64],
        thetas: &[f64],
        margin: f64,
    ) -> Result<Self> {
        if link_rates.len() != k || thetas.len() != k {
            return Err(Error::InvalidPlan(format!("need {k} rates and {k} thetas")));
        }
        let full = SubsetMask::full(k);
        let mut sigma = BTreeMap::new();
        sigma.insert(full.label(), 1.0 - eps);
        let mut subschemes = BTreeMap::new();
        subschemes.insert(
            full.label(),
            SubschemeSummary {
                thetas: (1..=k).map(|c| (c, thetas[c - 1])).collect(),
                rates: link_rates
                    .iter()
                    .map(|r| margin * r / (1.0 - eps))
                    .collect(),
                alpha: None,
            },
        );
        let plan = MultiplexPlan {
            k,
            sigma,
            subschemes,
            alpha_model: AlphaModel::default(),
            epsilons: Some(vec![eps; k]),
        };
        plan.validate()?;
        Ok(plan)
    }

    /// The nested (K+1)-subscheme plan with cell probabilities given by the
    /// sorted epsilon differences; rates are boosted within each family.
    pub fn nested(k: usize, epsilons: &[f64], link_rates: &[f64], thetas: &[f64]) -> Result<Self> {
        if epsilons.len() != k || link_rates.len() != k || thetas.len() != k {
            return Err(Error::InvalidPlan(format!(
                "need {k} epsilons, rates, thetas"
            )));
        }
        let plan_masses = crate::exponent_regions::nested_plan(epsilons);
        let mut sigma = BTreeMap::new();
        let mut subschemes = BTreeMap::new();
        let total_active: f64 = plan_masses.iter().map(|(_, m)| *m).sum();
        for (mask, mass) in plan_masses {
            if mass <= 0.0 {
                continue;
            }
            sigma.insert(mask.label(), mass);
            subschemes.insert(
                mask.label(),
                SubschemeSummary {
                    thetas: mask.indices().map(|c| (c, thetas[c - 1])).collect(),
                    rates: (1..=mask.max_index())
                        .map(|l| link_rates[l - 1] / total_active)
                        .collect(),
                    alpha: None,
                },
            );
        }
        let plan = MultiplexPlan {
            k,
            sigma,
            subschemes,
            alpha_model: AlphaModel::default(),
            epsilons: Some(epsilons.to_vec()),
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > 9 {
            return Err(Error::InvalidPlan(format!("k = {} outside 1..=9", self.k)));
        }
        self.alpha_model.validate()?;
        let mut total = 0.0;
        for (label, &mass) in &self.sigma {
            let mask = SubsetMask::parse_label(label)?;
            if mask.is_empty() || mask.max_index() > self.k {
                return Err(Error::InvalidPlan(format!(
                    "sigma subset `{label}` out of range"
                )));
            }
            if !(0.0..=1.0).contains(&mass) {
                return Err(Error::InvalidPlan(format!(
                    "sigma[{label}] = {mass} outside [0,1]"
                )));
            }
            total += mass;
        }
        if total > 1.0 + 1e-12 {
            return Err(Error::InvalidPlan(format!("sigma sums to {total} > 1")));
        }
        for (label, sub) in &self.subschemes {
            let mask = SubsetMask::parse_label(label)?;
            if mask.is_empty() || mask.max_index() > self.k {
                return Err(Error::InvalidPlan(format!(
                    "subscheme `{label}` out of range"
                )));
            }
            if sub.rates.len() > mask.max_index() {
                return Err(Error::InvalidPlan(format!(
                    "subscheme `{label}` has {} rates, at most {} links carry it",
                    sub.rates.len(),
                    mask.max_index()
                )));
            }
            if let Some(a) = &sub.alpha {
                a.validate()?;
            }
            for (&c, &t) in &sub.thetas {
                if !mask.contains(c) {
                    return Err(Error::InvalidPlan(format!(
                        "subscheme `{label}` promises an exponent to center {c} it does not serve"
                    )));
                }
                if t < 0.0 {
                    return Err(Error::InvalidPlan("negative exponent".into()));
                }
            }
            if sub.rates.iter().any(|&r| r < 0.0) {
                return Err(Error::InvalidPlan("negative rate".into()));
            }
        }
        Ok(())
    }

    fn cells(&self) -> Result<Vec<(SubsetMask, f64)>> {
        self.sigma
            .iter()
            .map(|(label, &mass)| Ok((SubsetMask::parse_label(label)?, mass)))
            .collect()
    }

    fn alpha_for(&self, mask: SubsetMask, n: u64) -> f64 {
        self.subschemes
            .get(&mask.label())
            .and_then(|s| s.alpha)
            .unwrap_or(self.alpha_model)
            .eval(n)
    }

    fn rate_for(&self, mask: SubsetMask, l: usize) -> f64 {
        self.subschemes
            .get(&mask.label())
            .and_then(|s| s.rates.get(l - 1))
            .copied()
            .unwrap_or(0.0)
    }

    /// Mass of cells serving center `k`.
    pub fn coverage(&self, center: usize) -> Result<f64> {
        Ok(self
            .cells()?
            .into_iter()
            .filter(|(m, _)| m.contains(center))
            .map(|(_, s)| s)
            .sum())
    }

    /// Whether the cell probabilities satisfy every subset type-I
    /// constraint `sum_{I >= S} sigma_I >= 1 - sum_{k in S} eps_k`.
    pub fn sigma_satisfies_budgets(&self, epsilons: &[f64]) -> Result<bool> {
        if epsilons.len() != self.k {
            return Err(Error::InvalidPlan(format!("need {} epsilons", self.k)));
        }
        let cells = self.cells()?;
        for s in SubsetMask::nonempty_subsets(self.k) {
            let bound = 1.0 - s.indices().map(|c| epsilons[c - 1]).sum::<f64>();
            let mass: f64 = cells
                .iter()
                .filter(|(m, _)| m.is_superset_of(s))
                .map(|(_, v)| v)
                .sum();
            if mass < bound.max(0.0) - 1e-12 {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Per-center type-I upper bounds at blocklength `n`:
/// `alpha_k <= Pr[cell misses k] + sum_{I : k in I} alpha_{I,k}(n)`.
pub fn aggregate_type1(plan: &MultiplexPlan, n: u64) -> Result<Vec<f64>> {
    plan.validate()?;
    let cells = plan.cells()?;
    Ok((1..=plan.k)
        .map(|center| {
            let covered: f64 = cells
                .iter()
                .filter(|(m, _)| m.contains(center))
                .map(|(_, s)| s)
                .sum();
            let sub_alpha: f64 = cells
                .iter()
                .filter(|(m, _)| m.contains(center))
                .map(|(m, _)| plan.alpha_for(*m, n))
                .sum();
            ((1.0 - covered) + sub_alpha).min(1.0)
        })
        .collect())
}

/// Exact per-center alarm probabilities of the randomized realization —
/// the value the empirical rate converges to.
pub fn aggregate_type1_exact(plan: &MultiplexPlan, n: u64) -> Result<Vec<f64>> {
    plan.validate()?;
    let cells = plan.cells()?;
    Ok((1..=plan.k)
        .map(|center| {
            let mut p = 1.0
                - cells
                    .iter()
                    .filter(|(m, _)| m.contains(center))
                    .map(|(_, s)| s)
                    .sum::<f64>();
            for (m, s) in &cells {
                if m.contains(center) {
                    p += s * plan.alpha_for(*m, n);
                }
            }
            p.min(1.0)
        })
        .collect())
}

/// Per-center type-II exponents: the exponent of a sum of error events is
/// the minimum exponent, and an uncovered center alarms always (exponent 0).
pub fn aggregate_type2(plan: &MultiplexPlan) -> Result<Vec<f64>> {
    plan.validate()?;
    let cells = plan.cells()?;
    Ok((1..=plan.k)
        .map(|center| {
            let mut theta = f64::INFINITY;
            let mut covered = false;
            for (m, s) in &cells {
                if !m.contains(center) || *s <= 0.0 {
                    continue;
                }
                covered = true;
                let t = plan
                    .subschemes
                    .get(&m.label())
                    .and_then(|sub| sub.thetas.get(&center))
                    .copied()
                    .unwrap_or(0.0);
                theta = theta.min(t);
            }
            if covered {
                theta
            } else {
                0.0
            }
        })
        .collect())
}

/// Analytic expected message lengths per link, in bits, including the K
/// flag bits: `E[len(M_l)] = K + sum_{I : l*_I >= l} sigma_I * n * R_{I,l}`.
pub fn expected_lengths(plan: &MultiplexPlan, n: u64) -> Result<Vec<f64>> {
    plan.validate()?;
    if n == 0 {
        return Err(Error::InvalidPlan("blocklength must be positive".into()));
    }
    let cells = plan.cells()?;
    Ok((1..=plan.k)
        .map(|l| {
            let payload: f64 = cells
                .iter()
                .filter(|(m, _)| m.max_index() >= l)
                .map(|(m, s)| s * n as f64 * plan.rate_for(*m, l))
                .sum();
            plan.k as f64 + payload
        })
        .collect())
}

/// Monte-Carlo report for one plan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimReport {
    pub n: u64,
    pub trials: u64,
    pub seed: u64,
    /// empirical per-center alarm rates under the null hypothesis
    pub alpha_hat: Vec<f64>,
    /// 95% binomial confidence half-widths
    pub alpha_ci_halfwidth: Vec<f64>,
    /// exact analytic alarm probabilities of the realization
    pub alpha_analytic: Vec<f64>,
    /// the aggregation upper bounds at this n
    pub alpha_bound: Vec<f64>,
    /// analytic type-II exponents (not simulated; exponents are exact)
    pub theta_analytic: Vec<f64>,
    /// realized mean message length per link, bits
    pub mean_length: Vec<f64>,
    /// analytic expected message length per link, bits
    pub expected_length_analytic: Vec<f64>,
    /// per-center budget verdicts when the plan carries epsilons
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget_ok: Option<Vec<bool>>,
}

/// Simulate the multiplexing layer under the null hypothesis: each trial
/// draws a cell from the categorical `(sigma_0, sigma_I, ...)` and, for each
/// served center, an alarm with the subscheme's type-I probability at `n`.
/// The source argument fixes the observation model the plan multiplexes
/// over; the randomized partition makes cell membership independent of the
/// realized sequences, so they are not materialized.
pub fn simulate(
    plan: &MultiplexPlan,
    source: &MarkovChainSource,
    n: u64,
    trials: u64,
    seed: u64,
) -> Result<SimReport> {
    plan.validate()?;
    if source.k_hops() != plan.k {
        return Err(Error::InvalidPlan(format!(
            "plan has {} centers, source has {} hops",
            plan.k,
            source.k_hops()
        )));
    }
    if n == 0 || trials == 0 {
        return Err(Error::InvalidPlan("need n >= 1 and trials >= 1".into()));
    }
    let cells = plan.cells()?;
    let alphas: Vec<f64> = cells.iter().map(|(m, _)| plan.alpha_for(*m, n)).collect();
    let k = plan.k;

    let mut alarms = vec![0u64; k];
    let mut length_sums = vec![0.0f64; k];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        // categorical cell draw; leftover mass is the discard cell
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut cell: Option<usize> = None;
        for (ci, (_, mass)) in cells.iter().enumerate() {
            acc += mass;
            if u < acc {
                cell = Some(ci);
                break;
            }
        }
        match cell {
            None => {
                // discard cell: flags only, every center alarms
                for a in alarms.iter_mut() {
                    *a += 1;
                }
                for s in length_sums.iter_mut() {
                    *s += k as f64;
                }
            }
            Some(ci) => {
                let (mask, _) = cells[ci];
                for center in 1..=k {
                    if mask.contains(center) {
                        if rng.gen::<f64>() < alphas[ci] {
                            alarms[center - 1] += 1;
                        }
                    } else {
                        alarms[center - 1] += 1;
                    }
                }
                for l in 1..=k {
                    let payload = if mask.max_index() >= l {
                        n as f64 * plan.rate_for(mask, l)
                    } else {
                        0.0
                    };
                    length_sums[l - 1] += payload + k as f64;
                }
            }
        }
    }

    let alpha_hat: Vec<f64> = alarms.iter().map(|&a| a as f64 / trials as f64).collect();
    let alpha_ci_halfwidth: Vec<f64> = alpha_hat
        .iter()
        .map(|&p| 1.96 * (p * (1.0 - p) / trials as f64).sqrt())
        .collect();
    let mean_length: Vec<f64> = length_sums.iter().map(|&s| s / trials as f64).collect();
    let alpha_analytic = aggregate_type1_exact(plan, n)?;
    let budget_ok = plan.epsilons.as_ref().map(|eps| {
        (0..k)
            .map(|i| {
                // the finite-n alarm rate sits above the asymptotic one by
                // the vanishing subscheme transient; flag only violations
                // beyond eps + transient + CI
                let coverage: f64 = cells
                    .iter()
                    .filter(|(m, _)| m.contains(i + 1))
                    .map(|(_, s)| s)
                    .sum();
                let transient = alpha_analytic[i] - (1.0 - coverage);
                alpha_hat[i] <= eps[i] + transient + alpha_ci_halfwidth[i]
            })
            .collect()
    });
    Ok(SimReport {
        n,
        trials,
        seed,
        alpha_hat,
        alpha_ci_halfwidth,
        alpha_analytic,
        alpha_bound: aggregate_type1(plan, n)?,
        theta_analytic: aggregate_type2(plan)?,
        mean_length,
        expected_length_analytic: expected_lengths(plan, n)?,
        budget_ok,
    })
}
