//! Exact rational linear-inequality engine: Fourier–Motzkin elimination,
//! feasibility with witness extraction, and builders for the sigma / delta
//! allocation systems that arise in the multiplexing analysis.
//!
//! All arithmetic is exact (`BigRational`); epsilon inputs should be parsed
//! from decimal strings via [`parse_decimal`] so that systems like
//! `s_1 >= 0.85` stay exact. Redundancy removal is deliberately weak:
//! duplicate rows and pairwise dominance (identical coefficient vector,
//! weaker constant) only.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::subset::SubsetMask;
use crate::{Error, Result};

pub type Rat = BigRational;

pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Parse `"0.85"`, `"-2"`, or `"3/4"` into an exact rational.
pub fn parse_decimal(s: &str) -> Result<Rat> {
    let s = s.trim();
    let bad = |m: &str| Error::InvalidArgument(format!("cannot parse rational `{s}`: {m}"));
    if let Some((num, den)) = s.split_once('/') {
        let n: BigInt = num.trim().parse().map_err(|_| bad("bad numerator"))?;
        let d: BigInt = den.trim().parse().map_err(|_| bad("bad denominator"))?;
        if d.is_zero() {
            return Err(bad("zero denominator"));
        }
        return Ok(Rat::new(n, d));
    }
    let (sign, body) = match s.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, s),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad("empty"));
    }
    let digits = format!(
        "{}{}",
        if int_part.is_empty() { "0" } else { int_part },
        frac_part
    );
    let n: BigInt = digits.parse().map_err(|_| bad("bad digits"))?;
    let d = BigInt::from(10u32).pow(frac_part.len() as u32);
    Ok(Rat::new(n * BigInt::from(sign), d))
}

fn format_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

impl Relation {
    fn as_str(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearRow {
    pub coeffs: Vec<Rat>,
    pub relation: Relation,
    pub constant: Rat,
}

/// Canonical row: primitive integer coefficient vector with a rational
/// constant, meaning `coeffs . x >= constant`. Scaling only the coefficients
/// makes rows with the same direction comparable for dominance.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct CanonRow {
    coeffs: Vec<BigInt>,
    constant: Rat,
}

impl CanonRow {
    fn is_trivially_true(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero()) && !self.constant.is_positive()
    }

    fn is_contradiction(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero()) && self.constant.is_positive()
    }
}

#[derive(Debug, Clone)]
pub struct InequalitySystem {
    variables: Vec<String>,
    rows: Vec<LinearRow>,
}

/// Outcome of a feasibility query.
#[derive(Debug, Clone)]
pub enum Feasibility {
    Feasible { witness: Vec<(String, Rat)> },
    Infeasible,
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible { .. })
    }
}

const ROW_CAP: usize = 100_000;

impl InequalitySystem {
    pub fn new(variables: Vec<String>) -> Self {
        InequalitySystem {
            variables,
            rows: Vec::new(),
        }
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn rows(&self) -> &[LinearRow] {
        &self.rows
    }

    pub fn push_row(&mut self, coeffs: Vec<Rat>, relation: Relation, constant: Rat) -> Result<()> {
        if coeffs.len() != self.variables.len() {
            return Err(Error::InvalidArgument(format!(
                "row has {} coefficients, system has {} variables",
                coeffs.len(),
                self.variables.len()
            )));
        }
        self.rows.push(LinearRow {
            coeffs,
            relation,
            constant,
        });
        Ok(())
    }

    /// Convenience: add `sum(terms) REL constant` with named variables.
    pub fn push_named(
        &mut self,
        terms: &[(&str, Rat)],
        relation: Relation,
        constant: Rat,
    ) -> Result<()> {
        let mut coeffs = vec![Rat::zero(); self.variables.len()];
        for (name, c) in terms {
            let idx = self
                .variables
                .iter()
                .position(|v| v == name)
                .ok_or_else(|| Error::UnknownVariable((*name).to_string()))?;
            coeffs[idx] += c.clone();
        }
        self.push_row(coeffs, relation, constant)
    }

    // -- canonical form -----------------------------------------------------

    fn canonical_rows(&self) -> Vec<CanonRow> {
        let mut out = Vec::with_capacity(self.rows.len() + 4);
        for row in &self.rows {
            match row.relation {
                Relation::Ge => out.push(canonize(&row.coeffs, &row.constant)),
                Relation::Le => out.push(canonize_neg(&row.coeffs, &row.constant)),
                Relation::Eq => {
                    out.push(canonize(&row.coeffs, &row.constant));
                    out.push(canonize_neg(&row.coeffs, &row.constant));
                }
            }
        }
        reduce(out)
    }

    fn from_canonical(variables: Vec<String>, rows: Vec<CanonRow>) -> Self {
        let rows = rows
            .into_iter()
            .map(|r| LinearRow {
                coeffs: r
                    .coeffs
                    .iter()
                    .map(|c| Rat::from_integer(c.clone()))
                    .collect(),
                relation: Relation::Ge,
                constant: r.constant,
            })
            .collect();
        InequalitySystem { variables, rows }
    }

    /// The weak normal form: `>=` rows only, primitive integer coefficients,
    /// duplicates and dominated rows removed.
    pub fn normalized(&self) -> InequalitySystem {
        InequalitySystem::from_canonical(self.variables.clone(), self.canonical_rows())
    }

    // -- elimination ---------------------------------------------------------

    /// Exact projection eliminating one variable (all positive/negative row
    /// combinations), with duplicate and trivially-redundant rows removed.
    pub fn eliminate(&self, variable: &str) -> Result<InequalitySystem> {
        let idx = self
            .variables
            .iter()
            .position(|v| v == variable)
            .ok_or_else(|| Error::UnknownVariable(variable.to_string()))?;
        let rows = eliminate_canonical(self.canonical_rows(), idx)?;
        let mut variables = self.variables.clone();
        variables.remove(idx);
        Ok(InequalitySystem::from_canonical(variables, rows))
    }

    /// Eliminate several variables in the given order.
    pub fn eliminate_all(&self, variables: &[&str]) -> Result<InequalitySystem> {
        let mut names = self.variables.clone();
        let mut rows = self.canonical_rows();
        for v in variables {
            let idx = names
                .iter()
                .position(|x| x == v)
                .ok_or_else(|| Error::UnknownVariable(v.to_string()))?;
            rows = eliminate_canonical(rows, idx)?;
            names.remove(idx);
        }
        Ok(InequalitySystem::from_canonical(names, rows))
    }

    /// Eliminate every variable in `variables`, choosing the next victim
    /// greedily (fewest positive*negative row pairs) to contain FME growth.
    pub fn eliminate_all_greedy(&self, variables: &[&str]) -> Result<InequalitySystem> {
        let mut names = self.variables.clone();
        let mut pending: Vec<String> = variables.iter().map(|s| s.to_string()).collect();
        for v in &pending {
            if !names.contains(v) {
                return Err(Error::UnknownVariable(v.clone()));
            }
        }
        let mut rows = self.canonical_rows();
        while !pending.is_empty() {
            let (pick, _) = pending
                .iter()
                .enumerate()
                .map(|(pi, name)| {
                    let idx = names.iter().position(|x| x == name).unwrap();
                    let pos = rows.iter().filter(|r| r.coeffs[idx].is_positive()).count();
                    let neg = rows.iter().filter(|r| r.coeffs[idx].is_negative()).count();
                    (pi, pos * neg)
                })
                .min_by_key(|&(_, cost)| cost)
                .unwrap();
            let name = pending.remove(pick);
            let idx = names.iter().position(|x| x == &name).unwrap();
            rows = eliminate_canonical(rows, idx)?;
            names.remove(idx);
        }
        Ok(InequalitySystem::from_canonical(names, rows))
    }

    /// Decide feasibility by eliminating every variable (greedy order),
    /// back-substituting a rational witness when feasible.
    pub fn is_feasible(&self) -> Result<Feasibility> {
        let mut names: Vec<String> = self.variables.clone();
        let mut rows = self.canonical_rows();
        if rows.iter().any(|r| r.is_contradiction()) {
            return Ok(Feasibility::Infeasible);
        }
        // (variable name, index at its step, rows before eliminating it)
        let mut stack: Vec<(String, usize, Vec<CanonRow>)> = Vec::new();
        while !names.is_empty() {
            // greedy: pick the variable minimizing pos*neg row product
            let (best_idx, _) = (0..names.len())
                .map(|i| {
                    let pos = rows.iter().filter(|r| r.coeffs[i].is_positive()).count();
                    let neg = rows.iter().filter(|r| r.coeffs[i].is_negative()).count();
                    (i, pos * neg)
                })
                .min_by_key(|&(_, cost)| cost)
                .unwrap();
            stack.push((names[best_idx].clone(), best_idx, rows.clone()));
            rows = eliminate_canonical(rows, best_idx)?;
            names.remove(best_idx);
            if rows.iter().any(|r| r.is_contradiction()) {
                return Ok(Feasibility::Infeasible);
            }
        }
        if rows.iter().any(|r| r.is_contradiction()) {
            return Ok(Feasibility::Infeasible);
        }
        // back-substitute
        let mut values: HashMap<String, Rat> = HashMap::new();
        let mut remaining_after: Vec<String> = Vec::new();
        for (name, idx, step_rows) in stack.iter().rev() {
            // variables present in step_rows: remaining_after with `name` at `idx`
            let mut vars_here = remaining_after.clone();
            vars_here.insert(*idx, name.clone());
            let mut lo: Option<Rat> = None;
            let mut hi: Option<Rat> = None;
            for row in step_rows {
                let a = &row.coeffs[*idx];
                if a.is_zero() {
                    continue;
                }
                let mut rest = row.constant.clone();
                for (j, v) in vars_here.iter().enumerate() {
                    if j != *idx && !row.coeffs[j].is_zero() {
                        rest -= Rat::from_integer(row.coeffs[j].clone()) * values[v].clone();
                    }
                }
                let bound = rest / Rat::from_integer(a.clone());
                if a.is_positive() {
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
            let value = match (lo, hi) {
                (Some(l), Some(h)) => (l + h) / rat_int(2),
                (Some(l), None) => l,
                (None, Some(h)) => h,
                (None, None) => Rat::zero(),
            };
            values.insert(name.clone(), value);
            remaining_after = vars_here;
        }
        let witness = self
            .variables
            .iter()
            .map(|v| (v.clone(), values.remove(v).unwrap_or_else(Rat::zero)))
            .collect();
        Ok(Feasibility::Feasible { witness })
    }

    /// Exact membership test for a point with small integer numerators over
    /// a common denominator, avoiding big-rational arithmetic. Falls back to
    /// [`check_point`](Self::check_point) when magnitudes do not fit i128.
    pub fn check_point_scaled(&self, numerators: &[i64], denominator: i64) -> Result<bool> {
        if numerators.len() != self.variables.len() {
            return Err(Error::InvalidArgument(format!(
                "point has {} coordinates, system has {} variables",
                numerators.len(),
                self.variables.len()
            )));
        }
        if denominator <= 0 {
            return Err(Error::InvalidArgument(
                "denominator must be positive".into(),
            ));
        }
        for row in &self.rows {
            if !row_ok_scaled(row, numerators, denominator) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Evaluate every row at an exact assignment (by variable order).
    pub fn check_point(&self, point: &[Rat]) -> Result<bool> {
        if point.len() != self.variables.len() {
            return Err(Error::InvalidArgument(format!(
                "point has {} coordinates, system has {} variables",
                point.len(),
                self.variables.len()
            )));
        }
        for row in &self.rows {
            let lhs: Rat = row
                .coeffs
                .iter()
                .zip(point)
                .map(|(c, x)| c.clone() * x.clone())
                .fold(Rat::zero(), |a, b| a + b);
            let ok = match row.relation {
                Relation::Le => lhs <= row.constant,
                Relation::Ge => lhs >= row.constant,
                Relation::Eq => lhs == row.constant,
            };
            if !ok {
                return Ok(false);
            }
        }
        Ok(true)
    }

    // -- text format ----------------------------------------------------------

    /// Parse the one-inequality-per-line format, e.g.
    /// `2*s_12 + s_1 >= 0.85`. `#` starts a comment.
    pub fn parse(text: &str) -> Result<InequalitySystem> {
        let mut variables: Vec<String> = Vec::new();
        let mut parsed: Vec<(HashMap<String, Rat>, Relation, Rat, usize)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let lineno = lineno + 1;
            let (rel, rel_str) = if line.contains("<=") {
                (Relation::Le, "<=")
            } else if line.contains(">=") {
                (Relation::Ge, ">=")
            } else if line.contains("==") {
                (Relation::Eq, "==")
            } else if line.contains('=') {
                (Relation::Eq, "=")
            } else {
                return Err(Error::ParseError {
                    line: lineno,
                    message: "no relation (<=, >=, =) found".into(),
                });
            };
            let mut sides = line.splitn(2, rel_str);
            let lhs = sides.next().unwrap();
            let rhs = sides.next().ok_or(Error::ParseError {
                line: lineno,
                message: "missing right-hand side".into(),
            })?;
            let (lc, lk) = parse_expr(lhs, lineno)?;
            let (rc, rk) = parse_expr(rhs, lineno)?;
            // move variables left, constants right
            let mut coeffs = lc;
            for (v, c) in rc {
                *coeffs.entry(v).or_insert_with(Rat::zero) -= c;
            }
            let constant = rk - lk;
            for v in coeffs.keys() {
                if !variables.contains(v) {
                    variables.push(v.clone());
                }
            }
            parsed.push((coeffs, rel, constant, lineno));
        }
        let mut sys = InequalitySystem::new(variables);
        for (coeffs, rel, constant, _) in parsed {
            let mut row = vec![Rat::zero(); sys.variables.len()];
            for (v, c) in coeffs {
                let idx = sys.variables.iter().position(|x| *x == v).unwrap();
                row[idx] = c;
            }
            sys.push_row(row, rel, constant)?;
        }
        Ok(sys)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            let mut terms: Vec<String> = Vec::new();
            for (c, v) in row.coeffs.iter().zip(&self.variables) {
                if c.is_zero() {
                    continue;
                }
                if c.is_one() {
                    terms.push(v.clone());
                } else if (-c.clone()).is_one() {
                    terms.push(format!("-{v}"));
                } else {
                    terms.push(format!("{}*{}", format_rat(c), v));
                }
            }
            let lhs = if terms.is_empty() {
                "0".to_string()
            } else {
                terms
                    .iter()
                    .enumerate()
                    .map(|(i, t)| {
                        if i == 0 {
                            t.clone()
                        } else if let Some(stripped) = t.strip_prefix('-') {
                            format!(" - {stripped}")
                        } else {
                            format!(" + {t}")
                        }
                    })
                    .collect()
            };
            out.push_str(&format!(
                "{lhs} {} {}\n",
                row.relation.as_str(),
                format_rat(&row.constant)
            ));
        }
        out
    }
}

fn row_ok_scaled(row: &LinearRow, numerators: &[i64], denominator: i64) -> bool {
    use num_traits::ToPrimitive;
    let fast = || -> Option<bool> {
        let mut lhs: i128 = 0;
        for (c, &n) in row.coeffs.iter().zip(numerators) {
            if !c.denom().is_one() {
                return None;
            }
            let cn = c.numer().to_i128()?;
            lhs = lhs.checked_add(cn.checked_mul(n as i128)?)?;
        }
        let p = row.constant.numer().to_i128()?;
        let q = row.constant.denom().to_i128()?;
        // lhs/den REL p/q  <=>  q*lhs REL p*den   (q, den > 0)
        let a = q.checked_mul(lhs)?;
        let b = p.checked_mul(denominator as i128)?;
        Some(match row.relation {
            Relation::Le => a <= b,
            Relation::Ge => a >= b,
            Relation::Eq => a == b,
        })
    };
    fast().unwrap_or_else(|| {
        let den = rat_int(denominator);
        let lhs: Rat = row
            .coeffs
            .iter()
            .zip(numerators)
            .map(|(c, &n)| c.clone() * rat_int(n) / den.clone())
            .fold(Rat::zero(), |a, b| a + b);
        match row.relation {
            Relation::Le => lhs <= row.constant,
            Relation::Ge => lhs >= row.constant,
            Relation::Eq => lhs == row.constant,
        }
    })
}

fn parse_expr(expr: &str, lineno: usize) -> Result<(HashMap<String, Rat>, Rat)> {
    let mut coeffs: HashMap<String, Rat> = HashMap::new();
    let mut constant = Rat::zero();
    // tokenize into signed terms
    let mut terms: Vec<(i32, String)> = Vec::new();
    let mut sign = 1;
    let mut cur = String::new();
    for ch in expr.chars() {
        match ch {
            '+' | '-' => {
                if cur.trim().is_empty() && terms.is_empty() && coeffs.is_empty() {
                    // leading sign
                    if ch == '-' {
                        sign = -sign;
                    }
                    continue;
                }
                if cur.trim().is_empty() {
                    // consecutive operator -> sign flip
                    if ch == '-' {
                        sign = -sign;
                    }
                    continue;
                }
                terms.push((sign, cur.trim().to_string()));
                cur.clear();
                sign = if ch == '-' { -1 } else { 1 };
            }
            _ => cur.push(ch),
        }
    }
    if !cur.trim().is_empty() {
        terms.push((sign, cur.trim().to_string()));
    }
    if terms.is_empty() {
        return Err(Error::ParseError {
            line: lineno,
            message: "empty expression".into(),
        });
    }
    for (sgn, term) in terms {
        let sgn = rat_int(sgn as i64);
        if let Some((num, var)) = term.split_once('*') {
            let c = parse_decimal(num).map_err(|e| Error::ParseError {
                line: lineno,
                message: e.to_string(),
            })?;
            let var = var.trim().to_string();
            if !is_ident(&var) {
                return Err(Error::ParseError {
                    line: lineno,
                    message: format!("bad variable name `{var}`"),
                });
            }
            *coeffs.entry(var).or_insert_with(Rat::zero) += sgn * c;
        } else if is_ident(&term) {
            *coeffs.entry(term).or_insert_with(Rat::zero) += sgn;
        } else {
            let c = parse_decimal(&term).map_err(|e| Error::ParseError {
                line: lineno,
                message: e.to_string(),
            })?;
            constant += sgn * c;
        }
    }
    Ok((coeffs, constant))
}

fn is_ident(s: &str) -> bool {
    !s.is_empty()
        && s.chars().next().unwrap().is_ascii_alphabetic()
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

// order: coeffs . x >= constant
fn canonize(coeffs: &[Rat], constant: &Rat) -> CanonRow {
    scale_primitive(coeffs.to_vec(), constant.clone())
}

fn canonize_neg(coeffs: &[Rat], constant: &Rat) -> CanonRow {
    scale_primitive(
        coeffs.iter().map(|c| -c.clone()).collect(),
        -constant.clone(),
    )
}

fn scale_primitive(coeffs: Vec<Rat>, constant: Rat) -> CanonRow {
    // common denominator over the coefficients only
    let mut lcm = BigInt::one();
    for c in &coeffs {
        lcm = lcm.lcm(c.denom());
    }
    let mut ints: Vec<BigInt> = coeffs
        .iter()
        .map(|c| c.numer() * (&lcm / c.denom()))
        .collect();
    let mut g = BigInt::zero();
    for c in &ints {
        g = g.gcd(c);
    }
    let scale = if g.is_zero() {
        Rat::from_integer(lcm)
    } else {
        for c in &mut ints {
            *c /= &g;
        }
        Rat::new(lcm, g)
    };
    CanonRow {
        coeffs: ints,
        constant: constant * scale,
    }
}

/// Duplicate removal, pairwise dominance (same coefficients keep the largest
/// constant), and trivially-true row removal. Contradiction rows are kept.
fn reduce(rows: Vec<CanonRow>) -> Vec<CanonRow> {
    let mut best: HashMap<Vec<BigInt>, Rat> = HashMap::new();
    let mut order: Vec<Vec<BigInt>> = Vec::new();
    for row in rows {
        if row.is_trivially_true() {
            continue;
        }
        match best.get_mut(&row.coeffs) {
            Some(k) => {
                if row.constant > *k {
                    *k = row.constant;
                }
            }
            None => {
                order.push(row.coeffs.clone());
                best.insert(row.coeffs, row.constant);
            }
        }
    }
    order
        .into_iter()
        .map(|coeffs| {
            let constant = best[&coeffs].clone();
            CanonRow { coeffs, constant }
        })
        .collect()
}

fn eliminate_canonical(rows: Vec<CanonRow>, idx: usize) -> Result<Vec<CanonRow>> {
    let mut pos: Vec<&CanonRow> = Vec::new();
    let mut neg: Vec<&CanonRow> = Vec::new();
    let mut zero: Vec<CanonRow> = Vec::new();
    for row in &rows {
        if row.coeffs[idx].is_positive() {
            pos.push(row);
        } else if row.coeffs[idx].is_negative() {
            neg.push(row);
        } else {
            let mut r = row.clone();
            r.coeffs.remove(idx);
            zero.push(r);
        }
    }
    let projected = zero.len() + pos.len() * neg.len();
    if projected > ROW_CAP {
        return Err(Error::RowBlowup {
            rows: projected,
            cap: ROW_CAP,
        });
    }
    let mut out = zero;
    for p in &pos {
        let a = &p.coeffs[idx]; // > 0
        for n in &neg {
            let b = &n.coeffs[idx]; // < 0
                                    // (-b) * p + a * n has zero coefficient at idx
            let mb = -b.clone();
            let mut coeffs: Vec<BigInt> = Vec::with_capacity(p.coeffs.len() - 1);
            for (j, (pc, nc)) in p.coeffs.iter().zip(&n.coeffs).enumerate() {
                if j == idx {
                    continue;
                }
                coeffs.push(&mb * pc + a * nc);
            }
            let constant =
                Rat::from_integer(mb) * &p.constant + Rat::from_integer(a.clone()) * &n.constant;
            out.push(scale_primitive_int(coeffs, constant));
        }
    }
    Ok(reduce(out))
}

fn scale_primitive_int(coeffs: Vec<BigInt>, constant: Rat) -> CanonRow {
    let mut g = BigInt::zero();
    for c in &coeffs {
        g = g.gcd(c);
    }
    if g.is_zero() || g.is_one() {
        return CanonRow { coeffs, constant };
    }
    CanonRow {
        coeffs: coeffs.into_iter().map(|c| c / &g).collect(),
        constant: constant / Rat::from_integer(g),
    }
}

// ---------------------------------------------------------------------------
// system builders
// ---------------------------------------------------------------------------

pub fn sigma_var(mask: SubsetMask) -> String {
    format!("s_{}", mask.label())
}

fn delta_var(i: SubsetMask, j: SubsetMask) -> String {
    format!("d_{}_{}", i.label(), j.label())
}

/// The sigma allocation system for K centers: nonnegativity, total mass at
/// most 1, and for every nonempty subset S of centers
/// `sum_{I >= S} sigma_I >= 1 - sum_{k in S} eps_k` (omitted when the bound
/// is not positive). Returned in weak normal form.
pub fn sigma_system(k: usize, epsilons: &[Rat]) -> Result<InequalitySystem> {
    if k == 0 || epsilons.len() != k {
        return Err(Error::InvalidArgument(format!(
            "need k >= 1 and {k} epsilons, got {}",
            epsilons.len()
        )));
    }
    let subsets: Vec<SubsetMask> = SubsetMask::nonempty_subsets(k).collect();
    let variables: Vec<String> = subsets.iter().map(|&m| sigma_var(m)).collect();
    let mut sys = InequalitySystem::new(variables);
    let n = subsets.len();
    for i in 0..n {
        let mut row = vec![Rat::zero(); n];
        row[i] = Rat::one();
        sys.push_row(row, Relation::Ge, Rat::zero())?;
    }
    sys.push_row(vec![Rat::one(); n], Relation::Le, Rat::one())?;
    for &s in &subsets {
        let mut bound = Rat::one();
        for c in s.indices() {
            bound -= epsilons[c - 1].clone();
        }
        if !bound.is_positive() {
            continue;
        }
        let row: Vec<Rat> = subsets
            .iter()
            .map(|&i| {
                if i.is_superset_of(s) {
                    Rat::one()
                } else {
                    Rat::zero()
                }
            })
            .collect();
        sys.push_row(row, Relation::Ge, bound)?;
    }
    Ok(sys.normalized())
}

/// Stable descending sort of the epsilons; returns 1-based center indices.
pub fn epsilon_order(epsilons: &[Rat]) -> Vec<usize> {
    let mut idx: Vec<usize> = (1..=epsilons.len()).collect();
    idx.sort_by(|&a, &b| epsilons[b - 1].cmp(&epsilons[a - 1]).then(a.cmp(&b)));
    idx
}

/// The nested subscheme families `J_i = {pi(i), ..., pi(K)}` and their mass
/// targets `c_i = eps_{pi(i-1)} - eps_{pi(i)}` (with `eps_{pi(0)} = 1`).
pub fn nested_families(k: usize, epsilons: &[Rat]) -> (Vec<SubsetMask>, Vec<Rat>) {
    let pi = epsilon_order(epsilons);
    let mut families = Vec::with_capacity(k);
    let mut targets = Vec::with_capacity(k);
    let mut prev = Rat::one();
    for i in 0..k {
        let fam = SubsetMask::from_indices(&pi[i..]).expect("indices validated");
        let cur = epsilons[pi[i] - 1].clone();
        families.push(fam);
        targets.push(prev.clone() - cur.clone());
        prev = cur;
    }
    (families, targets)
}

/// The delta-splitting system deciding whether a sigma allocation can fund
/// the nested subscheme families: variables are all `s_I` plus
/// `d_{I,J_i}` for intersecting pairs, with
///   `sum_i d_{I,J_i} <= s_I` for every I, and
///   `sum_{I : k in I} d_{I,J_i} >= c_i` for every i and every `k in J_i`,
/// plus nonnegativity. Families J with zero target are modeled with
/// delta = 0 and omitted.
pub fn delta_split_system(k: usize, epsilons: &[Rat]) -> Result<InequalitySystem> {
    if k == 0 || epsilons.len() != k {
        return Err(Error::InvalidArgument(format!(
            "need k >= 1 and {k} epsilons, got {}",
            epsilons.len()
        )));
    }
    let subsets: Vec<SubsetMask> = SubsetMask::nonempty_subsets(k).collect();
    let (families, targets) = nested_families(k, epsilons);
    let mut variables: Vec<String> = subsets.iter().map(|&m| sigma_var(m)).collect();
    let mut dpairs: Vec<(SubsetMask, usize)> = Vec::new();
    for (fi, &fam) in families.iter().enumerate() {
        for &i in &subsets {
            if i.intersects(fam) {
                dpairs.push((i, fi));
                variables.push(delta_var(i, fam));
            }
        }
    }
    let mut sys = InequalitySystem::new(variables);
    let nv = subsets.len() + dpairs.len();
    let didx = |i: SubsetMask, fi: usize| -> usize {
        subsets.len() + dpairs.iter().position(|&(a, b)| a == i && b == fi).unwrap()
    };
    // nonnegativity
    for v in 0..nv {
        let mut row = vec![Rat::zero(); nv];
        row[v] = Rat::one();
        sys.push_row(row, Relation::Ge, Rat::zero())?;
    }
    // per-subset mass: sum_i d_{I,J_i} <= s_I
    for (si, &i) in subsets.iter().enumerate() {
        let mut row = vec![Rat::zero(); nv];
        row[si] = -Rat::one();
        let mut any = false;
        for (fi, &fam) in families.iter().enumerate() {
            if i.intersects(fam) {
                row[didx(i, fi)] = Rat::one();
                any = true;
            }
        }
        if any {
            sys.push_row(row, Relation::Le, Rat::zero())?;
        }
    }
    // per-family coverage: for every k in J_i: sum_{I contains k} d_{I,J_i} >= c_i
    for (fi, &fam) in families.iter().enumerate() {
        for center in fam.indices() {
            let mut row = vec![Rat::zero(); nv];
            for &i in &subsets {
                if i.contains(center) && i.intersects(fam) {
                    row[didx(i, fi)] = Rat::one();
                }
            }
            sys.push_row(row, Relation::Ge, targets[fi].clone())?;
        }
    }
    Ok(sys)
}

/// The four reduced conditions the K=3 delta system projects to (plus sigma
/// nonnegativity), over the seven sigma variables.
pub fn k3_reduced_conditions(epsilons: &[Rat]) -> Result<InequalitySystem> {
    if epsilons.len() != 3 {
        return Err(Error::InvalidArgument("need exactly 3 epsilons".into()));
    }
    let pi = epsilon_order(epsilons);
    let (p1, p2, p3) = (pi[0], pi[1], pi[2]);
    let m = |ix: &[usize]| SubsetMask::from_indices(ix).unwrap();
    let subsets: Vec<SubsetMask> = SubsetMask::nonempty_subsets(3).collect();
    let variables: Vec<String> = subsets.iter().map(|&s| sigma_var(s)).collect();
    let mut sys = InequalitySystem::new(variables);
    for i in 0..subsets.len() {
        let mut row = vec![Rat::zero(); subsets.len()];
        row[i] = Rat::one();
        sys.push_row(row, Relation::Ge, Rat::zero())?;
    }
    let one = Rat::one();
    let e = |c: usize| epsilons[c - 1].clone();
    let full = m(&[1, 2, 3]);
    let mut push = |masks: &[(SubsetMask, i64)], bound: Rat| -> Result<()> {
        let mut row = vec![Rat::zero(); subsets.len()];
        for &(mask, c) in masks {
            let idx = subsets.iter().position(|&s| s == mask).unwrap();
            row[idx] += rat_int(c);
        }
        sys.push_row(row, Relation::Ge, bound)
    };
    push(
        &[
            (full, 1),
            (m(&[p1, p2]), 1),
            (m(&[p1, p3]), 1),
            (m(&[p1]), 1),
        ],
        one.clone() - e(p1),
    )?;
    push(
        &[
            (full, 1),
            (m(&[p1, p2]), 1),
            (m(&[p2, p3]), 1),
            (m(&[p2]), 1),
        ],
        one.clone() - e(p2),
    )?;
    push(
        &[
            (full, 1),
            (m(&[p1, p3]), 1),
            (m(&[p2, p3]), 1),
            (m(&[p3]), 1),
        ],
        one.clone() - e(p3),
    )?;
    push(
        &[
            (full, 2),
            (m(&[p1, p2]), 2),
            (m(&[p1, p3]), 1),
            (m(&[p2, p3]), 1),
            (m(&[p1]), 1),
            (m(&[p2]), 1),
            (m(&[p3]), 1),
        ],
        rat_int(2) - e(p1) - e(p3),
    )?;
    Ok(sys)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(s: &str) -> Rat {
        parse_decimal(s).unwrap()
    }

    #[test]
    fn decimal_parsing_is_exact() {
        assert_eq!(r("0.85"), Rat::new(BigInt::from(17), BigInt::from(20)));
        assert_eq!(r("-2"), rat_int(-2));
        assert_eq!(r("3/4"), Rat::new(BigInt::from(3), BigInt::from(4)));
        assert!(parse_decimal("x").is_err());
    }

    #[test]
    fn textbook_projection() {
        // {x >= 1, x <= 2, x + y <= 3} eliminate x -> binding row y <= 2
        let sys = InequalitySystem::parse("x >= 1\nx <= 2\nx + y <= 3\n").unwrap();
        let proj = sys.eliminate("x").unwrap();
        assert_eq!(proj.variables(), &["y".to_string()]);
        // normalized >= form: -y >= -2; the trivially-true 1 <= 2 row is dropped
        assert_eq!(proj.rows().len(), 1);
        assert!(proj.check_point(&[rat_int(2)]).unwrap());
        assert!(!proj.check_point(&[rat_int(3)]).unwrap());
    }

    #[test]
    fn unknown_variable_errors() {
        let sys = InequalitySystem::parse("x >= 1\n").unwrap();
        assert!(matches!(sys.eliminate("z"), Err(Error::UnknownVariable(_))));
    }

    #[test]
    fn parse_reports_line_numbers() {
        let err = InequalitySystem::parse("x >= 1\nx + ? <= 2\n").unwrap_err();
        match err {
            Error::ParseError { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn empty_system_is_feasible() {
        let sys = InequalitySystem::parse("").unwrap();
        assert!(sys.is_feasible().unwrap().is_feasible());
    }

    #[test]
    fn contradictory_pair_is_infeasible() {
        let sys = InequalitySystem::parse("x >= 2\nx <= 1\n").unwrap();
        assert!(!sys.is_feasible().unwrap().is_feasible());
    }

    #[test]
    fn witness_satisfies_original_system() {
        let sys = InequalitySystem::parse("x + y >= 1\nx - y <= 0.5\ny <= 0.75\nx >= 0\n").unwrap();
        match sys.is_feasible().unwrap() {
            Feasibility::Feasible { witness } => {
                let point: Vec<Rat> = sys
                    .variables()
                    .iter()
                    .map(|v| witness.iter().find(|(n, _)| n == v).unwrap().1.clone())
                    .collect();
                assert!(sys.check_point(&point).unwrap());
            }
            Feasibility::Infeasible => panic!("should be feasible"),
        }
    }

    #[test]
    fn sigma_system_k1_shape() {
        let sys = sigma_system(1, &[r("0.2")]).unwrap();
        assert_eq!(sys.variables(), &["s_1".to_string()]);
        assert_eq!(sys.rows().len(), 2); // s_1 >= 0.8 and s_1 <= 1
        assert!(sys.check_point(&[r("0.9")]).unwrap());
        assert!(!sys.check_point(&[r("0.7")]).unwrap());
    }

    #[test]
    fn sigma_system_k2_shape() {
        let sys = sigma_system(2, &[r("0.05"), r("0.15")]).unwrap();
        assert_eq!(sys.variables().len(), 3);
        // seven raw rows; dominance folds s_12 >= 0 into s_12 >= 0.8
        assert_eq!(sys.rows().len(), 6);
        // all three subset constraints are present and binding
        let binding = sys
            .rows()
            .iter()
            .filter(|r| r.constant.is_positive())
            .count();
        assert_eq!(binding, 3);
        // the direct-substitution point from the epsilon ordering
        // s_1 = eps2 - eps1, s_12 = 1 - eps2, s_2 = 0
        let point = vec![r("0.1"), Rat::zero(), r("0.85")];
        assert!(sys.check_point(&point).unwrap());
        // violating any subset bound is caught
        assert!(!sys
            .check_point(&[r("0.2"), Rat::zero(), r("0.75")])
            .unwrap());
    }

    #[test]
    fn sigma_system_k2_zero_eps_forces_full_mass() {
        let sys = sigma_system(2, &[Rat::zero(), Rat::zero()]).unwrap();
        assert!(sys
            .check_point(&[Rat::zero(), Rat::zero(), Rat::one()])
            .unwrap());
        assert!(!sys.check_point(&[r("0.1"), Rat::zero(), r("0.9")]).unwrap());
        assert!(sys.is_feasible().unwrap().is_feasible());
    }

    #[test]
    fn sigma_system_k3_has_rows_for_all_subsets() {
        let sys = sigma_system(3, &[r("0.1"), r("0.1"), r("0.1")]).unwrap();
        assert_eq!(sys.variables().len(), 7);
        // all seven subset constraints have positive bounds here
        let binding = sys
            .rows()
            .iter()
            .filter(|r| r.constant.is_positive())
            .count();
        assert_eq!(binding, 7);
        assert_eq!(sys.rows().len(), 14);
    }

    #[test]
    fn elimination_order_does_not_change_feasibility() {
        let text = "x + y + z <= 1\nx - y >= -0.25\nz >= 0.5\nx >= 0\ny >= 0\n";
        let sys = InequalitySystem::parse(text).unwrap();
        let orders = [["x", "y", "z"], ["z", "y", "x"], ["y", "x", "z"]];
        let verdicts: Vec<bool> = orders
            .iter()
            .map(|ord| {
                let projected = sys.eliminate_all(ord).unwrap();
                !projected
                    .rows()
                    .iter()
                    .any(|r| r.coeffs.iter().all(|c| c.is_zero()) && r.constant.is_positive())
            })
            .collect();
        assert!(verdicts.iter().all(|&v| v == verdicts[0]));
        assert_eq!(verdicts[0], sys.is_feasible().unwrap().is_feasible());
    }

    #[test]
    fn k2_delta_split_matches_pairwise_conditions() {
        // eps1 < eps2: splitting is possible exactly when both pairwise
        // sigma conditions hold
        let eps = [r("0.05"), r("0.15")];
        let sys = delta_split_system(2, &eps).unwrap();
        let dvars: Vec<&str> = sys
            .variables()
            .iter()
            .filter(|v| v.starts_with("d_"))
            .map(|s| s.as_str())
            .collect();
        let projected = sys.eliminate_all(&dvars).unwrap();
        // good point: s_1 = eps2-eps1, s_2 = 0, s_12 = 1-eps2
        assert!(projected
            .check_point(&[r("0.1"), Rat::zero(), r("0.85")])
            .unwrap());
        // bad point: violates s_2 + s_12 >= 1 - eps2
        assert!(!projected
            .check_point(&[r("0.9"), Rat::zero(), r("0.1")])
            .unwrap());
    }
}
