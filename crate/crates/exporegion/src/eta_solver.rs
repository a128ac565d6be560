//! The single-link exponent functions
//! `eta_l(R) = max { I(U;Y_l) : P(U|Y_{l-1}), I(U;Y_{l-1}) <= R }`.
//!
//! Strategy: sweep the Lagrange multiplier `lam` over `[0,1]`, at each `lam`
//! run alternating maximization of `I(U;Y) - lam * I(U;X)` from several
//! random starts, collect every converged `(I(U;X), I(U;Y))` pair, and take
//! the upper concave envelope. Because `eta_l` is concave and nondecreasing,
//! the envelope traces the whole curve; point queries add a local refinement
//! at the envelope slope bracketing the queried rate.
//!
//! The inner problem is the information-bottleneck functional; the
//! fixed-point update is `q(u|x) ~ r(u) * exp(-KL(W(.|x) || s(.|u)) / lam)`,
//! with the hard assignment limit at `lam = 0`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envelope::{interp, slope_at, upper_concave_envelope};
use crate::source_model::MarkovChainSource;
use crate::{Error, Result};

/// Auxiliary-alphabet cardinality choice. `Auto` means `|Y_{l-1}| + 1`,
/// the sufficient cardinality for the maximization. Serialized as the
/// string `"auto"` or a plain integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum USize {
    Auto,
    Fixed(usize),
}

impl Serialize for USize {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            USize::Auto => s.serialize_str("auto"),
            USize::Fixed(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for USize {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl serde::de::Visitor<'_> for V {
            type Value = USize;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("\"auto\" or a positive integer")
            }
            fn visit_str<E: serde::de::Error>(self, v: &str) -> std::result::Result<USize, E> {
                if v == "auto" {
                    Ok(USize::Auto)
                } else {
                    Err(E::custom(format!("expected \"auto\", got {v:?}")))
                }
            }
            fn visit_u64<E: serde::de::Error>(self, v: u64) -> std::result::Result<USize, E> {
                if v == 0 {
                    Err(E::custom("u_size must be positive"))
                } else {
                    Ok(USize::Fixed(v as usize))
                }
            }
            fn visit_i64<E: serde::de::Error>(self, v: i64) -> std::result::Result<USize, E> {
                if v <= 0 {
                    Err(E::custom("u_size must be positive"))
                } else {
                    Ok(USize::Fixed(v as usize))
                }
            }
        }
        d.deserialize_any(V)
    }
}

/// Solver configuration; the JSON form is
/// `{"restarts": 32, "lambda_samples": 65, "tol": 1e-9, "u_size": "auto", "seed": 0}`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub restarts: usize,
    pub lambda_samples: usize,
    pub tol: f64,
    pub u_size: USize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            restarts: 32,
            lambda_samples: 65,
            tol: 1e-9,
            u_size: USize::Auto,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn with_u_size(mut self, u: usize) -> Self {
        self.u_size = USize::Fixed(u);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn resolve_u(&self, input_size: usize) -> usize {
        match self.u_size {
            USize::Auto => input_size + 1,
            USize::Fixed(u) => u.max(1),
        }
    }
}

/// Auxiliary channel `P(U | Y_{l-1})`, the optimization variable.
#[derive(Debug, Clone)]
pub struct AuxChannel {
    /// `rows[x][u] = P(U = u | X = x)`, row-stochastic.
    pub rows: Vec<Vec<f64>>,
}

impl AuxChannel {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        for (x, row) in rows.iter().enumerate() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 || row.iter().any(|&p| p < -1e-15) {
                return Err(Error::InvalidChannel(format!(
                    "auxiliary row {x} is not a distribution"
                )));
            }
        }
        Ok(AuxChannel { rows })
    }

    pub fn u_size(&self) -> usize {
        self.rows.first().map_or(0, |r| r.len())
    }
}

/// `(I(U;Y_{l-1}), I(U;Y_l))` in bits for a concrete auxiliary channel.
/// Any such pair is a feasible point of the trade-off, so the solved
/// envelope must dominate it; tests lean on that.
pub fn aux_information(
    source: &MarkovChainSource,
    l: usize,
    aux: &AuxChannel,
) -> Result<(f64, f64)> {
    let problem = LinkProblem::new(source, l)?;
    if aux.rows.len() != problem.nx() {
        return Err(Error::InvalidChannel(format!(
            "auxiliary has {} rows, Y_{} alphabet is {}",
            aux.rows.len(),
            l - 1,
            problem.nx()
        )));
    }
    Ok(problem.pair_information(&aux.rows))
}

/// Concave envelope of one link's `(rate, value)` trade-off.
#[derive(Debug, Clone)]
pub struct EtaEnvelope {
    pub link: usize,
    breakpoints: Vec<(f64, f64)>,
    pub saturation_rate: f64,
    pub saturation_value: f64,
}

impl EtaEnvelope {
    /// Run the full Lagrangian sweep for link `l` of `source`.
    pub fn solve(source: &MarkovChainSource, l: usize, cfg: &SolverConfig) -> Result<Self> {
        let problem = LinkProblem::new(source, l)?;
        let points = problem.sweep(cfg);
        Ok(EtaEnvelope {
            link: l,
            breakpoints: upper_concave_envelope(&points),
            saturation_rate: problem.sat_rate,
            saturation_value: problem.sat_value,
        })
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    /// Evaluate the envelope at rate `r` (saturates at `H(Y_{l-1})`).
    pub fn eval(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        if r >= self.saturation_rate {
            return self.saturation_value;
        }
        interp(&self.breakpoints, r)
            .clamp(0.0, self.saturation_value)
            .min(r)
    }

    fn absorb(&mut self, extra: &[(f64, f64)]) {
        let mut pts = self.breakpoints.clone();
        pts.extend_from_slice(extra);
        self.breakpoints = upper_concave_envelope(&pts);
    }
}

/// Sampled curve `R -> eta_l(R)` with its saturation data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EtaCurve {
    pub link_index: usize,
    pub samples: Vec<(f64, f64)>,
    pub saturation_rate: f64,
    pub saturation_value: f64,
}

// ---------------------------------------------------------------------------
// alternating maximization
// ---------------------------------------------------------------------------

struct LinkProblem {
    px: Vec<f64>,
    w: Vec<Vec<f64>>,
    log_w: Vec<Vec<f64>>,
    ny: usize,
    sat_rate: f64,
    sat_value: f64,
}

const MAX_AM_ITERS: usize = 4000;

impl LinkProblem {
    fn new(source: &MarkovChainSource, l: usize) -> Result<Self> {
        if l == 0 || l > source.k_hops() {
            return Err(Error::IndexOutOfRange(format!(
                "link {l} outside 1..={}",
                source.k_hops()
            )));
        }
        let px = source.marginal(l - 1)?.probs().to_vec();
        let ch = source.link(l)?;
        let ny = ch.output_size();
        let w: Vec<Vec<f64>> = (0..px.len())
            .map(|x| (0..ny).map(|y| ch.prob(x, y)).collect())
            .collect();
        let log_w = w
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&p| if p > 0.0 { p.ln() } else { f64::NEG_INFINITY })
                    .collect()
            })
            .collect();
        let sat_rate = source.marginal(l - 1)?.entropy();
        let sat_value = source.link_mutual_information(l)?;
        Ok(LinkProblem {
            px,
            w,
            log_w,
            ny,
            sat_rate,
            sat_value,
        })
    }

    fn nx(&self) -> usize {
        self.px.len()
    }

    /// One full sweep: all (lambda, restart) tasks, deterministic merge.
    fn sweep(&self, cfg: &SolverConfig) -> Vec<(f64, f64)> {
        let nu = cfg.resolve_u(self.nx());
        let nl = cfg.lambda_samples.max(2);
        let tasks: Vec<(usize, usize)> = (0..nl)
            .flat_map(|li| (0..cfg.restarts.max(1)).map(move |ri| (li, ri)))
            .collect();
        let mut points: Vec<(f64, f64)> = tasks
            .par_iter()
            .map(|&(li, ri)| {
                let lam = li as f64 / (nl - 1) as f64;
                let q0 = self.initial_channel(nu, cfg.seed, li as u64, ri as u64);
                self.maximize(lam, q0, cfg.tol)
            })
            .collect();
        points.push((0.0, 0.0));
        points.push((self.sat_rate, self.sat_value));
        points
    }

    fn refine_at(&self, env: &mut EtaEnvelope, r: f64, cfg: &SolverConfig) {
        let nu = cfg.resolve_u(self.nx());
        let restarts = cfg.restarts.clamp(1, 16);
        let mut before = env.eval(r);
        for round in 0..10u64 {
            let lam = slope_at(env.breakpoints(), r).clamp(0.0, 1.0);
            let extra: Vec<(f64, f64)> = (0..restarts)
                .into_par_iter()
                .map(|ri| {
                    let q0 = self.initial_channel(nu, cfg.seed, 0x5EED + round, ri as u64);
                    self.maximize(lam, q0, cfg.tol)
                })
                .collect();
            env.absorb(&extra);
            let after = env.eval(r);
            if after - before < 1e-8 {
                break;
            }
            before = after;
        }
    }

    fn initial_channel(&self, nu: usize, seed: u64, li: u64, ri: u64) -> Vec<Vec<f64>> {
        let nx = self.nx();
        if ri == 0 && nu >= nx {
            // near-deterministic identity start; reaches the saturation corner
            let mut q = vec![vec![0.02 / nu as f64; nu]; nx];
            for (x, row) in q.iter_mut().enumerate() {
                row[x] += 0.98;
            }
            return q;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed, li, ri));
        (0..nx)
            .map(|_| {
                let mut row: Vec<f64> =
                    (0..nu).map(|_| -rng.gen::<f64>().max(1e-12).ln()).collect();
                let s: f64 = row.iter().sum();
                row.iter_mut().for_each(|v| *v /= s);
                row
            })
            .collect()
    }

    /// Alternating maximization of `I(U;Y) - lam * I(U;X)` from `q0`.
    /// Returns the achieved `(I(U;X), I(U;Y))` in bits.
    fn maximize(&self, lam: f64, mut q: Vec<Vec<f64>>, tol: f64) -> (f64, f64) {
        let nx = self.nx();
        let nu = q[0].len();
        let mut prev_obj = f64::NEG_INFINITY;
        let mut r = vec![0.0; nu];
        let mut s = vec![vec![0.0; self.ny]; nu];
        for _ in 0..MAX_AM_ITERS {
            // r(u) and s(y|u)
            r.iter_mut().for_each(|v| *v = 0.0);
            s.iter_mut()
                .for_each(|row| row.iter_mut().for_each(|v| *v = 0.0));
            for x in 0..nx {
                for u in 0..nu {
                    let m = self.px[x] * q[x][u];
                    r[u] += m;
                    for y in 0..self.ny {
                        s[u][y] += m * self.w[x][y];
                    }
                }
            }
            for u in 0..nu {
                if r[u] > 1e-300 {
                    for y in 0..self.ny {
                        s[u][y] /= r[u];
                    }
                } else {
                    s[u].iter_mut().for_each(|v| *v = 1.0 / self.ny as f64);
                }
            }
            // d(x,u) = KL(W(.|x) || s(.|u)) in nats
            let mut d = vec![vec![0.0; nu]; nx];
            for x in 0..nx {
                for u in 0..nu {
                    let mut acc = 0.0;
                    for y in 0..self.ny {
                        let wxy = self.w[x][y];
                        if wxy > 0.0 {
                            let sy = s[u][y].max(1e-300);
                            acc += wxy * (self.log_w[x][y] - sy.ln());
                        }
                    }
                    d[x][u] = acc;
                }
            }
            // update q
            if lam <= 0.0 {
                for x in 0..nx {
                    let best = (0..nu)
                        .min_by(|&a, &b| d[x][a].total_cmp(&d[x][b]))
                        .unwrap();
                    q[x].iter_mut().for_each(|v| *v = 0.0);
                    q[x][best] = 1.0;
                }
            } else {
                for x in 0..nx {
                    let mut logq: Vec<f64> = (0..nu)
                        .map(|u| {
                            if r[u] > 1e-300 {
                                r[u].ln() - d[x][u] / lam
                            } else {
                                f64::NEG_INFINITY
                            }
                        })
                        .collect();
                    let mx = logq.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    if !mx.is_finite() {
                        // all clusters died; restart from uniform
                        q[x].iter_mut().for_each(|v| *v = 1.0 / nu as f64);
                        continue;
                    }
                    let mut z = 0.0;
                    for v in logq.iter_mut() {
                        *v = (*v - mx).exp();
                        z += *v;
                    }
                    for (u, v) in logq.iter().enumerate() {
                        q[x][u] = v / z;
                    }
                }
            }
            let (iux, iuy) = self.pair_information(&q);
            let obj = iuy - lam * iux;
            if (obj - prev_obj).abs() < tol {
                break;
            }
            prev_obj = obj;
        }
        let (iux, iuy) = self.pair_information(&q);
        (
            iux.clamp(0.0, self.sat_rate),
            iuy.clamp(0.0, self.sat_value).min(iux),
        )
    }

    /// `(I(U;X), I(U;Y))` in bits for the joint induced by `q`.
    fn pair_information(&self, q: &[Vec<f64>]) -> (f64, f64) {
        let nx = self.nx();
        let nu = q[0].len();
        let mut r = vec![0.0; nu];
        let mut juy = vec![vec![0.0; self.ny]; nu];
        for x in 0..nx {
            for u in 0..nu {
                let m = self.px[x] * q[x][u];
                r[u] += m;
                for y in 0..self.ny {
                    juy[u][y] += m * self.w[x][y];
                }
            }
        }
        let py: Vec<f64> = (0..self.ny)
            .map(|y| (0..nu).map(|u| juy[u][y]).sum())
            .collect();
        let mut iux = 0.0;
        for x in 0..nx {
            for u in 0..nu {
                let m = self.px[x] * q[x][u];
                if m > 0.0 && r[u] > 0.0 {
                    iux += m * (q[x][u] / r[u]).log2();
                }
            }
        }
        let mut iuy = 0.0;
        for u in 0..nu {
            for y in 0..self.ny {
                let m = juy[u][y];
                if m > 0.0 && r[u] > 0.0 && py[y] > 0.0 {
                    iuy += m * (m / (r[u] * py[y])).log2();
                }
            }
        }
        (iux.max(0.0), iuy.max(0.0))
    }
}

fn splitmix(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        .wrapping_mul(0x9E3779B97F4A7C15)
        .wrapping_add(a.wrapping_mul(0xBF58476D1CE4E5B9))
        .wrapping_add(b.wrapping_mul(0x94D049BB133111EB));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

// ---------------------------------------------------------------------------
// public operations
// ---------------------------------------------------------------------------

/// `eta_l(R)` for one query rate; deterministic given `cfg.seed`.
pub fn eta_eval(source: &MarkovChainSource, l: usize, r: f64, cfg: &SolverConfig) -> Result<f64> {
    if r < 0.0 {
        return Err(Error::InvalidArgument(format!("negative rate {r}")));
    }
    let problem = LinkProblem::new(source, l)?;
    if r >= problem.sat_rate {
        // U = Y_{l-1} is feasible and optimal from here on
        return Ok(problem.sat_value);
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    let mut env = EtaEnvelope::solve(source, l, cfg)?;
    problem.refine_at(&mut env, r, cfg);
    Ok(env.eval(r))
}

/// Sampled curve on a sorted nonnegative grid, with the concave-envelope
/// postprocess applied over the whole Lagrangian sweep.
pub fn eta_curve(
    source: &MarkovChainSource,
    l: usize,
    grid: &[f64],
    cfg: &SolverConfig,
) -> Result<EtaCurve> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty rate grid".into()));
    }
    if grid.iter().any(|&r| r < 0.0 || !r.is_finite()) {
        return Err(Error::InvalidArgument(
            "rate grid must be nonnegative".into(),
        ));
    }
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument("rate grid must be sorted".into()));
    }
    let env = EtaEnvelope::solve(source, l, cfg)?;
    let samples = grid.iter().map(|&r| (r, env.eval(r))).collect();
    Ok(EtaCurve {
        link_index: l,
        samples,
        saturation_rate: env.saturation_rate,
        saturation_value: env.saturation_value,
    })
}

/// Exhaustive grid-search oracle for binary `Y_{l-1}` alphabets.
///
/// Enumerates conditional laws `P(U=u | Y_{l-1}=y)` on a grid with
/// `resolution` steps per probability and returns the best feasible
/// `I(U;Y_l)`. Independent of the sweep solver; `u_size` must be 2 or 3
/// (the |U|=3 search is O(resolution^4) and is meant for coarse grids).
pub fn eta_oracle(
    source: &MarkovChainSource,
    l: usize,
    r: f64,
    resolution: usize,
    u_size: usize,
) -> Result<f64> {
    if r < 0.0 {
        return Err(Error::InvalidArgument(format!("negative rate {r}")));
    }
    if resolution == 0 {
        return Err(Error::InvalidArgument("resolution must be positive".into()));
    }
    let problem = LinkProblem::new(source, l)?;
    if problem.nx() != 2 {
        return Err(Error::InvalidArgument(format!(
            "oracle requires binary Y_{}, got alphabet {}",
            l - 1,
            problem.nx()
        )));
    }
    let feas_tol = 1e-12;
    let step = 1.0 / resolution as f64;
    let best = match u_size {
        2 => {
            let cand: Vec<f64> = (0..=resolution).map(|i| i as f64 * step).collect();
            cand.par_iter()
                .map(|&a| {
                    let mut local = 0.0f64;
                    for j in 0..=resolution {
                        let b = j as f64 * step;
                        let q = [[a, 1.0 - a], [b, 1.0 - b]];
                        let (iux, iuy) = oracle_information(&problem, &q);
                        if iux <= r + feas_tol && iuy > local {
                            local = iuy;
                        }
                    }
                    local
                })
                .reduce(|| 0.0, f64::max)
        }
        3 => {
            let mut rows: Vec<[f64; 3]> = Vec::new();
            for i in 0..=resolution {
                for j in 0..=(resolution - i) {
                    rows.push([
                        i as f64 * step,
                        j as f64 * step,
                        (resolution - i - j) as f64 * step,
                    ]);
                }
            }
            rows.par_iter()
                .map(|r0| {
                    let mut local = 0.0f64;
                    for r1 in &rows {
                        let q = [*r0, *r1];
                        let (iux, iuy) = oracle_information3(&problem, &q);
                        if iux <= r + feas_tol && iuy > local {
                            local = iuy;
                        }
                    }
                    local
                })
                .reduce(|| 0.0, f64::max)
        }
        _ => {
            return Err(Error::InvalidArgument(format!(
                "oracle u_size must be 2 or 3, got {u_size}"
            )))
        }
    };
    Ok(best)
}

fn oracle_information(p: &LinkProblem, q: &[[f64; 2]; 2]) -> (f64, f64) {
    let mut r = [0.0f64; 2];
    let ny = p.ny;
    let mut juy = vec![[0.0f64; 2]; ny]; // juy[y][u]
    for x in 0..2 {
        for u in 0..2 {
            let m = p.px[x] * q[x][u];
            r[u] += m;
            for (y, col) in juy.iter_mut().enumerate() {
                col[u] += m * p.w[x][y];
            }
        }
    }
    pair_info_from(
        &p.px,
        q.iter().map(|r| r.to_vec()).collect::<Vec<_>>().as_slice(),
        &r,
        &juy,
        ny,
    )
}

fn oracle_information3(p: &LinkProblem, q: &[[f64; 3]; 2]) -> (f64, f64) {
    let ny = p.ny;
    let mut r = [0.0f64; 3];
    let mut juy = vec![[0.0f64; 3]; ny];
    for x in 0..2 {
        for u in 0..3 {
            let m = p.px[x] * q[x][u];
            r[u] += m;
            for (y, col) in juy.iter_mut().enumerate() {
                col[u] += m * p.w[x][y];
            }
        }
    }
    pair_info_from(
        &p.px,
        q.iter().map(|r| r.to_vec()).collect::<Vec<_>>().as_slice(),
        &r,
        &juy,
        ny,
    )
}

fn pair_info_from(
    px: &[f64],
    q: &[Vec<f64>],
    r: &[f64],
    juy: &[impl AsRef<[f64]>],
    ny: usize,
) -> (f64, f64) {
    let nu = r.len();
    let mut iux = 0.0;
    for (x, &pxv) in px.iter().enumerate() {
        for u in 0..nu {
            let m = pxv * q[x][u];
            if m > 0.0 && r[u] > 0.0 {
                iux += m * (q[x][u] / r[u]).log2();
            }
        }
    }
    let mut py = vec![0.0; ny];
    for (y, col) in juy.iter().enumerate() {
        py[y] = col.as_ref().iter().sum();
    }
    let mut iuy = 0.0;
    for (y, col) in juy.iter().enumerate() {
        for u in 0..nu {
            let m = col.as_ref()[u];
            if m > 0.0 && r[u] > 0.0 && py[y] > 0.0 {
                iuy += m * (m / (r[u] * py[y])).log2();
            }
        }
    }
    (iux.max(0.0), iuy.max(0.0))
}
