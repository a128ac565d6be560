//! Finite-alphabet Markov-chain sources and information primitives.
//!
//! Under the null hypothesis the observations `(Y_0, ..., Y_K)` are i.i.d.
//! copies of a chain `Y_0 -> Y_1 -> ... -> Y_K` factored as a root marginal
//! times K link channels; under the alternative they follow the product of
//! the marginals. Everything here is in bits (base-2 logs) with the
//! `0 log 0 = 0` continuity convention, and alphabets are dense index sets
//! `0..m-1`; symbol labels only exist at the I/O boundary.

use crate::{Error, Result};

const PMF_SUM_TOL: f64 = 1e-12;
const JOINT_SUM_TOL: f64 = 1e-10;

/// Probability mass function over a dense alphabet `0..m-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    probs: Vec<f64>,
}

impl Pmf {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidPmf("empty alphabet".into()));
        }
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidPmf(format!("entry {i} is {p}, must be >= 0")));
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PMF_SUM_TOL {
            return Err(Error::InvalidPmf(format!("sums to {sum}, expected 1")));
        }
        Ok(Pmf { probs })
    }

    /// Bernoulli(p) as the pmf (P(0), P(1)) = (1-p, p).
    pub fn bernoulli(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidPmf(format!(
                "Bernoulli parameter {p} outside [0,1]"
            )));
        }
        Pmf::new(vec![1.0 - p, p])
    }

    pub fn alphabet_size(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, i: usize) -> f64 {
        self.probs[i]
    }

    /// Shannon entropy in bits.
    pub fn entropy(&self) -> f64 {
        -self
            .probs
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.log2())
            .sum::<f64>()
    }
}

/// Row-stochastic channel: one conditional pmf per input symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    rows: Vec<Pmf>,
    output_size: usize,
}

impl Channel {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidChannel("no rows".into()));
        }
        let output_size = rows[0].len();
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                if r.len() != output_size {
                    return Err(Error::InvalidChannel(format!(
                        "row {i} has {} entries, expected {output_size}",
                        r.len()
                    )));
                }
                Pmf::new(r).map_err(|e| Error::InvalidChannel(format!("row {i}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Channel { rows, output_size })
    }

    /// Binary symmetric channel with the given flip probability.
    pub fn binary_symmetric(flip: f64) -> Result<Self> {
        Channel::new(vec![vec![1.0 - flip, flip], vec![flip, 1.0 - flip]])
    }

    pub fn input_size(&self) -> usize {
        self.rows.len()
    }

    pub fn output_size(&self) -> usize {
        self.output_size
    }

    pub fn row(&self, x: usize) -> &Pmf {
        &self.rows[x]
    }

    pub fn prob(&self, x: usize, y: usize) -> f64 {
        self.rows[x].get(y)
    }

    /// Push a marginal through the channel.
    pub fn apply(&self, input: &Pmf) -> Result<Pmf> {
        if input.alphabet_size() != self.input_size() {
            return Err(Error::InvalidChannel(format!(
                "input alphabet {} does not match channel input {}",
                input.alphabet_size(),
                self.input_size()
            )));
        }
        let mut out = vec![0.0; self.output_size];
        for (x, px) in input.probs().iter().enumerate() {
            for y in 0..self.output_size {
                out[y] += px * self.prob(x, y);
            }
        }
        // renormalize away accumulated rounding so chained marginals stay valid
        let s: f64 = out.iter().sum();
        for v in &mut out {
            *v /= s;
        }
        Pmf::new(out)
    }
}

/// Joint pmf over a pair of alphabets, used by [`mutual_information`].
#[derive(Debug, Clone)]
pub struct Joint {
    probs: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl Joint {
    pub fn new(matrix: Vec<Vec<f64>>) -> Result<Self> {
        let rows = matrix.len();
        if rows == 0 {
            return Err(Error::InvalidPmf("empty joint".into()));
        }
        let cols = matrix[0].len();
        let mut probs = Vec::with_capacity(rows * cols);
        let mut sum = 0.0;
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::InvalidPmf(format!(
                    "joint row {i} has ragged length"
                )));
            }
            for (j, &p) in row.iter().enumerate() {
                if !p.is_finite() || p < 0.0 {
                    return Err(Error::InvalidPmf(format!("joint entry ({i},{j}) is {p}")));
                }
                sum += p;
                probs.push(p);
            }
        }
        if (sum - 1.0).abs() > JOINT_SUM_TOL {
            return Err(Error::InvalidPmf(format!(
                "joint sums to {sum}, expected 1"
            )));
        }
        Ok(Joint { probs, rows, cols })
    }

    /// Joint of (input, output) for a marginal pushed through a channel.
    pub fn from_marginal_channel(input: &Pmf, channel: &Channel) -> Result<Self> {
        if input.alphabet_size() != channel.input_size() {
            return Err(Error::InvalidChannel(
                "marginal/channel alphabet mismatch".into(),
            ));
        }
        let matrix = (0..input.alphabet_size())
            .map(|x| {
                (0..channel.output_size())
                    .map(|y| input.get(x) * channel.prob(x, y))
                    .collect()
            })
            .collect();
        Joint::new(matrix)
    }

    pub fn prob(&self, i: usize, j: usize) -> f64 {
        self.probs[i * self.cols + j]
    }

    pub fn row_marginal(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.prob(i, j)).sum())
            .collect()
    }

    pub fn col_marginal(&self) -> Vec<f64> {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.prob(i, j)).sum())
            .collect()
    }
}

/// Mutual information of a joint pair pmf, in bits.
pub fn mutual_information(joint: &Joint) -> f64 {
    let px = joint.row_marginal();
    let py = joint.col_marginal();
    let mut s = 0.0;
    for i in 0..joint.rows {
        for j in 0..joint.cols {
            let p = joint.prob(i, j);
            if p > 0.0 {
                s += p * (p / (px[i] * py[j])).log2();
            }
        }
    }
    s.max(0.0)
}

/// Binary entropy function h_b(p) in bits.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "binary_entropy({p}) outside [0,1]"
        )));
    }
    let term = |q: f64| if q > 0.0 { -q * q.log2() } else { 0.0 };
    Ok(term(p) + term(1.0 - p))
}

/// Markov chain `Y_0 -> Y_1 -> ... -> Y_K`: root marginal plus K link channels.
#[derive(Debug, Clone)]
pub struct MarkovChainSource {
    root: Pmf,
    links: Vec<Channel>,
    marginals: Vec<Pmf>,
}

impl MarkovChainSource {
    pub fn new(root: Pmf, links: Vec<Channel>) -> Result<Self> {
        if links.is_empty() {
            return Err(Error::InvalidSource("need at least one link".into()));
        }
        let mut marginals = vec![root.clone()];
        for (l, ch) in links.iter().enumerate() {
            let prev = marginals.last().unwrap();
            if ch.input_size() != prev.alphabet_size() {
                return Err(Error::InvalidSource(format!(
                    "links[{l}] input alphabet {} does not match Y_{l} alphabet {}",
                    ch.input_size(),
                    prev.alphabet_size()
                )));
            }
            marginals.push(ch.apply(prev)?);
        }
        Ok(MarkovChainSource {
            root,
            links,
            marginals,
        })
    }

    /// Number of hops K (one decision center per hop).
    pub fn k_hops(&self) -> usize {
        self.links.len()
    }

    pub fn root(&self) -> &Pmf {
        &self.root
    }

    /// Link channel `Y_{l-1} -> Y_l`, `1 <= l <= K`.
    pub fn link(&self, l: usize) -> Result<&Channel> {
        if l == 0 || l > self.links.len() {
            return Err(Error::IndexOutOfRange(format!(
                "link {l} outside 1..={}",
                self.links.len()
            )));
        }
        Ok(&self.links[l - 1])
    }

    /// Marginal of `Y_l` under the null hypothesis, `0 <= l <= K`.
    pub fn marginal(&self, l: usize) -> Result<&Pmf> {
        self.marginals.get(l).ok_or_else(|| {
            Error::IndexOutOfRange(format!("marginal {l} outside 0..={}", self.links.len()))
        })
    }

    /// Joint pmf of the pair `(Y_{l-1}, Y_l)`, `1 <= l <= K`.
    pub fn pair_joint(&self, l: usize) -> Result<Joint> {
        Joint::from_marginal_channel(self.marginal(l - 1)?, self.link(l)?)
    }

    /// `I(Y_{l-1}; Y_l)` in bits — the saturation value of `eta_l`.
    pub fn link_mutual_information(&self, l: usize) -> Result<f64> {
        Ok(mutual_information(&self.pair_joint(l)?))
    }

    /// Full joint over `(Y_0, ..., Y_K)`, flattened row-major; used by the
    /// constructor sanity check and relabeling tests. Exponential in K.
    pub fn full_joint(&self) -> Vec<f64> {
        let sizes: Vec<usize> = (0..=self.k_hops())
            .map(|l| self.marginals[l].alphabet_size())
            .collect();
        let total: usize = sizes.iter().product();
        let mut out = Vec::with_capacity(total);
        let mut idx = vec![0usize; sizes.len()];
        for _ in 0..total {
            let mut p = self.root.get(idx[0]);
            for l in 1..=self.k_hops() {
                p *= self.links[l - 1].prob(idx[l - 1], idx[l]);
            }
            out.push(p);
            for pos in (0..sizes.len()).rev() {
                idx[pos] += 1;
                if idx[pos] < sizes[pos] {
                    break;
                }
                idx[pos] = 0;
            }
        }
        out
    }
}

/// The two-hop doubly-symmetric binary example: `Y_0 ~ Bern(0.4)`,
/// `Y_1 = Y_0 xor T`, `Y_2 = Y_1 xor S` with `T, S ~ Bern(0.8)`.
pub fn make_dsbs_example() -> MarkovChainSource {
    dsbs(0.4, &[0.8, 0.8]).expect("canonical example parameters are valid")
}

/// Binary chain with root `Bern(p0)` and one symmetric flip channel per link.
pub fn dsbs(p0: f64, flips: &[f64]) -> Result<MarkovChainSource> {
    let root = Pmf::bernoulli(p0)?;
    let links = flips
        .iter()
        .map(|&f| {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::InvalidSource(format!(
                    "flip probability {f} outside [0,1]"
                )));
            }
            Channel::binary_symmetric(f)
        })
        .collect::<Result<Vec<_>>>()?;
    MarkovChainSource::new(root, links)
}

// ---------------------------------------------------------------------------
// JSON source spec
// ---------------------------------------------------------------------------

/// Parse a source spec. Two forms are accepted:
///
/// ```json
/// {"k": 2, "root": [0.6, 0.4], "links": [[[0.2,0.8],[0.8,0.2]], ...]}
/// {"dsbs": {"p0": 0.4, "flips": [0.8, 0.8]}}
/// ```
///
/// Validation errors name the offending field.
pub fn source_from_json(text: &str) -> Result<MarkovChainSource> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::SpecError(format!("invalid JSON: {e}")))?;
    source_from_value(&value)
}

pub fn source_from_value(value: &serde_json::Value) -> Result<MarkovChainSource> {
    let obj = value
        .as_object()
        .ok_or_else(|| Error::SpecError("top level must be an object".into()))?;

    if let Some(d) = obj.get("dsbs") {
        let d = d
            .as_object()
            .ok_or_else(|| Error::SpecError("dsbs: must be an object".into()))?;
        let p0 = d
            .get("p0")
            .and_then(|v| v.as_f64())
            .ok_or_else(|| Error::SpecError("dsbs.p0: missing or not a number".into()))?;
        let flips = d
            .get("flips")
            .and_then(|v| v.as_array())
            .ok_or_else(|| Error::SpecError("dsbs.flips: missing or not an array".into()))?;
        let flips = flips
            .iter()
            .enumerate()
            .map(|(i, v)| {
                v.as_f64()
                    .ok_or_else(|| Error::SpecError(format!("dsbs.flips[{i}]: not a number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        return dsbs(p0, &flips).map_err(|e| Error::SpecError(format!("dsbs: {e}")));
    }

    let k = obj
        .get("k")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::SpecError("k: missing or not a positive integer".into()))?
        as usize;
    let root_v = obj
        .get("root")
        .and_then(|v| v.as_array())
        .ok_or_else(|| Error::SpecError("root: missing or not an array".into()))?;
    let root_probs = root_v
        .iter()
        .enumerate()
        .map(|(i, v)| {
            v.as_f64()
                .ok_or_else(|| Error::SpecError(format!("root[{i}]: not a number")))
        })
        .collect::<Result<Vec<f64>>>()?;
    let root = Pmf::new(root_probs).map_err(|e| Error::SpecError(format!("root: {e}")))?;

    let links_v = obj
        .get("links")
        .and_then(|v| v.as_array())
        .ok_or_else(|| Error::SpecError("links: missing or not an array".into()))?;
    if links_v.len() != k {
        return Err(Error::SpecError(format!(
            "links: {} entries, expected k = {k}",
            links_v.len()
        )));
    }
    let mut links = Vec::with_capacity(k);
    for (l, lv) in links_v.iter().enumerate() {
        let rows_v = lv
            .as_array()
            .ok_or_else(|| Error::SpecError(format!("links[{l}]: not an array of rows")))?;
        let mut rows = Vec::with_capacity(rows_v.len());
        for (r, rv) in rows_v.iter().enumerate() {
            let row = rv
                .as_array()
                .ok_or_else(|| Error::SpecError(format!("links[{l}][{r}]: not an array")))?
                .iter()
                .enumerate()
                .map(|(c, v)| {
                    v.as_f64().ok_or_else(|| {
                        Error::SpecError(format!("links[{l}][{r}][{c}]: not a number"))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        links.push(Channel::new(rows).map_err(|e| Error::SpecError(format!("links[{l}]: {e}")))?);
    }
    MarkovChainSource::new(root, links).map_err(|e| Error::SpecError(e.to_string()))
}
