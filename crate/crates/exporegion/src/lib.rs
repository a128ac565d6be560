//! Optimal type-II error-exponent regions for K-hop distributed hypothesis
//! testing against independence, under expected-rate and maximum-rate
//! constraints.
//!
//! The crate is organized around five pieces:
//!
//! * [`source_model`] — finite-alphabet Markov-chain sources and the
//!   entropy / mutual-information primitives (all logs base 2).
//! * [`eta_solver`] — the single-link exponent functions
//!   `eta_l(R) = max I(U;Y_l)` over auxiliary channels `P(U|Y_{l-1})` with
//!   `I(U;Y_{l-1}) <= R`, computed by a Lagrangian sweep of alternating
//!   maximizations plus an upper-concave-envelope postprocess.
//! * [`exponent_regions`] — evaluators for the exponents regions: the
//!   max-rate rectangle, the expected-rate K=2 frontier (three epsilon
//!   cases), the general-K sigma-allocation region, and the nested
//!   (K+1)-subscheme simplification.
//! * [`linear_feasibility`] — an exact rational Fourier–Motzkin engine for
//!   the sigma / delta allocation systems.
//! * [`multiplex_calculus`] — bookkeeping and Monte-Carlo validation of the
//!   multiplexing coding scheme (type-I aggregation, flag-bit rate
//!   accounting, exponent aggregation).
//!
//! The [`acceptance`] module bundles the numeric reproduction checks that
//! gate a release; `exporegion check` runs them from the command line.

// index-style loops are the clearer idiom in the small dense-matrix kernels
#![allow(clippy::needless_range_loop)]

pub mod acceptance;
pub mod envelope;
pub mod eta_solver;
pub mod exponent_regions;
pub mod export;
pub mod linear_feasibility;
pub mod multiplex_calculus;
pub mod source_model;
pub mod subset;

pub use eta_solver::{eta_curve, eta_eval, eta_oracle, EtaCurve, EtaEnvelope, SolverConfig};
pub use exponent_regions::{
    expected_rate_frontier_k2, general_region_feasible, general_region_frontier,
    max_rate_region_k2, max_rate_region_khop, nested_frontier, region_contains, theta_max,
    Allocation, Instance, RegionContext, RegionFrontier,
};
pub use source_model::{
    binary_entropy, make_dsbs_example, mutual_information, Channel, Joint, MarkovChainSource, Pmf,
};
pub use subset::SubsetMask;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid pmf: {0}")]
    InvalidPmf(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("invalid source: {0}")]
    InvalidSource(String),

    #[error("source spec: {0}")]
    SpecError(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("system parse error at line {line}: {message}")]
    ParseError { line: usize, message: String },

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("row blow-up guard tripped: {rows} intermediate rows exceeds cap {cap}")]
    RowBlowup { rows: usize, cap: usize },

    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
