//! Long-range one-dimensional Ising / random-cluster toolkit.
//!
//! The crate is organised around one parameter object, [`couplings::CouplingFamily`],
//! from which everything else is derived:
//!
//! * `transfer` — finite-memory transfer matrices, leading eigenpairs and the
//!   normalised transition function built from them;
//! * `graphs` — finite graphs on integer intervals, cluster partitions, and the
//!   cut/corank combinatorics used by the two-sided decomposition;
//! * `sampler` — Bernoulli and random-cluster graph samplers (single-edge
//!   heat-bath MCMC) plus exhaustive small-volume enumeration of the same laws;
//! * `estimators` — Monte Carlo estimators with batch-means errors: cylinder
//!   probabilities, likelihood ratios, cluster tails, cut statistics, scans;
//! * `oracle` — exact finite-volume spin/graph laws and the identity checker
//!   that cross-validates all of the above at small volumes.
//!
//! Randomness everywhere is counter-based (see [`rng`]): every decision is a
//! pure function of `(seed, labels...)`, so runs are reproducible bit-for-bit
//! regardless of thread count or evaluation order.

pub mod couplings;
pub mod estimators;
pub mod graphs;
pub mod numeric;
pub mod oracle;
pub mod rng;
pub mod sampler;
pub mod transfer;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid coupling family: {0}")]
    InvalidFamily(String),
    #[error("spin word must be non-empty")]
    EmptyWord,
    #[error("spin symbols must be +1 or -1, got {0}")]
    BadSymbol(i8),
    #[error("memory m={m} outside supported range 1..={max}")]
    MemoryOutOfRange { m: u32, max: u32 },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("{what} must be strictly positive")]
    NonPositive { what: &'static str },
    #[error("enumeration too large: {count} {what} exceeds cap {cap}")]
    EnumerationTooLarge {
        what: &'static str,
        count: usize,
        cap: usize,
    },
    #[error("empty sample stream")]
    EmptyStream,
    #[error("invalid volume: {0}")]
    BadVolume(String),
    #[error("vertex {0} outside volume")]
    VertexOutsideVolume(i64),
    #[error("requested tolerance {tol} not certifiable for this family")]
    ToleranceUnachievable { tol: f64 },
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
