//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Parameter tuple violates a type-level constraint (N < 2, b < 0, NaN, ...).
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// Parameter tuple is representable but fails the standing assumptions.
    #[error("inadmissible parameters: {0}")]
    Inadmissible(String),

    /// Exponent outside the domain of the requested operation.
    #[error("invalid exponent: {0}")]
    InvalidExponent(String),

    /// Non-finite value where a finite one is required.
    #[error("non-finite input: {0}")]
    NonFinite(String),

    /// Mesh construction or mesh/data mismatch.
    #[error("mesh error: {0}")]
    Mesh(String),

    /// Problem data admits no feasible candidate (obstacle above boundary datum).
    #[error("infeasible problem data: {0}")]
    Infeasible(String),

    /// Test function passed to a verification routine is not in the convex set.
    #[error("infeasible test function: {0}")]
    InfeasibleTest(String),

    /// Configuration file is malformed or semantically invalid.
    #[error("config error: {0}")]
    Config(String),

    /// Data-sequence construction failed (bump support outside domain, ...).
    #[error("sequence construction: {0}")]
    Sequence(String),

    /// Experiment aborted; partial results were persisted where possible.
    #[error("experiment aborted: {0}")]
    Aborted(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
