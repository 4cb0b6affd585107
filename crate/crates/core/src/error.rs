//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the library, grouped the way the CLI maps them to
/// exit codes (argument/config, hypothesis/domain, integrity, search).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A mathematical hypothesis required by the operation does not hold
    /// (e.g. non-dust measure, rate outside the admissible range).
    #[error("domain error: {0}")]
    Domain(String),

    /// Fixed-point iteration hit `max_iter` before stagnating; the trace of
    /// per-iteration diagnostics is carried along rather than discarded.
    #[error("convergence failure: {message} ({} iterations recorded)", trace.len())]
    Convergence {
        message: String,
        trace: Vec<crate::rde::TraceEntry>,
    },

    #[error("numerical integrity violation: {0}")]
    Integrity(String),

    #[error("parameter search failed: {0}")]
    Search(String),
}

pub type Result<T> = std::result::Result<T, Error>;
