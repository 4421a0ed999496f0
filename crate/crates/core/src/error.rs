//! Error type shared by all estimation and simulation routines.

use alloc::string::String;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Input contained a NaN or infinity.
    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    /// A matrix that must be positive definite was not.
    #[error("{context}: matrix not positive definite (min eigenvalue {min_eigenvalue:e}, tolerance {tolerance:e})")]
    NotPositiveDefinite {
        context: &'static str,
        min_eigenvalue: f64,
        tolerance: f64,
    },

    /// Dimensions of two inputs do not agree.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// A constructor precondition failed.
    #[error("invalid argument for {context}: {message}")]
    InvalidArgument {
        context: &'static str,
        message: String,
    },

    /// Window planning cannot produce a feasible layout.
    #[error("infeasible window plan: n = {n} is too short for {m_target} windows")]
    InfeasiblePlan { n: usize, m_target: usize },

    /// An iterative search failed to bracket or saturate.
    #[error("search failed in {context}: {message}")]
    SearchFailed {
        context: &'static str,
        message: String,
    },

    /// Every candidate in a sweep failed; nothing to return.
    #[error("no usable result in {context}: all {attempts} attempts failed")]
    AllCellsFailed {
        context: &'static str,
        attempts: usize,
    },
}
