use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A constructor or operation was given an out-of-domain parameter.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A policy was queried in a state it cannot legally be in.
    #[error("policy state error: {0}")]
    PolicyState(String),

    /// A policy emitted more power than the battery holds. This is a bug
    /// detector: the simulation engine refuses to paper over it.
    #[error("admissibility violation: power {power} exceeds battery level {battery}")]
    Admissibility { power: f64, battery: f64 },

    /// Relative value iteration did not reach the span tolerance.
    #[error(
        "value iteration did not converge: span {final_span:.3e} after {iters} sweeps (tolerance {span_tol:.3e})"
    )]
    NotConverged {
        iters: usize,
        final_span: f64,
        span_tol: f64,
    },

    /// Exact enumeration was asked for a tree with too many arrival sequences.
    #[error("enumeration tree too large: {paths:.3e} arrival sequences exceeds limit {limit:.3e}")]
    EnumerationTooLarge { paths: f64, limit: f64 },

    /// A solution file did not parse.
    #[error("malformed solution file: {0}")]
    SolutionFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
