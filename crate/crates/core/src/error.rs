use thiserror::Error;

/// Errors raised by the link model, the controllers and configuration loading.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input falls outside the domain of a physical relation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration record violates one of its invariants.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A root search could not establish a sign change over its bracket.
    #[error("no bracket: {0}")]
    NoBracket(String),

    /// The BER target cannot be met anywhere in the evaluation window.
    #[error("link infeasible: {0}")]
    LinkInfeasible(String),

    /// A solver precondition on monotonicity failed.
    #[error("not monotone: {0}")]
    NotMonotone(String),

    /// The 1xN switch bank has no angle wide enough for the requested beam.
    #[error(
        "switch bank exhausted: ideal divergence {ideal_rad:.6e} rad exceeds largest angle {largest_rad:.6e} rad"
    )]
    SwitchBankExhausted { ideal_rad: f64, largest_rad: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
