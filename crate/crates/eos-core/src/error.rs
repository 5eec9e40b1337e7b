use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain where a formula is defined.
    #[error("domain error: {0}")]
    Domain(String),
    /// A lemma was evaluated outside its regime; this is a skip, not a failure.
    #[error("condition violated: {0}")]
    ConditionViolated(String),
    #[error("empty sample")]
    EmptySample,
    #[error("trajectory diverged at step {0}")]
    Diverged(usize),
    #[error("not converged within {0} steps")]
    NonConvergedWithinBudget(usize),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
