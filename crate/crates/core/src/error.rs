use thiserror::Error;

/// Failures reported by every fallible operation in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The result is not representable as a finite `f64`.
    #[error("range error: {0}")]
    Range(String),

    /// A model assumption required by the operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// An experiment or test description is inconsistent.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
    },

    /// The inverse-CDF walk ran past its hard cap without reaching the
    /// uniform draw.
    #[error("inverse-CDF walk exhausted at h = {0}")]
    TruncationExhausted(u64),
}

impl Error {
    /// True for errors caused by caller input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain(_) | Error::Precondition(_) | Error::Config(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
