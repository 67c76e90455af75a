use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    /// A time integration produced NaN/Inf; `last_good_time` is the last
    /// sampled time at which the state was finite.
    #[error("NaN abort at t = {last_good_time}")]
    NanAbort { last_good_time: f64 },

    #[error("no convergence in {what} after {iterations} iterations: {detail}")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        detail: String,
    },

    #[error("precondition of {lemma} violated: {detail}")]
    Precondition { lemma: &'static str, detail: String },

    #[error("snapshot format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Whether the error is a user/input validation problem (as opposed to a
    /// numerical failure during an otherwise valid computation).
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain(_) | Error::GridMismatch(_) | Error::Precondition { .. } | Error::Format(_)
        )
    }

    /// Short machine-readable class used in sweep tables.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::GridMismatch(_) => "grid_mismatch",
            Error::NonFinite(_) => "non_finite",
            Error::NanAbort { .. } => "nan_abort",
            Error::NonConvergence { .. } => "non_convergence",
            Error::Precondition { .. } => "precondition",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
        }
    }
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
