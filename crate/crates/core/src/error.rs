use thiserror::Error;

/// Errors produced by the sensing toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("index out of range: {0}")]
    Index(String),

    /// The input sits on a measure-zero set where the transform is not
    /// uniquely defined (zero channel, 0/0 in a closed form, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A CRB quantity could not be evaluated at a position.
    #[error("degenerate position {position}: {reason}")]
    DegeneratePosition { position: String, reason: String },

    #[error("combinatorial budget exceeded: {0} subsets > {1}")]
    Budget(u128, u128),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }

    /// True for errors caused by numeric degeneracy rather than bad input.
    pub fn is_degenerate(&self) -> bool {
        matches!(self, Error::Degenerate(_) | Error::DegeneratePosition { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
