use thiserror::Error;

/// Error taxonomy shared across the crate.
///
/// `StoppingTime` is a first-class event rather than a bug: second-order
/// methods declare up front that they abort the moment a maintained
/// invariant (positive-definite inverse covariance, bounded decay counts)
/// fails, and the harness records such aborts per replicate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration: {0}")]
    Config(String),
    #[error("precondition: {0}")]
    Precondition(String),
    #[error("numerical: {0}")]
    Numerical(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("budget exhausted: {0}")]
    Budget(String),
    #[error("stopping time hit at round {round}: {what}")]
    StoppingTime { round: usize, what: String },
    #[error("refused: {0}")]
    Refused(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
    pub fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
