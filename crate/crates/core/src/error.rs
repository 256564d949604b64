use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument fell outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// The bandit instance violates the unique-best-arm assumption.
    #[error("best arm is not unique: arms {0} and {1} share the maximal mean (a unique best arm is required)")]
    TiedBestArm(usize, usize),
    #[error("configuration error: {0}")]
    Config(String),
    /// A numerical root-find failed to converge. Signals a bug for valid inputs.
    #[error("convergence failure: {0}")]
    Convergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
