use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The dipole field is singular at the source point.
    #[error("zero-length displacement between source and field point")]
    SingularField,
    #[error("no measurement passed the selection policy")]
    EmptySelection,
    #[error("sigma must be strictly positive to define an SNR, got {0}")]
    NonPositiveSigma(f64),
    #[error("objective is not finite at initial simplex vertex {vertex}")]
    NonFiniteStart { vertex: usize },
    #[error("invalid {what}: {reason}")]
    InvalidParameter { what: &'static str, reason: String },
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            what,
            reason: reason.into(),
        }
    }
}
