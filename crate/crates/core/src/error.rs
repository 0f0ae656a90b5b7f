use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Failures raised by the computational kernels.
///
/// IO-level failures (unreadable files, malformed headers) belong to the
/// `qbestd` crate; everything here is a violated precondition on values.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("input too short: {0}")]
    TooShort(String),
    #[error("evaluation undefined: {0}")]
    EvaluationUndefined(String),
    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),
}
