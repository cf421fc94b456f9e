use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("degenerate function: zero variance under the input model")]
    DegenerateFunction,

    #[error("capacity exceeded: {what} has {size} variables, cap is {cap}")]
    Capacity {
        what: &'static str,
        size: usize,
        cap: usize,
    },

    #[error("unsupported basis: {0}")]
    UnsupportedBasis(String),

    #[error("invalid certificate: {0}")]
    InvalidCertificate(String),

    #[error("invalid stable partition: {0}")]
    InvalidStablePartition(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("locality violation: function of vertex {vertex} reads variable {variable} outside B_{radius}({vertex})")]
    LocalityViolation {
        vertex: usize,
        variable: usize,
        radius: usize,
    },

    #[error("internal invariant failure: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
