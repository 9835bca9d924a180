use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EwaldError {
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("eigen-solve did not converge: {0}")]
    NoConvergence(String),
    #[error("frequency {omega} outside band limit {band}")]
    OutOfBand { omega: f64, band: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for EwaldError {
    fn from(e: std::io::Error) -> Self {
        EwaldError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, EwaldError>;
