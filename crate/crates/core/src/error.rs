use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid outcome space: {0}")]
    InvalidSpace(String),

    #[error("payoff has {got} values but the outcome space has {expected} atoms")]
    SpaceMismatch { expected: usize, got: usize },

    #[error("non-finite value in payoff at atom {0}")]
    NonFinite(usize),

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("invalid utility specification: {0}")]
    InvalidUtility(String),

    /// Liquidity left the domain `essinf > 0`.
    #[error("liquidity must be strictly positive in every outcome (essinf = {0})")]
    Domain(f64),

    #[error("fee level {0} outside [0, 1]")]
    FeeOutOfRange(f64),

    #[error("invalid liquidity provision: {0}")]
    InvalidProvision(String),

    #[error("malformed money line {0}")]
    MalformedMoneyLine(i64),

    #[error("invalid price series: {0}")]
    InvalidSeries(String),

    #[error("price {0} outside (0, 1)")]
    PriceOutOfRange(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unbounded bet: {0}")]
    Unbounded(String),

    #[error("root finder failed: {0}")]
    RootNotFound(String),

    #[error("operation not supported: {0}")]
    Unsupported(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
