use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid step law: {0}")]
    InvalidLaw(String),
    #[error("invalid avoid set: {0}")]
    InvalidSet(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("domain violation: {0}")]
    Domain(String),
    #[error("no path accepted in {attempts} attempts (estimated acceptance rate below {rate_bound:.3e})")]
    NoAcceptance { attempts: u64, rate_bound: f64 },
    #[error("h-chain kernel at state {state} sums to {sum} instead of 1")]
    Normalization { state: i64, sum: f64 },
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
