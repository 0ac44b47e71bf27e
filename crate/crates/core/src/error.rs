use thiserror::Error;

/// Errors raised by model validation, enumeration and the solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed model: {0}")]
    Malformed(String),

    #[error("row {row} sums to {sum}")]
    NonStochasticRow { row: usize, sum: f64 },

    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),

    #[error("conditioning on a null event: {0}")]
    NullEvent(String),

    #[error("enumeration cap exceeded: {required} items requested, cap is {cap}")]
    CapExceeded { required: u128, cap: u128 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("reduction requires time consistency; family `{0}` is not time consistent")]
    NotTimeConsistent(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("expression error: {0}")]
    Expression(String),
}

pub type Result<T> = std::result::Result<T, Error>;
