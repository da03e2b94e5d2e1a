use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter or option combination is invalid.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input rows violate a dataset invariant.
    #[error("invalid data at row {row}: {message}")]
    InvalidRow { row: usize, message: String },

    #[error("invalid data: {0}")]
    InvalidData(String),

    /// Every candidate group was removed by the mass filter.
    #[error("no group has empirical mass >= {gamma} (largest observed mass {max_mass})")]
    EmptyCollection { gamma: f64, max_mass: f64 },
}

pub(crate) fn config<T>(message: impl Into<String>) -> Result<T> {
    Err(Error::Config(message.into()))
}
