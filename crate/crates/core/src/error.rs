//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A value or state outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed or inconsistent input data.
    #[error("data error: {0}")]
    Data(String),

    /// Not enough observations to form an estimate.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A (quote level, spread state) cell with no occupancy time.
    #[error("undefined intensity cell: {0}")]
    UndefinedCell(String),

    /// A model failed validation; the report carries the violations.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// Requested grid would exceed the memory budget.
    #[error("resource limit: {0}")]
    Resource(String),

    /// Malformed serialized artifact.
    #[error("artifact error: {0}")]
    Artifact(String),
}

pub type Result<T> = std::result::Result<T, Error>;
