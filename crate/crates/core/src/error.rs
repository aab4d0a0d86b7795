use thiserror::Error;

use crate::characteristics::Characteristic;

/// Errors produced by the geometry and verification routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid structure matrices: {0}")]
    InvalidAlgebra(String),

    #[error("dilation factor must be positive, got {0}")]
    NonPositiveDilation(f64),

    #[error("point {point:?} lies outside the field domain")]
    OutsideDomain { point: Vec<f64> },

    #[error("test-function support escapes the field domain")]
    SupportEscapesDomain,

    #[error("characteristic left the domain at t = {time}")]
    DomainExit {
        time: f64,
        partial: Box<Characteristic>,
    },

    #[error("slice at the requested point is empty")]
    EmptySlice,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid data: {0}")]
    Grid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
