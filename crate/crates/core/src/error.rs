//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AfdmError {
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("delay-Doppler grid needs {needed} cells but the frame only has {available}")]
    GridTooLarge { needed: usize, available: usize },

    #[error("sample {sample} lies outside the pilot observation region")]
    OutsidePilotRegion { sample: usize },

    #[error("matrix is not positive definite (pivot {pivot:e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("detector failure: {0}")]
    DetectorFailure(String),

    #[error("frame has no energy")]
    ZeroEnergyFrame,
}

pub type Result<T> = std::result::Result<T, AfdmError>;
