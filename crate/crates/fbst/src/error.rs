//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by image I/O, operator construction, and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("unsupported magic {found:?}, expected \"P5\"")]
    UnsupportedMagic { found: String },

    #[error("malformed PGM header: {0}")]
    MalformedHeader(String),

    #[error("truncated PGM payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("image is identically zero")]
    ZeroImage,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("image {height}x{width} is smaller than the {filter_size}x{filter_size} filter")]
    ImageSmallerThanFilter {
        height: usize,
        width: usize,
        filter_size: usize,
    },

    #[error("filter row has length {found}, expected {expected}")]
    FilterLengthMismatch { expected: usize, found: usize },

    #[error("DFT grid size {grid} is too small, need at least {min}")]
    GridTooSmall { grid: usize, min: usize },

    #[error("gram operator is singular: lambda_min + lambda_r = {shifted_min:.3e}")]
    SingularOperator { shifted_min: f64 },

    #[error("filter bank is not perfect reconstruction at this size (lambda_min = {lambda_min:.3e}); run the analyzer for the offending frequency")]
    NotPerfectReconstruction { lambda_min: f64 },

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("model file checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },

    #[error("infeasible transform: {0}")]
    Infeasible(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
