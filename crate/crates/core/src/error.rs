use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("need at least {needed} nodes, got {got}")]
    TooFewNodes { needed: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric (max |L - L^T| = {max_asymmetry:e})")]
    NotSymmetric { max_asymmetry: f64 },

    #[error("band size {band_size} exceeds the {observed} observed nodes; bandlimited signals are not identifiable")]
    Identifiability { band_size: usize, observed: usize },

    #[error("U_F^T D_S U_F is singular (sigma_min = {sigma_min:e})")]
    SingularNormalizer { sigma_min: f64 },

    #[error("E|X| is infinite for alpha = {alpha} (requires alpha > 1)")]
    MomentUndefined { alpha: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input")]
    EmptyInput,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: row {row}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("non-finite estimate from {algorithm} at run {run}, step {step}")]
    NonFinite {
        algorithm: String,
        run: usize,
        step: usize,
    },

    #[error("step-size search failed for {algorithm}: no usable grid value")]
    TuningFailed { algorithm: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}
