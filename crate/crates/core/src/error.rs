use std::path::PathBuf;

/// Errors produced by the estimation pipeline.
///
/// Contract violations (mismatched dimensions, empty batches, out-of-range
/// codes) are programming errors and panic instead.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("langevin simulation diverged at step {step} (|x| = {magnitude:e})")]
    Divergence { step: usize, magnitude: f64 },

    #[error("quadrature did not converge on [{lo}, {hi}]")]
    Quadrature { lo: f64, hi: f64 },

    #[error("TICA fit failed: covariance is rank deficient in dimensions {null_dims:?}")]
    RankDeficient { null_dims: Vec<usize> },

    #[error("no quantization code has at least two rows; try fewer clusters")]
    NoSampleableCode,

    #[error("non-finite {component} loss at step {step} (last scores: {last_scores:?})")]
    NonFinite {
        step: usize,
        component: &'static str,
        last_scores: Vec<f64>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed matrix file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
