use thiserror::Error;

/// Errors raised by the semigroup toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid state space: {0}")]
    InvalidSpace(String),

    #[error("invalid time {0}: {1}")]
    InvalidTime(f64, &'static str),

    #[error("kernel is not positive: {0}")]
    NotPositive(String),

    #[error("fixed-space basis failed verification at t = {t}: defect {defect:e} exceeds {tolerance:e}")]
    InconsistentTolerance { t: f64, defect: f64, tolerance: f64 },

    #[error("zero eigenvalue is not semisimple (pairing of fixed spaces is singular, smallest singular value {0:e})")]
    DefectiveGenerator(f64),

    #[error("separation test does not predict convergence; refusing to build a limit projection")]
    ConvergenceNotPredicted,

    #[error("no non-negative fixed measure found (Perron ratio {0})")]
    NoFixedMeasure(f64),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
