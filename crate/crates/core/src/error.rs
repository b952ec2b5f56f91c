use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("no records inside the analysis window")]
    EmptyTable,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("series `{0}` has zero variance")]
    ZeroVariance(String),

    #[error("non-positive capitalization {value} at bin {bin}")]
    NonPositive { bin: usize, value: f64 },

    #[error("too few samples: need {needed}, have {have}")]
    TooFewSamples { needed: usize, have: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("undefined detrended cell at q={q}, s={s}")]
    UndefinedCell { q: f64, s: usize },

    #[error("matrix is not symmetric: |a[{i}][{j}] - a[{j}][{i}]| = {diff:e}")]
    NotSymmetric { i: usize, j: usize, diff: f64 },

    #[error("matrix contains flagged cells; pass allow_flagged to use it")]
    Flagged,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
