use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive semi-definite (eigenvalue {eigenvalue:e})")]
    NotPsd { eigenvalue: f64 },

    #[error("degenerate sample: matrix has numerical rank 0")]
    ZeroRank,

    #[error("design matrix is rank deficient (|R[{column},{column}]| = {diag:e})")]
    RankDeficient { column: usize, diag: f64 },

    #[error("eigenvalue {index} is not strictly positive ({value:e})")]
    NonPositiveEigenvalue { index: usize, value: f64 },

    #[error("near-tie in spectrum: l[{i}] - l[{j}] = {gap:e}")]
    NearTie { i: usize, j: usize, gap: f64 },

    #[error("{skipped} of {reps} replications were degenerate (limit is 1%)")]
    TooManyDegenerate { skipped: usize, reps: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Errors a Monte-Carlo driver may skip (and count) instead of aborting.
    pub fn is_degenerate_draw(&self) -> bool {
        matches!(self, Error::ZeroRank | Error::NearTie { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
