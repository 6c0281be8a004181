//! Error type shared across the toolkit.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid of {points} points exceeds the dense-eigendecomposition cap of {cap}")]
    GridTooLarge { points: usize, cap: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value in field data")]
    NonFinite,

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("operator construction failed: {0}")]
    Construction(String),

    #[error("symbol error: {0}")]
    Symbol(String),

    #[error("seminorm estimate did not converge under grid refinement")]
    SeminormUnstable,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("input is spectrally trivial (maximal function vanishes identically)")]
    SpectrallyTrivial,

    #[error("unsupported dimension {dim} for {what}")]
    UnsupportedDimension { dim: usize, what: &'static str },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
