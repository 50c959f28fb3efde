//! Error type shared by all modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("truncation K = {k} exceeds per-period resolution N = {n}")]
    TruncationExceedsResolution { k: usize, n: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("resolution N = {n} too small to synthesize K = {k} harmonics")]
    ResolutionTooSmall { n: usize, k: usize },

    #[error("sample count {len} is not a multiple of samples-per-period {n}")]
    RaggedPeriod { len: usize, n: usize },

    #[error("invalid parameter {name}: {msg}")]
    InvalidParameter { name: &'static str, msg: String },

    #[error("frequency grid size {f} too small; need at least {needed}")]
    GridTooSmall { f: usize, needed: usize },

    #[error("frequency grids disagree: {0}")]
    GridMismatch(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix at grid point {index} is not Hermitian (asymmetry {asymmetry:.3e})")]
    NotHermitian { index: usize, asymmetry: f64 },

    #[error("density is not positive definite on the grid (min eigenvalue {min_eigenvalue:.3e} at point {index})")]
    NotPositiveDefinite { min_eigenvalue: f64, index: usize },

    #[error("spectral factorization did not converge in {iterations} iterations (last relative residual {residual:.3e})")]
    FactorizationDiverged { iterations: usize, residual: f64 },

    #[error("leading factor coefficient is singular and cannot be inverted")]
    SingularLeadingCoefficient,

    #[error("residual density is not positive semidefinite ({count} grid points, worst eigenvalue {worst:.3e})")]
    InfeasibleResidual { count: usize, worst: f64 },

    #[error("density class is infeasible: {0}")]
    InfeasibleClass(String),

    #[error("insufficient observation history: need {needed} blocks, got {got}")]
    InsufficientHistory { needed: usize, got: usize },

    #[error("simulation horizon {horizon} shorter than required {needed}")]
    HorizonTooShort { horizon: usize, needed: usize },

    #[error("numerical inconsistency: {0}")]
    NumericalInconsistency(String),

    #[error("{path}:{line}: parse error: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for errors caused by malformed files or unreadable paths, as
    /// opposed to mathematical domain errors.
    pub fn is_io_or_parse(&self) -> bool {
        matches!(self, Error::Parse { .. } | Error::Io { .. })
    }
}
