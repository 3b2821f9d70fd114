use thiserror::Error;

/// Errors produced by the library.
///
/// Errors split into two families used by the CLI exit codes: invalid
/// configuration/input (exit 2) and numerical/degenerate-data failures
/// (exit 3). See [`CglError::is_config_error`].
#[derive(Debug, Error)]
pub enum CglError {
    #[error("degenerate degree: off-diagonal row sum at index {0} is below 1e-300")]
    DegenerateDegree(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid knn count {kn}: must satisfy 1 <= kn < n = {n}")]
    InvalidK { kn: usize, n: usize },
    #[error("all pairwise distances are zero; bandwidth quantile undefined")]
    AllDistancesZero,
    #[error("invalid parameter: {0}")]
    InvalidSpec(String),
    #[error("invalid dimensions: {0}")]
    InvalidDims(String),
    #[error("noisy and clean vectors coincide; noise norm is zero")]
    ZeroNoise,
    #[error("operation requires isotropic noise")]
    UnsupportedShape,
    #[error("matrix is not symmetric within tolerance")]
    NotSymmetric,
    #[error("threshold {delta} excludes every non-trivial eigenvalue")]
    EmptyEmbedding { delta: f64 },
    #[error("invalid truncation r = {r}; must lie in 1..={max}")]
    InvalidTruncation { r: usize, max: usize },
    #[error("index {0} out of range (size {1})")]
    IndexOutOfRange(usize, usize),
    #[error("gamma = {gamma} does not dominate eps = {eps}")]
    GammaNotDominating { gamma: f64, eps: f64 },
    #[error("class {0} has no members")]
    EmptyClass(usize),
    #[error("template separation not achieved after {0} retries")]
    SeparationFailure(usize),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

impl CglError {
    /// True for errors caused by bad configuration or malformed input
    /// (CLI exit code 2); false for numerical/data failures (exit code 3).
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            CglError::DimensionMismatch(_)
                | CglError::InvalidK { .. }
                | CglError::InvalidSpec(_)
                | CglError::InvalidDims(_)
                | CglError::InvalidTruncation { .. }
                | CglError::IndexOutOfRange(..)
                | CglError::Io(_)
                | CglError::Parse(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, CglError>;
