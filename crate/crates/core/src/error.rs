//! Shared error type for every simulator module.

use thiserror::Error;

/// Errors surfaced by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    /// A zero vector cannot be amplitude encoded (direction undefined).
    #[error("zero vector cannot be amplitude encoded")]
    ZeroVector,

    /// Two objects that must share a dimension do not.
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    /// A matrix passed as Hermitian is not, beyond tolerance.
    #[error("matrix is not Hermitian (max asymmetry {0:e})")]
    NonHermitian(f64),

    /// Every eigencomponent of the input fell below the eigenvalue floor.
    #[error("all eigencomponents filtered below eps_K = {0:e}")]
    AllFiltered(f64),

    /// A binary label was neither +1 nor -1.
    #[error("labels must be +1 or -1 (found {0})")]
    BadLabels(f64),

    /// The linear system is numerically singular.
    #[error("singular system (condition number {0:e})")]
    SingularSystem(f64),

    /// A class index has no training samples.
    #[error("class {0} has no samples")]
    EmptyClass(usize),

    /// Cluster seed indices are invalid.
    #[error("bad seed indices: {0}")]
    BadSeeds(String),

    /// Tensor or batch shapes are inconsistent.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A NaN or infinity appeared where a finite value is required.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// CNN layer sizes are empty or zero.
    #[error("bad layer sizes: {0}")]
    BadSizes(String),

    /// A configuration value is out of contract.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable code, used by the CLI error line.
    pub fn code(&self) -> &'static str {
        match self {
            Error::ZeroVector => "ZERO_VECTOR",
            Error::DimensionMismatch { .. } => "DIMENSION_MISMATCH",
            Error::NonHermitian(_) => "NON_HERMITIAN",
            Error::AllFiltered(_) => "ALL_FILTERED",
            Error::BadLabels(_) => "BAD_LABELS",
            Error::SingularSystem(_) => "SINGULAR_SYSTEM",
            Error::EmptyClass(_) => "EMPTY_CLASS",
            Error::BadSeeds(_) => "BAD_SEEDS",
            Error::ShapeMismatch(_) => "SHAPE_MISMATCH",
            Error::NonFinite(_) => "NON_FINITE",
            Error::BadSizes(_) => "BAD_SIZES",
            Error::Config(_) => "CONFIG_INVALID",
            Error::Io(_) => "IO_ERROR",
            Error::Json(_) => "JSON_ERROR",
            Error::Csv(_) => "CSV_ERROR",
        }
    }

    /// True for failures of the numerical core rather than of inputs or
    /// configuration; the CLI maps these to exit code 1.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularSystem(_) | Error::AllFiltered(_) | Error::NonFinite(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
