use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong between a model definition and a report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian: max |H - H^dagger| = {max_asymmetry:e}")]
    NotHermitian { max_asymmetry: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("tau = {tau} outside the domain [{lo}, {hi}]")]
    DomainViolation { tau: f64, lo: f64, hi: f64 },

    #[error("adaptive quadrature did not converge on [{a}, {b}]")]
    QuadratureFailure { a: f64, b: f64 },

    #[error("base model does not expose a propagator")]
    MissingPropagator,

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("eigenvalue gap {gap:e} below floor at tau = {tau}")]
    DegenerateCrossing { tau: f64, gap: f64 },

    #[error("eigenframe overlap {overlap:.3} too small at tau = {tau}; refine the grid")]
    GaugeAmbiguity { tau: f64, overlap: f64 },

    #[error("step too coarse at tau = {tau}: {detail}")]
    StepTooCoarse { tau: f64, detail: String },

    #[error("coupling for pair ({n},{m}) vanishes on spans {spans:?}")]
    MaskedInterval {
        n: usize,
        m: usize,
        spans: Vec<(f64, f64)>,
    },

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("non-finite value at {0}")]
    NonFinite(String),

    #[error("series are defined on different grids")]
    GridMismatch,

    #[error("ambiguous level matching at tau = {tau} (best overlap {overlap:.3})")]
    LevelMatchingFailure { tau: f64, overlap: f64 },

    #[error("invalid config field `{field}`: {message}")]
    ConfigInvalid { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::ConfigInvalid {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Process exit code for the command-line runner: 2 for configuration
    /// problems, 3 for numerical breakdowns, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ConfigInvalid { .. }
            | Error::InvalidSchedule(_)
            | Error::InvalidParameter(_)
            | Error::InvalidGrid(_)
            | Error::Json(_) => 2,
            Error::Io(_) => 1,
            _ => 3,
        }
    }
}
