use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("frequency {freq_hz:.6e} Hz is at or below the TE10 cutoff")]
    AtCutoff { freq_hz: f64 },

    #[error("singular system: zero pivot in column {column}")]
    SingularSystem { column: usize },

    #[error("mesh already at maximum refinement level {0}")]
    MaxRefinement(usize),

    #[error("FE error indicator unavailable at maximum level {0}")]
    IndicatorUnavailable(usize),

    #[error("empty sample")]
    EmptySample,

    #[error("no accepted sample points")]
    EmptySafeSet,

    #[error("surrogate budget must be at least 1, got {0}")]
    BudgetTooSmall(usize),

    #[error("unknown estimator `{0}`")]
    UnknownEstimator(String),

    #[error("estimator `{0}` requires {1}")]
    MissingComponent(String, &'static str),

    #[error("solver failure at sample point {index}: {source}")]
    AtPoint {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("surrogate format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors a yield run reports as a solver failure rather than a
    /// configuration problem.
    pub fn is_solver_failure(&self) -> bool {
        match self {
            Error::SingularSystem { .. } | Error::AtCutoff { .. } => true,
            Error::AtPoint { source, .. } => source.is_solver_failure(),
            _ => false,
        }
    }

    pub fn at_point(self, index: usize) -> Error {
        Error::AtPoint {
            index,
            source: Box::new(self),
        }
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}
