//! Command line orchestration for yield estimation, optimization,
//! calibration and gradient checks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod report;
pub mod run;

use thiserror::Error;

pub use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] yieldopt_core::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for configuration problems, 3 for solver failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use yieldopt_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_solver_failure() => 3,
            CliError::Core(
                E::DimensionMismatch { .. }
                | E::InvalidInput(_)
                | E::DegenerateGeometry(_)
                | E::BudgetTooSmall(_)
                | E::UnknownEstimator(_)
                | E::MissingComponent(..)
                | E::EmptySample,
            ) => 2,
            _ => 1,
        }
    }
}

/// Exit code of a run that finished but did not converge.
pub const EXIT_NOT_CONVERGED: i32 = 4;
