use std::path::PathBuf;

use omp_rip_core::Error as CoreError;

/// Exit code for malformed input, bad flags or unreadable files.
pub const EXIT_INPUT: i32 = 2;
/// Exit code when exhaustive enumeration exceeds the support budget.
pub const EXIT_BUDGET: i32 = 3;
/// Exit code for solver failures.
pub const EXIT_SOLVER: i32 = 4;
/// Exit code when a verification suite finds a violation.
pub const EXIT_VERIFICATION: i32 = 5;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{0}")]
    Input(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Budget(CoreError),
    #[error("solver failed: {0}")]
    Solver(CoreError),
    #[error("{failures} of {instances} instances violate a bound (max violation {max_violation:e}); replay with --seed {worst_seed} --instances 1")]
    Verification {
        instances: usize,
        failures: usize,
        max_violation: f64,
        worst_seed: u64,
    },
}

impl AppError {
    pub fn input(msg: impl Into<String>) -> Self {
        AppError::Input(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Input(_) | AppError::Io { .. } => EXIT_INPUT,
            AppError::Budget(_) => EXIT_BUDGET,
            AppError::Solver(_) => EXIT_SOLVER,
            AppError::Verification { .. } => EXIT_VERIFICATION,
        }
    }
}

impl From<CoreError> for AppError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::BudgetExceeded { .. } => AppError::Budget(e),
            CoreError::NotConverged { .. } => AppError::Solver(e),
            other => AppError::Input(other.to_string()),
        }
    }
}

pub type AppResult<T> = std::result::Result<T, AppError>;
