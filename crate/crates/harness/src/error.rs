use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] sparsync::Error),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("no feasible code size: even M = 2 has error upper bound {upper} > eps = {eps}")]
    NoFeasibleM { upper: f64, eps: f64 },
    #[error("second-order fit failed: {0}")]
    FitDiverged(String),
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.into(), source }
    }

    /// Process exit code: 2 for configuration problems, 3 for numerical
    /// failures, 4 for infeasible requests.
    pub fn exit_code(&self) -> i32 {
        use sparsync::Error as E;
        match self {
            HarnessError::Core(e) => match e {
                E::NonConvergence(_) | E::DegenerateDenominator(_) => 3,
                E::Infeasible { .. } | E::EpsilonTooSmall { .. } => 4,
                _ => 2,
            },
            HarnessError::Config(_) | HarnessError::Io { .. } | HarnessError::Csv(_) | HarnessError::Json(_) => 2,
            HarnessError::FitDiverged(_) => 3,
            HarnessError::NoFeasibleM { .. } => 4,
        }
    }
}
