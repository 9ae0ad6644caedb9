use qlode::continuation::SolveError;
use qlode::yamabe::YamabeError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    NoBranch(String),
    #[error("{0}")]
    Solver(String),
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 2,
            Self::NoBranch(_) => 3,
            Self::Solver(_) => 4,
            Self::Malformed(_) => 5,
            Self::Verification(_) => 6,
            Self::Io(_) => 1,
        }
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::BelowInstant { k, mu, mu_k, .. } => Self::NoBranch(format!(
                "below degeneracy instant {k}: mu = {mu} does not exceed mu_{k} = {mu_k}"
            )),
            SolveError::Param(_) | SolveError::Spectral(_) | SolveError::Config(_) => {
                Self::Validation(e.to_string())
            }
            other => Self::Solver(other.to_string()),
        }
    }
}

impl From<YamabeError> for CliError {
    fn from(e: YamabeError) -> Self {
        match e {
            YamabeError::Solve(s) => s.into(),
            other => Self::Validation(other.to_string()),
        }
    }
}
