use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("solver: {0}")]
    Solver(pred_minimax::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("verification failed: {0}")]
    VerifyFailed(String),

    #[error("predictive constant not below plug-in constant at alpha = {0:?}")]
    Dominance(Vec<f64>),
}

impl From<pred_minimax::Error> for CliError {
    fn from(e: pred_minimax::Error) -> Self {
        use pred_minimax::Error as E;
        match e {
            E::BracketFailure(_) | E::NoConvergence(_) => CliError::Solver(e),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl CliError {
    /// 1 verification failure, 2 bad configuration or unusable files,
    /// 3 solver failure, 4 dominance regression.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::VerifyFailed(_) => 1,
            CliError::Config(_) | CliError::Io(_) | CliError::Csv(_) | CliError::Json(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Dominance(_) => 4,
        }
    }
}
