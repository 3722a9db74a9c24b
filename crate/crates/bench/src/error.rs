use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(String),

    #[error("metrics: {0}")]
    Metrics(String),

    #[error(transparent)]
    Planner(#[from] bimanual_mppi::Error),
}

impl From<csv::Error> for BenchError {
    fn from(e: csv::Error) -> Self {
        BenchError::Csv(e.to_string())
    }
}

impl BenchError {
    /// Stable identifier of the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            BenchError::Config(_) => "config",
            BenchError::Io(_) => "io",
            BenchError::Csv(_) => "csv",
            BenchError::Metrics(_) => "metrics",
            BenchError::Planner(_) => "planner",
        }
    }

    /// One-line JSON object describing the error.
    pub fn to_json_line(&self) -> String {
        serde_json::json!({ "error": self.kind(), "message": self.to_string() }).to_string()
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;
