use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("inadmissible parameters: {0}")]
    Inadmissible(String),
    #[error("runtime failure: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) => 1,
            CliError::Inadmissible(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

macro_rules! runtime_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Runtime(e.to_string())
            }
        }
    )*};
}

runtime_from!(
    std::io::Error,
    csv::Error,
    serde_json::Error,
    unirec::EstimatorError,
    unirec::OptimizerError,
    unirec::ConstrainedError,
    unirec::oracle::OracleError
);
