//! CLI error classification and exit codes.
//!
//! Exit code 2 marks configuration and input problems, 3 marks numeric or
//! degenerate-data failures, 1 anything else (unexpected I/O mid-run).

use scenclust_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("{0}")]
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Failure(_) => 1,
        }
    }
}

fn is_numeric(err: &CoreError) -> bool {
    match err {
        CoreError::ZeroVarianceAtLag { .. }
        | CoreError::ConstantRecord { .. }
        | CoreError::DegenerateData(_)
        | CoreError::BisectionFailure { .. } => true,
        CoreError::PairFailure { source, .. } => is_numeric(source),
        _ => false,
    }
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        if is_numeric(&err) {
            CliError::Numeric(err.to_string())
        } else {
            CliError::Config(err.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Failure(err.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
