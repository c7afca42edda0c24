use std::path::PathBuf;

/// Failures of the command layer, split by the exit code they map to.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("cannot read {path}: {source}")]
    ConfigFile { path: PathBuf, source: std::io::Error },
    #[error("solver: {0}")]
    Solver(#[from] noisetube_core::Error),
    #[error("output {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
    #[error("malformed {what}: {message}")]
    Format { what: String, message: String },
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    /// 1 for solver and output failures, 2 for invalid configuration.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::ConfigFile { .. } | CliError::Format { .. } => 2,
            CliError::Solver(_) | CliError::Output { .. } => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::ConfigFile { .. } => "config_file",
            CliError::Solver(_) => "solver",
            CliError::Output { .. } => "output",
            CliError::Format { .. } => "format",
        }
    }

    /// Machine-readable form written to stderr.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "error": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        })
    }

    pub fn config(message: impl Into<String>) -> Self {
        CliError::Config(message.into())
    }

    pub fn output(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Output { path: path.into(), source }
    }
}
