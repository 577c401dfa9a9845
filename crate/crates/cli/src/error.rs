use serde::Serialize;
use std::path::{Path, PathBuf};

use uniconn::analysis::AnalysisError;
use uniconn::data::DataError;
use uniconn::prior::PriorError;
use uniconn::trainer::TrainError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Usage,
    MissingFile,
    InvalidConfig,
    Failed,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Failed => 1,
            ErrorKind::Usage => 2,
            ErrorKind::MissingFile => 3,
            ErrorKind::InvalidConfig => 4,
        }
    }
}

/// Error reported as one JSON object on stderr.
#[derive(Debug, Serialize)]
pub struct CliError {
    pub error: ErrorKind,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        CliError {
            error: kind,
            message: message.into(),
            path: None,
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Usage, message)
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::InvalidConfig, message)
    }

    pub fn missing(path: &Path) -> Self {
        CliError {
            error: ErrorKind::MissingFile,
            message: format!("missing file {}", path.display()),
            path: Some(path.to_path_buf()),
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::NotFound {
            return Self::missing(path);
        }
        CliError {
            error: ErrorKind::Failed,
            message: format!("io error on {}: {e}", path.display()),
            path: Some(path.to_path_buf()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("error serializes")
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::MissingFile { path } => CliError::missing(&path),
            DataError::InvalidConfig(_) => CliError::config(e.to_string()),
            other => CliError::new(ErrorKind::Failed, other.to_string()),
        }
    }
}

impl From<PriorError> for CliError {
    fn from(e: PriorError) -> Self {
        match e {
            PriorError::Data(d) => d.into(),
            PriorError::InvalidArgument(_) | PriorError::Rank { .. } => {
                CliError::config(e.to_string())
            }
            other => CliError::new(ErrorKind::Failed, other.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Data(d) => d.into(),
            TrainError::Prior(p) => p.into(),
            TrainError::Config(_) => CliError::config(e.to_string()),
            other => CliError::new(ErrorKind::Failed, other.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Train(t) => t.into(),
            AnalysisError::InvalidRoi { .. } => CliError::config(e.to_string()),
            other => CliError::new(ErrorKind::Failed, other.to_string()),
        }
    }
}
