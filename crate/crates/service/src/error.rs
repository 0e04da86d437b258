use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::project::Stage;

#[derive(Debug, Error)]
pub enum ServiceError {
    /// A user-supplied input the stage reads is missing, e.g. "contour_defect absent".
    #[error("{what} absent")]
    MissingInput { stage: Stage, what: &'static str },
    #[error("stage {stage} needs {needs}, which has not run or is out of date")]
    UpstreamInvalid { stage: Stage, needs: Stage },
    #[error("stage {stage} failed: {message}")]
    Stage { stage: Stage, message: String },
    #[error("unsupported schema_version {found:?}, expected {expected}")]
    SchemaVersion { found: Option<u64>, expected: u32 },
    #[error("referenced file missing: {}", .0.display())]
    DanglingReference(PathBuf),
    #[error("unknown project {0}")]
    UnknownProject(String),
    #[error("project {0} already exists")]
    ProjectExists(String),
    #[error("invalid request: {0}")]
    BadRequest(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    PlainIo(#[from] std::io::Error),
    #[error("malformed project JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl ServiceError {
    pub fn io(path: &Path, source: std::io::Error) -> ServiceError {
        ServiceError::Io { path: path.to_path_buf(), source }
    }

    pub fn stage(stage: Stage, e: impl std::fmt::Display) -> ServiceError {
        ServiceError::Stage { stage, message: e.to_string() }
    }

    /// Stable machine-readable code for API clients.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::MissingInput { .. } => "missing_input",
            ServiceError::UpstreamInvalid { .. } => "upstream_invalid",
            ServiceError::Stage { .. } => "stage_failed",
            ServiceError::SchemaVersion { .. } => "schema_version",
            ServiceError::DanglingReference(_) => "dangling_reference",
            ServiceError::UnknownProject(_) => "unknown_project",
            ServiceError::ProjectExists(_) => "project_exists",
            ServiceError::BadRequest(_) | ServiceError::Json(_) => "bad_request",
            ServiceError::Io { .. } | ServiceError::PlainIo(_) => "io",
        }
    }

    pub fn stage_name(&self) -> Option<Stage> {
        match self {
            ServiceError::MissingInput { stage, .. } | ServiceError::UpstreamInvalid { stage, .. } | ServiceError::Stage { stage, .. } => {
                Some(*stage)
            }
            _ => None,
        }
    }
}
