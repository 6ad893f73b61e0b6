use axum::http::StatusCode;
use serde_json::json;
use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] archmap::Error),

    #[error("{0}")]
    Usage(String),

    #[error("no active session")]
    NoSession,

    #[error("{0}")]
    NotFound(String),

    #[error("{0}")]
    BadRequest(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Usage(_) => "Usage",
            CliError::NoSession => "NoSession",
            CliError::NotFound(_) => "NotFound",
            CliError::BadRequest(_) => "BadRequest",
        }
    }

    /// `{"error": kind, "message": text}`
    pub fn to_json(&self) -> serde_json::Value {
        json!({ "error": self.kind(), "message": self.to_string() })
    }

    pub fn status(&self) -> StatusCode {
        use archmap::Error as E;
        match self {
            CliError::NoSession => StatusCode::CONFLICT,
            CliError::NotFound(_) => StatusCode::NOT_FOUND,
            CliError::BadRequest(_) | CliError::Usage(_) => StatusCode::BAD_REQUEST,
            CliError::Core(e) => match e {
                E::NotInSpace(_) | E::MissingMetric(_) => StatusCode::NOT_FOUND,
                E::StaleCache(_) => StatusCode::CONFLICT,
                E::Io(_) | E::CorruptFile(_) => StatusCode::INTERNAL_SERVER_ERROR,
                _ => StatusCode::BAD_REQUEST,
            },
        }
    }
}
