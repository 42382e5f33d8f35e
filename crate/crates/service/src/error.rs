use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use omltune::analysis::AnalysisError;
use omltune::dataspace::DataError;
use omltune::experiments::{ExperimentError, FieldError};
use omltune::tuner::TunerError;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
}

#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                code: code.to_string(),
                message: message.into(),
                details: None,
            },
        }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.body.details = Some(details);
        self
    }

    pub fn unprocessable(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, message)
    }

    pub fn not_found(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, code, message)
    }

    pub fn conflict(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, code, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    fn fields(code: &str, message: String, fields: &[FieldError]) -> Self {
        Self::unprocessable(code, message)
            .with_details(serde_json::to_value(fields).unwrap_or(Value::Null))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<DataError> for ApiError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::UnknownDataset(ref id) => {
                let msg = e.to_string();
                Self::not_found("dataset_not_found", msg)
                    .with_details(serde_json::json!({ "id": id }))
            }
            DataError::Io { .. } => Self::internal(e.to_string()),
            other => Self::unprocessable("invalid_data", other.to_string()),
        }
    }
}

impl From<ExperimentError> for ApiError {
    fn from(e: ExperimentError) -> Self {
        let msg = e.to_string();
        match e {
            ExperimentError::Invalid(fields) => Self::fields("validation_failed", msg, &fields),
            // Inside a spec an unknown dataset is a bad field, not a missing resource.
            ExperimentError::Data(DataError::UnknownDataset(id)) => Self::fields(
                "unknown_dataset",
                msg,
                &[FieldError {
                    field: "data.source.id".into(),
                    message: format!("no dataset '{id}'"),
                }],
            ),
            ExperimentError::Data(DataError::Io { .. }) => Self::internal(msg),
            ExperimentError::Data(_) => Self::unprocessable("invalid_data", msg),
            ExperimentError::Tuner(TunerError::InvalidControl(problems)) => {
                let fields: Vec<FieldError> = problems
                    .into_iter()
                    .map(|message| FieldError {
                        field: "control".into(),
                        message,
                    })
                    .collect();
                Self::fields("validation_failed", msg, &fields)
            }
            ExperimentError::Tuner(TunerError::Space(_)) => {
                Self::unprocessable("validation_failed", msg)
            }
            ExperimentError::Duplicate(_) => Self::conflict("duplicate_prefix", msg),
            ExperimentError::Running(_) => Self::conflict("experiment_running", msg),
            ExperimentError::NotFound(_) => Self::not_found("experiment_not_found", msg),
            _ => Self::internal(msg),
        }
    }
}

impl From<AnalysisError> for ApiError {
    fn from(e: AnalysisError) -> Self {
        let msg = e.to_string();
        match e {
            AnalysisError::NoSuccessfulTrial
            | AnalysisError::NoSurrogate
            | AnalysisError::NoEvaluation => Self::conflict("analysis_not_ready", msg),
            AnalysisError::SameDimension(_)
            | AnalysisError::NoSuchDimension(_)
            | AnalysisError::FixedDimension(_)
            | AnalysisError::Resolution
            | AnalysisError::MissingAxes => Self::unprocessable("invalid_analysis_params", msg),
        }
    }
}
