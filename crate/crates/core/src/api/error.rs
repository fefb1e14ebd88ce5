use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

use crate::ingest::IngestError;
use crate::jobs::JobError;
use crate::mlengine::MlError;
use crate::tagstore::StoreError;

/// Error envelope returned by every endpoint: `{"code": ..., "message": ...}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn malformed_filter(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "malformed_filter", message)
    }

    pub fn not_found(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, code, message)
    }

    fn storage(e: impl std::fmt::Display) -> Self {
        tracing::error!(error = %e, "storage failure");
        Self::new(StatusCode::SERVICE_UNAVAILABLE, "storage_unavailable", "journal is not writable")
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        tracing::error!(error = %e, "internal failure");
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", "internal error")
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            code: self.code.to_owned(),
            message: self.message,
        };
        (self.status, Json(body)).into_response()
    }
}

const UNPROCESSABLE: StatusCode = StatusCode::UNPROCESSABLE_ENTITY;

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let msg = e.to_string();
        match e {
            StoreError::DuplicateDomainName(_) | StoreError::DuplicateTagName(_) => {
                ApiError::new(StatusCode::CONFLICT, "duplicate_name", msg)
            }
            StoreError::EmptyTagList => ApiError::new(UNPROCESSABLE, "empty_tag_list", msg),
            StoreError::EmptyName => ApiError::new(UNPROCESSABLE, "invalid_name", msg),
            StoreError::UnknownDomain(_) => ApiError::not_found("unknown_domain", msg),
            StoreError::UnknownTag(_) => ApiError::not_found("unknown_tag", msg),
            StoreError::UnknownAnnotation(_) => ApiError::not_found("unknown_annotation", msg),
            StoreError::SelfRelation => ApiError::new(UNPROCESSABLE, "self_relation", msg),
            StoreError::InvalidInterval => ApiError::new(UNPROCESSABLE, "invalid_interval", msg),
            StoreError::InvalidCoordinates => ApiError::new(UNPROCESSABLE, "invalid_coordinates", msg),
            StoreError::InvalidConfidence => ApiError::new(UNPROCESSABLE, "invalid_confidence", msg),
            StoreError::MalformedFilter(_) => ApiError::malformed_filter(msg),
            StoreError::Storage(j) => ApiError::storage(j),
        }
    }
}

impl From<JobError> for ApiError {
    fn from(e: JobError) -> Self {
        let msg = e.to_string();
        match e {
            JobError::UnknownJob(_) => ApiError::not_found("unknown_job", msg),
            JobError::UnknownDomain(_) => ApiError::not_found("unknown_domain", msg),
            JobError::UnknownTag(_) => ApiError::not_found("unknown_tag", msg),
            JobError::InvalidConfig(_) => ApiError::new(UNPROCESSABLE, "invalid_config", msg),
            JobError::WrongState { .. } => ApiError::new(StatusCode::CONFLICT, "wrong_state", msg),
            JobError::MissingLabels => ApiError::new(UNPROCESSABLE, "missing_labels", msg),
            JobError::Ml(MlError::UnknownClass(_)) => ApiError::new(UNPROCESSABLE, "unknown_class", msg),
            JobError::Ml(_) => ApiError::new(UNPROCESSABLE, "invalid_training", msg),
            JobError::Storage(j) => ApiError::storage(j),
            JobError::Snapshot(io) => ApiError::internal(io),
        }
    }
}

impl From<IngestError> for ApiError {
    fn from(e: IngestError) -> Self {
        let msg = e.to_string();
        match e {
            IngestError::MalformedJson(_) => ApiError::new(StatusCode::BAD_REQUEST, "malformed_json", msg),
            IngestError::SchemaViolation(_) => ApiError::new(UNPROCESSABLE, "schema_violation", msg),
            IngestError::UnknownSubscription(_) => ApiError::not_found("unknown_subscription", msg),
            IngestError::InvalidSubscription(_) => ApiError::new(UNPROCESSABLE, "invalid_subscription", msg),
            IngestError::FileNotFound(_) | IngestError::BadRow { .. } | IngestError::InvalidReplay(_) => {
                ApiError::new(UNPROCESSABLE, "invalid_replay", msg)
            }
            IngestError::Storage(j) => ApiError::storage(j),
        }
    }
}
