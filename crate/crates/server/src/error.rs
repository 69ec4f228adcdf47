use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;

use screenwise_core::error::{CatalogError, InferenceError, PreferenceError};
use screenwise_core::Error;

/// Error response: status plus `{"error": kind, "message": text}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub kind: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            kind,
            message: message.into(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    pub fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, "conflict", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        let (status, kind) = match &e {
            Error::Inference(InferenceError::UnknownVariable(_) | InferenceError::UnknownState { .. }) => {
                (StatusCode::BAD_REQUEST, "unknown_evidence")
            }
            Error::Inference(InferenceError::InvalidOverride(_)) => (StatusCode::BAD_REQUEST, "invalid_override"),
            Error::Inference(_) => (StatusCode::UNPROCESSABLE_ENTITY, "contradictory_evidence"),
            Error::Catalog(CatalogError::Unknown(_)) => (StatusCode::BAD_REQUEST, "unknown_intervention"),
            Error::Catalog(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_catalog"),
            Error::Preference(PreferenceError::IndifferenceTooHigh { .. }) => {
                (StatusCode::UNPROCESSABLE_ENTITY, "indifference_too_high")
            }
            Error::Preference(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_preferences"),
            Error::Info(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_probability"),
            Error::Population(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_population"),
            Error::Model(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_model"),
            Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => (StatusCode::NOT_FOUND, "not_found"),
            Error::Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "io"),
        };
        Self::new(status, kind, message)
    }
}

macro_rules! from_core {
    ($($t:ty),*) => {$(
        impl From<$t> for ApiError {
            fn from(e: $t) -> Self {
                Error::from(e).into()
            }
        }
    )*};
}

from_core!(
    InferenceError,
    CatalogError,
    PreferenceError,
    screenwise_core::error::InfoError
);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            log::error!("{}: {}", self.kind, self.message);
        }
        (
            self.status,
            Json(json!({ "error": self.kind, "message": self.message })),
        )
            .into_response()
    }
}
