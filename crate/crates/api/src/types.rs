use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use gridwire_master::{OperateMode, SessionHealth, SessionLogEntry, TagEntry};
use gridwire_outstation::CommandLogEntry;
use serde::{Deserialize, Serialize};

/// Tag as served over the API; the master's entry serialized as is.
pub type ApiTagView = TagEntry;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiSessionView {
    pub name: String,
    pub server: String,
    pub server_dnp_address: u16,
    pub client_dnp_address: u16,
    pub tag_count: usize,
    pub health: SessionHealth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlAction {
    LatchOn,
    LatchOff,
    Analog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApiControlRequest {
    pub tag: String,
    pub action: ControlAction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default)]
    pub mode: OperateMode,
}

impl ApiControlRequest {
    /// Checks action/value consistency.
    pub fn validate(&self) -> Result<(), String> {
        match (self.action, self.value) {
            (ControlAction::Analog, None) => Err("analog action requires a value".into()),
            (ControlAction::Analog, Some(v)) if !v.is_finite() => Err(format!("value {v} is not finite")),
            (ControlAction::LatchOn | ControlAction::LatchOff, Some(_)) => {
                Err("latch actions take no value".into())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiControlResponse {
    /// DNP3 command status name, e.g. `SUCCESS` or `NOT_SUPPORTED`.
    pub status: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiLogs {
    pub commands: Vec<CommandLogEntry>,
    pub sessions: Vec<SessionLogEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub code: u16,
    pub error: String,
}

impl ApiError {
    pub fn new(code: StatusCode, error: impl Into<String>) -> Self {
        Self {
            code: code.as_u16(),
            error: error.into(),
        }
    }

    pub fn not_found(error: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, error)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let code = StatusCode::from_u16(self.code).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (code, Json(self)).into_response()
    }
}
