use std::convert::Infallible;
use std::time::Duration;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::Json;
use futures::stream::{self, Stream};
use gridwire_core::proto::ControlCode;
use gridwire_master::{OperateError, SessionHandle};
use serde::Deserialize;
use tokio::sync::broadcast::error::RecvError;
use tracing::warn;

use crate::types::*;
use crate::{ApiState, DEFAULT_PAGE};

fn session_view(s: &SessionHandle) -> ApiSessionView {
    let c = s.config();
    ApiSessionView {
        name: c.name.clone(),
        server: c.server_addr().to_string(),
        server_dnp_address: c.server_dnp_address,
        client_dnp_address: c.client_dnp_address,
        tag_count: s.tags().len(),
        health: s.health(),
    }
}

pub async fn sessions(State(st): State<ApiState>) -> Json<Vec<ApiSessionView>> {
    Json(st.master.sessions().iter().map(session_view).collect())
}

pub async fn session(State(st): State<ApiState>, Path(name): Path<String>) -> Result<Json<ApiSessionView>, ApiError> {
    st.master
        .session(&name)
        .map(|s| Json(session_view(s)))
        .ok_or_else(|| ApiError::not_found(format!("unknown session {name}")))
}

#[derive(Deserialize)]
pub struct TagQuery {
    session: Option<String>,
    prefix: Option<String>,
}

pub async fn tags(State(st): State<ApiState>, Query(q): Query<TagQuery>) -> Result<Json<Vec<ApiTagView>>, ApiError> {
    let sessions: Vec<&SessionHandle> = match &q.session {
        Some(name) => vec![st
            .master
            .session(name)
            .ok_or_else(|| ApiError::not_found(format!("unknown session {name}")))?],
        None => st.master.sessions().iter().collect(),
    };
    let prefix = q.prefix.unwrap_or_default();
    Ok(Json(
        sessions
            .into_iter()
            .flat_map(|s| s.tags())
            .filter(|t| t.name.starts_with(&prefix))
            .collect(),
    ))
}

pub async fn tag(State(st): State<ApiState>, Path(name): Path<String>) -> Result<Json<ApiTagView>, ApiError> {
    st.master
        .find_tag(&name)
        .map(|(_, t)| Json(t))
        .ok_or_else(|| ApiError::not_found(format!("unknown tag {name}")))
}

pub async fn stream(State(st): State<ApiState>) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let rx = st.master.subscribe();
    let events = stream::unfold((rx, st.stop, false), |(mut rx, mut stop, done)| async move {
        if done || *stop.borrow() {
            return None;
        }
        let next = tokio::select! {
            _ = stop.changed() => return None,
            r = rx.recv() => r,
        };
        match next {
            Ok(delta) => {
                let data = serde_json::to_string(&delta.tags).expect("tags serialize");
                Some((Ok(Event::default().event("delta").data(data)), (rx, stop, false)))
            }
            Err(RecvError::Lagged(n)) => {
                warn!(missed = n, "dropping slow stream subscriber");
                let notice = Event::default()
                    .event("lagged")
                    .data(format!("{n} deltas missed; reconnect and reload tags"));
                Some((Ok(notice), (rx, stop, true)))
            }
            Err(RecvError::Closed) => None,
        }
    });
    Sse::new(events).keep_alive(KeepAlive::new().interval(Duration::from_secs(15)))
}

pub async fn control(
    State(st): State<ApiState>,
    body: Result<Json<ApiControlRequest>, axum::extract::rejection::JsonRejection>,
) -> Result<Json<ApiControlResponse>, ApiError> {
    let Json(req) = body.map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.body_text()))?;
    req.validate().map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e))?;
    let (session, _) = st
        .master
        .find_tag(&req.tag)
        .ok_or_else(|| ApiError::not_found(format!("unknown tag {}", req.tag)))?;
    if session.health().offline {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            format!("session {} is offline", session.name()),
        ));
    }
    let tag = req.tag.as_str();
    let result = match req.action {
        ControlAction::LatchOn => session.operate_binary(tag, ControlCode::LATCH_ON, req.mode).await,
        ControlAction::LatchOff => session.operate_binary(tag, ControlCode::LATCH_OFF, req.mode).await,
        ControlAction::Analog => session.operate_analog(tag, req.value.unwrap_or_default(), req.mode).await,
    };
    match result {
        Ok(status) => Ok(Json(ApiControlResponse {
            status: status.name().to_string(),
            detail: format!("{:?} {} via {}", req.action, req.tag, session.name()),
        })),
        Err(e) => {
            let code = match &e {
                OperateError::UnknownTag(_) => StatusCode::NOT_FOUND,
                OperateError::WrongType { .. } | OperateError::InvalidValue(_) => StatusCode::BAD_REQUEST,
                OperateError::Offline => StatusCode::CONFLICT,
                OperateError::Wire(_) | OperateError::Rejected(_) | OperateError::EchoMismatch => StatusCode::BAD_GATEWAY,
                OperateError::Stopped => StatusCode::SERVICE_UNAVAILABLE,
            };
            Err(ApiError::new(code, e.to_string()))
        }
    }
}

#[derive(Deserialize)]
pub struct LogQuery {
    #[serde(default)]
    offset: usize,
    limit: Option<usize>,
}

pub async fn logs(State(st): State<ApiState>, Query(q): Query<LogQuery>) -> Json<ApiLogs> {
    let limit = q.limit.unwrap_or(DEFAULT_PAGE);
    let commands = st
        .command_log
        .as_ref()
        .map(|l| l.page(q.offset, limit))
        .unwrap_or_default();
    let sessions = st.master.logs().into_iter().skip(q.offset).take(limit).collect();
    Json(ApiLogs { commands, sessions })
}
