//! HTTP/JSON gateway over a running [`Master`], with a server-sent-event
//! stream of tag deltas. Optionally exposes a colocated outstation's
//! command log.
//!
//! Routes:
//!
//! | method | path | body |
//! |---|---|---|
//! | GET | `/api/sessions` | session list with health |
//! | GET | `/api/sessions/{name}` | one session |
//! | GET | `/api/tags?session=&prefix=` | tag views |
//! | GET | `/api/tags/{name}` | one tag view |
//! | GET | `/api/stream` | SSE, `delta` events carrying tag view arrays |
//! | POST | `/api/control` | [`ApiControlRequest`] -> [`ApiControlResponse`] |
//! | GET | `/api/logs?offset=&limit=` | command and session logs, newest first |

mod handlers;
mod types;

use std::net::SocketAddr;
use std::sync::Arc;

use axum::routing::{get, post};
use axum::Router;
use gridwire_master::Master;
use gridwire_outstation::CommandLog;
use tokio::net::TcpListener;
use tokio::sync::watch;
use tokio::task::JoinHandle;
use tracing::info;

pub use types::{
    ApiControlRequest, ApiControlResponse, ApiError, ApiLogs, ApiSessionView, ApiTagView, ControlAction,
};

pub const DEFAULT_BIND: &str = "127.0.0.1:8080";
pub const DEFAULT_PAGE: usize = 100;

#[derive(Clone)]
pub struct ApiState {
    pub master: Arc<Master>,
    pub command_log: Option<Arc<CommandLog>>,
    stop: watch::Receiver<bool>,
}

pub fn router(state: ApiState) -> Router {
    Router::new()
        .route("/api/sessions", get(handlers::sessions))
        .route("/api/sessions/{name}", get(handlers::session))
        .route("/api/tags", get(handlers::tags))
        .route("/api/tags/{name}", get(handlers::tag))
        .route("/api/stream", get(handlers::stream))
        .route("/api/control", post(handlers::control))
        .route("/api/logs", get(handlers::logs))
        .with_state(state)
}

pub struct ApiServer {
    local_addr: SocketAddr,
    stop: watch::Sender<bool>,
    task: JoinHandle<std::io::Result<()>>,
}

impl ApiServer {
    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    /// Ends open streams and waits for in-flight requests.
    pub async fn shutdown(self) -> std::io::Result<()> {
        let _ = self.stop.send(true);
        self.task.await.unwrap_or(Ok(()))
    }
}

pub async fn serve(
    bind: SocketAddr,
    master: Arc<Master>,
    command_log: Option<Arc<CommandLog>>,
) -> std::io::Result<ApiServer> {
    let listener = TcpListener::bind(bind).await?;
    let local_addr = listener.local_addr()?;
    let (stop, stop_rx) = watch::channel(false);
    let state = ApiState {
        master,
        command_log,
        stop: stop_rx.clone(),
    };
    let app = router(state);
    let mut done = stop_rx;
    let task = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async move {
                let _ = done.wait_for(|s| *s).await;
            })
            .await
    });
    info!(%local_addr, "api listening");
    Ok(ApiServer { local_addr, stop, task })
}
