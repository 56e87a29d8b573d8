#![allow(dead_code)]

use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use gridwire_core::grid::{spawn_simulator, GridCase, Pacing, RunnerConfig, SimHandle, Simulator};
use gridwire_core::points::PointMap;
use gridwire_master::{SessionConfig, SessionHandle};
use gridwire_outstation::{serve, ServerConfig, ServerHandle};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::task::JoinSet;

pub fn workspace_file(rel: &str) -> String {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../");
    std::fs::read_to_string(format!("{path}{rel}")).unwrap()
}

pub fn load_case(rel: &str) -> Arc<GridCase> {
    Arc::new(GridCase::from_toml(&workspace_file(rel)).unwrap())
}

pub fn glenrose() -> (Arc<GridCase>, PointMap) {
    let map = PointMap::from_toml(&workspace_file("maps/glenrose_560.toml")).unwrap();
    (load_case("cases/glenrose.toml"), map)
}

pub struct Bench {
    pub sim: SimHandle,
    pub server: ServerHandle,
}

impl Bench {
    pub async fn start(case: Arc<GridCase>, map: &PointMap) -> Self {
        Self::start_on(case, map, "127.0.0.1:0".parse().unwrap()).await
    }

    pub async fn start_on(case: Arc<GridCase>, map: &PointMap, bind: SocketAddr) -> Self {
        let (sim, _task) = spawn_simulator(
            Simulator::new(case),
            RunnerConfig {
                tick: Duration::from_millis(100),
                pacing: Pacing::Manual,
            },
        );
        let server = serve(ServerConfig { bind, ..ServerConfig::default() }, map, sim.clone())
            .await
            .unwrap();
        Self { sim, server }
    }

    pub fn addr(&self) -> SocketAddr {
        self.server.local_addr()
    }
}

/// Session config with test-scale timing. Scheduled polls are slow so tests
/// drive polls explicitly unless they shorten the periods.
pub fn session(name: &str, server: SocketAddr, outstation: u16) -> SessionConfig {
    SessionConfig {
        integrity_poll_period: 60.0,
        class123_poll_period: 30.0,
        poll_timeout: 0.5,
        reconnect_delay: 0.05,
        ..SessionConfig::new(name, server, outstation)
    }
}

pub async fn wait_for(what: &str, mut cond: impl FnMut() -> bool) {
    for _ in 0..500 {
        if cond() {
            return;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    panic!("timed out waiting for {what}");
}

/// Waits until the session has completed its first integrity poll.
pub async fn wait_online(s: &SessionHandle) {
    wait_for("session online", || {
        let h = s.health();
        !h.offline && h.success > 0
    })
    .await;
}

/// TCP relay that can silently swallow traffic in both directions.
pub struct Proxy {
    pub addr: SocketAddr,
    frozen: Arc<AtomicBool>,
    task: tokio::task::JoinHandle<()>,
}

impl Proxy {
    pub async fn start(upstream: SocketAddr) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        let frozen = Arc::new(AtomicBool::new(false));
        let f = frozen.clone();
        let task = tokio::spawn(async move {
            let mut pumps = JoinSet::new();
            loop {
                let Ok((down, _)) = listener.accept().await else { return };
                let Ok(up) = TcpStream::connect(upstream).await else { continue };
                let (dr, dw) = down.into_split();
                let (ur, uw) = up.into_split();
                pumps.spawn(pump(dr, uw, f.clone()));
                pumps.spawn(pump(ur, dw, f.clone()));
            }
        });
        Self { addr, frozen, task }
    }

    pub fn freeze(&self, on: bool) {
        self.frozen.store(on, Ordering::SeqCst);
    }
}

impl Drop for Proxy {
    fn drop(&mut self) {
        self.task.abort();
    }
}

async fn pump(mut from: impl AsyncReadExt + Unpin, mut to: impl AsyncWriteExt + Unpin, frozen: Arc<AtomicBool>) {
    let mut buf = [0u8; 4096];
    loop {
        match from.read(&mut buf).await {
            Ok(0) | Err(_) => return,
            Ok(n) => {
                if frozen.load(Ordering::SeqCst) {
                    continue;
                }
                if to.write_all(&buf[..n]).await.is_err() {
                    return;
                }
            }
        }
    }
}
