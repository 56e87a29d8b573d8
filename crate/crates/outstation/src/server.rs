//! Listener, shared outstation runtime and the per-tick event scan.

use std::collections::BTreeMap;
use std::io;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, Weak};
use std::time::Duration;

use gridwire_core::grid::{GridCase, GridState, SimHandle, TickObserver};
use gridwire_core::points::{MapError, PointMap};
use serde::Serialize;
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::watch;
use tokio::task::{JoinHandle, JoinSet};
use tracing::{debug, info, warn};

use crate::command_log::{CommandLog, DEFAULT_LOG_ENTRIES};
use crate::capture::Capture;
use crate::config::{ServerConfig, MIN_MAX_FRAGMENT};
use crate::connection;
use crate::database::{OutstationDb, Scanner};
use crate::events::EventStore;

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: io::Error },
    #[error("point map does not match the case: {0}")]
    Map(#[from] MapError),
    #[error("cannot open command log: {0}")]
    CommandLog(io::Error),
    #[error("cannot open capture file: {0}")]
    Capture(io::Error),
    #[error("max_fragment must be at least {MIN_MAX_FRAGMENT}")]
    FragmentSize,
}

pub(crate) struct EventState {
    pub store: EventStore,
    pub scanner: Scanner,
}

pub(crate) struct OutstationRt {
    pub db: OutstationDb,
    pub events: Mutex<EventState>,
}

/// One connected master socket.
#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct ClientInfo {
    pub id: u64,
    pub peer: String,
    pub connected_ms: u64,
    /// Outstations this client has addressed.
    pub outstations: Vec<u16>,
    /// Link source addresses seen from this client.
    pub masters: Vec<u16>,
    pub fragments: u64,
}

pub(crate) struct Shared {
    pub config: ServerConfig,
    pub case: Arc<GridCase>,
    pub sim: SimHandle,
    pub outstations: BTreeMap<u16, OutstationRt>,
    pub log: Arc<CommandLog>,
    pub capture: Option<Capture>,
    pub clients: Mutex<BTreeMap<u64, ClientInfo>>,
}

impl Shared {
    pub fn update_client(&self, id: u64, f: impl FnOnce(&mut ClientInfo)) {
        if let Some(c) = self.clients.lock().expect("clients lock").get_mut(&id) {
            f(c);
        }
    }
}

struct ScanObserver(Weak<Shared>);

impl TickObserver for ScanObserver {
    fn on_tick(&self, state: &Arc<GridState>) {
        let Some(shared) = self.0.upgrade() else { return };
        for rt in shared.outstations.values() {
            let mut ev = rt.events.lock().expect("event lock");
            let EventState { store, scanner } = &mut *ev;
            let n = scanner.scan(&rt.db, &shared.case, state, store);
            if n > 0 {
                debug!(outstation = rt.db.number, events = n, "events queued");
            }
        }
    }
}

/// A running server. Dropping the handle leaves the server running; call
/// [`ServerHandle::shutdown`] to stop it.
pub struct ServerHandle {
    local_addr: SocketAddr,
    shared: Arc<Shared>,
    shutdown: watch::Sender<bool>,
    task: JoinHandle<()>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn command_log(&self) -> Arc<CommandLog> {
        self.shared.log.clone()
    }

    pub fn clients(&self) -> Vec<ClientInfo> {
        self.shared.clients.lock().expect("clients lock").values().cloned().collect()
    }

    pub fn outstations(&self) -> Vec<u16> {
        self.shared.outstations.keys().copied().collect()
    }

    /// Retained events per class for one outstation.
    pub fn event_backlog(&self, outstation: u16) -> Option<[usize; 3]> {
        let rt = self.shared.outstations.get(&outstation)?;
        let ev = rt.events.lock().expect("event lock");
        Some([ev.store.len(1), ev.store.len(2), ev.store.len(3)])
    }

    /// Closes the listener and every connection, then flushes the command log.
    pub async fn shutdown(self) {
        let _ = self.shutdown.send(true);
        let _ = self.task.await;
        if let Err(e) = self.shared.log.flush() {
            warn!(error = %e, "command log flush failed");
        }
    }
}

/// Binds the listener and starts serving every outstation in `map`.
pub async fn serve(config: ServerConfig, map: &PointMap, sim: SimHandle) -> Result<ServerHandle, ServerError> {
    if config.max_fragment < MIN_MAX_FRAGMENT {
        return Err(ServerError::FragmentSize);
    }
    let case = sim.case().clone();
    map.validate_against(&case)?;
    let state = sim.snapshot();
    let mut outstations = BTreeMap::new();
    for def in map.outstations() {
        let db = OutstationDb::build(def, &case)?;
        let scanner = Scanner::new(&db, &case, &state);
        outstations.insert(
            def.number,
            OutstationRt {
                db,
                events: Mutex::new(EventState {
                    store: EventStore::new(config.event_capacity),
                    scanner,
                }),
            },
        );
    }
    let log = match &config.command_log {
        Some(path) => CommandLog::with_file(DEFAULT_LOG_ENTRIES, path).map_err(ServerError::CommandLog)?,
        None => CommandLog::default(),
    };
    let capture = match &config.capture {
        Some(path) => Some(Capture::create(path).map_err(ServerError::Capture)?),
        None => None,
    };
    let listener = TcpListener::bind(config.bind).await.map_err(|source| ServerError::Bind {
        addr: config.bind,
        source,
    })?;
    let local_addr = listener.local_addr().map_err(|source| ServerError::Bind {
        addr: config.bind,
        source,
    })?;
    let shared = Arc::new(Shared {
        config,
        case,
        sim: sim.clone(),
        outstations,
        log: Arc::new(log),
        capture,
        clients: Mutex::new(BTreeMap::new()),
    });
    sim.add_observer(Arc::new(ScanObserver(Arc::downgrade(&shared))));
    info!(%local_addr, outstations = ?shared.outstations.keys().collect::<Vec<_>>(), "outstation server listening");
    let (tx, rx) = watch::channel(false);
    let task = tokio::spawn(accept_loop(listener, shared.clone(), rx));
    Ok(ServerHandle {
        local_addr,
        shared,
        shutdown: tx,
        task,
    })
}

async fn accept_loop(listener: TcpListener, shared: Arc<Shared>, mut shutdown: watch::Receiver<bool>) {
    let next_id = AtomicU64::new(1);
    let mut tasks = JoinSet::new();
    loop {
        tokio::select! {
            _ = shutdown.changed() => break,
            accepted = listener.accept() => match accepted {
                Ok((stream, peer)) => {
                    let _ = stream.set_nodelay(true);
                    let id = next_id.fetch_add(1, Ordering::Relaxed);
                    info!(%peer, id, "client connected");
                    tasks.spawn(connection::run(shared.clone(), stream, peer, id, shutdown.clone()));
                }
                Err(e) => {
                    warn!(error = %e, "accept failed");
                    tokio::time::sleep(Duration::from_millis(100)).await;
                }
            },
            Some(_) = tasks.join_next(), if !tasks.is_empty() => {}
        }
    }
    drop(listener);
    while tasks.join_next().await.is_some() {}
    info!("outstation server stopped");
}
