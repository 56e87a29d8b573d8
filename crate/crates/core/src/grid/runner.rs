//! Runs a [`Simulator`] on a tokio task with a fixed tick and a command queue.

use std::sync::{Arc, RwLock};
use std::time::Duration;

use tokio::sync::{mpsc, oneshot, watch};
use tokio::task::JoinHandle;
use tokio::time::Instant;
use tracing::{debug, warn};

use super::case::GridCase;
use super::sim::{CommandEffect, GridState, SimCommand, SimError, Simulator};

pub const DEFAULT_TICK: Duration = Duration::from_millis(100);

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pacing {
    /// One tick per wall-clock tick interval.
    RealTime,
    /// Simulated time runs `factor` times faster than wall-clock time.
    Accelerated(f64),
    /// Ticks only happen through [`SimHandle::advance`].
    Manual,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunnerConfig {
    pub tick: Duration,
    pub pacing: Pacing,
}

impl Default for RunnerConfig {
    fn default() -> Self {
        Self {
            tick: DEFAULT_TICK,
            pacing: Pacing::RealTime,
        }
    }
}

/// Called on the simulator task after every tick, before the snapshot is published.
pub trait TickObserver: Send + Sync {
    fn on_tick(&self, state: &Arc<GridState>);
}

enum Request {
    Command(SimCommand, oneshot::Sender<Result<CommandEffect, SimError>>),
    Advance(u64, oneshot::Sender<Arc<GridState>>),
    Shutdown,
}

type Observers = Arc<RwLock<Vec<Arc<dyn TickObserver>>>>;

#[derive(Clone)]
pub struct SimHandle {
    tx: mpsc::Sender<Request>,
    snapshot: watch::Receiver<Arc<GridState>>,
    observers: Observers,
    case: Arc<GridCase>,
    tick: Duration,
}

impl SimHandle {
    pub fn case(&self) -> &Arc<GridCase> {
        &self.case
    }

    pub fn tick(&self) -> Duration {
        self.tick
    }

    /// Latest published state.
    pub fn snapshot(&self) -> Arc<GridState> {
        self.snapshot.borrow().clone()
    }

    pub fn subscribe(&self) -> watch::Receiver<Arc<GridState>> {
        self.snapshot.clone()
    }

    pub fn add_observer(&self, observer: Arc<dyn TickObserver>) {
        self.observers.write().expect("observer lock").push(observer);
    }

    /// Queues a command. It takes effect in the state published by the next tick.
    pub async fn command(&self, cmd: SimCommand) -> Result<CommandEffect, SimError> {
        let (tx, rx) = oneshot::channel();
        self.tx
            .send(Request::Command(cmd, tx))
            .await
            .map_err(|_| SimError::Stopped)?;
        rx.await.map_err(|_| SimError::Stopped)?
    }

    /// Runs `ticks` steps immediately and returns the resulting state.
    pub async fn advance(&self, ticks: u64) -> Result<Arc<GridState>, SimError> {
        let (tx, rx) = oneshot::channel();
        self.tx
            .send(Request::Advance(ticks, tx))
            .await
            .map_err(|_| SimError::Stopped)?;
        rx.await.map_err(|_| SimError::Stopped)
    }

    pub async fn shutdown(&self) {
        let _ = self.tx.send(Request::Shutdown).await;
    }
}

struct Runner {
    sim: Simulator,
    dt: f64,
    observers: Observers,
    publish: watch::Sender<Arc<GridState>>,
}

impl Runner {
    fn tick(&mut self) -> Arc<GridState> {
        let state = match self.sim.step(self.dt) {
            Ok(s) => Arc::new(s.clone()),
            Err(e) => unreachable!("tick interval validated at spawn: {e}"),
        };
        let observers = self.observers.read().expect("observer lock").clone();
        for obs in &observers {
            obs.on_tick(&state);
        }
        self.publish.send_replace(Arc::clone(&state));
        state
    }
}

/// Spawns the simulator loop. Must be called inside a tokio runtime.
pub fn spawn_simulator(sim: Simulator, config: RunnerConfig) -> (SimHandle, JoinHandle<()>) {
    let tick = if config.tick.is_zero() { DEFAULT_TICK } else { config.tick };
    let case = Arc::clone(sim.case());
    let (tx, mut rx) = mpsc::channel(64);
    let (publish, snapshot) = watch::channel(Arc::new(sim.state().clone()));
    let observers: Observers = Arc::default();
    let handle = SimHandle {
        tx,
        snapshot,
        observers: Arc::clone(&observers),
        case,
        tick,
    };
    let mut runner = Runner {
        sim,
        dt: tick.as_secs_f64(),
        observers,
        publish,
    };
    let interval = match config.pacing {
        Pacing::RealTime => Some(tick),
        Pacing::Accelerated(f) if f > 0.0 && f.is_finite() => Some(tick.div_f64(f)),
        Pacing::Accelerated(f) => {
            warn!(factor = f, "invalid acceleration factor, running in real time");
            Some(tick)
        }
        Pacing::Manual => None,
    };
    let task = tokio::spawn(async move {
        let mut deadline = Instant::now() + interval.unwrap_or(tick);
        loop {
            tokio::select! {
                biased;
                req = rx.recv() => match req {
                    None | Some(Request::Shutdown) => break,
                    Some(Request::Command(cmd, reply)) => {
                        let out = runner.sim.apply(&cmd);
                        if let Err(e) = &out {
                            debug!(error = %e, "command rejected");
                        }
                        let _ = reply.send(out);
                    }
                    Some(Request::Advance(n, reply)) => {
                        let mut last = runner.sim.state().clone().into();
                        for _ in 0..n {
                            last = runner.tick();
                        }
                        let _ = reply.send(last);
                    }
                },
                _ = tokio::time::sleep_until(deadline), if interval.is_some() => {
                    runner.tick();
                    let step = interval.unwrap_or(tick);
                    deadline += step;
                    let now = Instant::now();
                    if now > deadline + Duration::from_secs(1) {
                        warn!("simulator fell behind wall clock, skipping ahead");
                        deadline = now + step;
                    }
                }
            }
        }
        debug!("simulator task finished");
    });
    (handle, task)
}
