//! Per-outstation session: connection management, scheduled polls, health
//! counters and control issuance. Each session runs as one sequential task.

use std::collections::{HashSet, VecDeque};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use gridwire_core::points::{OutstationDef, PointType};
use gridwire_core::proto::{
    AppFragment, CommandStatus, ControlCode, Crob, FunctionCode, Iin, ObjectBlock, PointValue, Variation,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::{broadcast, mpsc, oneshot, watch};
use tokio::task::JoinHandle;
use tokio::time::{sleep_until, Instant};
use tracing::{info, warn};

use crate::channel::{Channel, WireError};
use crate::config::{SessionConfig, BACKOFF_CAP};
use crate::tags::{TagEntry, TagTable};

const SESSION_LOG_LEN: usize = 500;

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Communication health in the controller's naming.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionHealth {
    #[serde(rename = "Offline")]
    pub offline: bool,
    #[serde(rename = "Message_Sent_Count")]
    pub sent: u64,
    #[serde(rename = "Message_Received_Count")]
    pub received: u64,
    #[serde(rename = "Message_Success_Count")]
    pub success: u64,
    #[serde(rename = "Message_Failure_Count")]
    pub failure: u64,
    /// Failed attempts (polls, controls or connects) since the last success.
    pub consecutive_failures: u32,
    pub connected: bool,
}

impl Default for SessionHealth {
    fn default() -> Self {
        Self {
            offline: true,
            sent: 0,
            received: 0,
            success: 0,
            failure: 0,
            consecutive_failures: 0,
            connected: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionLogEntry {
    pub time_ms: u64,
    pub session: String,
    pub level: String,
    pub message: String,
}

/// Tags whose value or quality changed during one poll.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TagDelta {
    pub session: String,
    pub tags: Vec<TagEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperateMode {
    #[default]
    Direct,
    SelectOperate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PollKind {
    /// Classes 1, 2, 3 and 0.
    Integrity,
    /// Classes 1, 2 and 3.
    Events,
}

/// Addresses an output point by tag name or by raw index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OutputRef {
    Tag(String),
    Index(u16),
}

impl From<&str> for OutputRef {
    fn from(s: &str) -> Self {
        OutputRef::Tag(s.to_string())
    }
}

impl From<u16> for OutputRef {
    fn from(i: u16) -> Self {
        OutputRef::Index(i)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OperateError {
    #[error("unknown tag {0}")]
    UnknownTag(String),
    #[error("{tag} is a {actual} point, expected {expected}")]
    WrongType { tag: String, expected: PointType, actual: PointType },
    #[error("value {0} is not a finite number")]
    InvalidValue(f64),
    #[error("session is offline")]
    Offline,
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("outstation rejected the request (IIN {0})")]
    Rejected(String),
    #[error("control echo does not match the request")]
    EchoMismatch,
    #[error("session stopped")]
    Stopped,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PollError {
    #[error("session is offline")]
    Offline,
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("session stopped")]
    Stopped,
}

enum Request {
    Operate {
        objects: Vec<ObjectBlock>,
        mode: OperateMode,
        reply: oneshot::Sender<Result<CommandStatus, OperateError>>,
    },
    Poll {
        kind: PollKind,
        reply: oneshot::Sender<Result<(), PollError>>,
    },
}

pub(crate) struct SessionShared {
    pub config: SessionConfig,
    pub tags: RwLock<TagTable>,
    pub health: Mutex<SessionHealth>,
    pub log: Mutex<VecDeque<SessionLogEntry>>,
    pub deltas: broadcast::Sender<Arc<TagDelta>>,
}

impl SessionShared {
    fn note(&self, level: &str, message: String) {
        match level {
            "warn" => warn!(session = %self.config.name, "{message}"),
            _ => info!(session = %self.config.name, "{message}"),
        }
        let mut log = self.log.lock().expect("log lock");
        if log.len() == SESSION_LOG_LEN {
            log.pop_front();
        }
        log.push_back(SessionLogEntry {
            time_ms: now_ms(),
            session: self.config.name.clone(),
            level: level.into(),
            message,
        });
    }

    fn publish(&self, tags: Vec<TagEntry>) {
        if !tags.is_empty() {
            let _ = self.deltas.send(Arc::new(TagDelta {
                session: self.config.name.clone(),
                tags,
            }));
        }
    }

    /// Records a failed attempt. `message` marks attempts that put a request on the wire.
    fn failed(&self, message: bool, why: &WireError) {
        let went_offline = {
            let mut h = self.health.lock().expect("health lock");
            if message {
                h.failure += 1;
            }
            h.consecutive_failures += 1;
            let trip = !h.offline && h.consecutive_failures >= self.config.max_retries;
            if trip {
                h.offline = true;
            }
            trip
        };
        if went_offline {
            let changed = self.tags.write().expect("tag lock").invalidate();
            self.note("warn", format!("offline after {} consecutive failures ({why})", self.config.max_retries));
            self.publish(changed);
        }
    }

    /// Records a successful exchange. Returns true when this ended an offline period.
    fn succeeded(&self) -> bool {
        let recovered = {
            let mut h = self.health.lock().expect("health lock");
            h.success += 1;
            h.consecutive_failures = 0;
            std::mem::replace(&mut h.offline, false)
        };
        if recovered {
            self.note("info", "online".into());
        }
        recovered
    }

    fn is_offline(&self) -> bool {
        self.health.lock().expect("health lock").offline
    }
}

/// Handle to a running session.
#[derive(Clone)]
pub struct SessionHandle {
    pub(crate) shared: Arc<SessionShared>,
    tx: mpsc::Sender<Request>,
}

impl SessionHandle {
    pub fn name(&self) -> &str {
        &self.shared.config.name
    }

    pub fn config(&self) -> &SessionConfig {
        &self.shared.config
    }

    pub fn health(&self) -> SessionHealth {
        *self.shared.health.lock().expect("health lock")
    }

    pub fn tags(&self) -> Vec<TagEntry> {
        self.shared.tags.read().expect("tag lock").entries().to_vec()
    }

    pub fn tag(&self, name: &str) -> Option<TagEntry> {
        self.shared.tags.read().expect("tag lock").get(name).cloned()
    }

    pub fn tag_at(&self, point_type: PointType, index: u16) -> Option<TagEntry> {
        self.shared.tags.read().expect("tag lock").by_point(point_type, index).cloned()
    }

    /// Newest-first session events.
    pub fn log(&self) -> Vec<SessionLogEntry> {
        self.shared.log.lock().expect("log lock").iter().rev().cloned().collect()
    }

    /// Runs a poll now and waits for it to finish.
    pub async fn poll(&self, kind: PollKind) -> Result<(), PollError> {
        let (reply, rx) = oneshot::channel();
        self.tx.send(Request::Poll { kind, reply }).await.map_err(|_| PollError::Stopped)?;
        rx.await.map_err(|_| PollError::Stopped)?
    }

    fn resolve(&self, target: &OutputRef, expected: PointType) -> Result<u16, OperateError> {
        match target {
            OutputRef::Index(i) => Ok(*i),
            OutputRef::Tag(name) => {
                let tags = self.shared.tags.read().expect("tag lock");
                let e = tags.get(name).ok_or_else(|| OperateError::UnknownTag(name.clone()))?;
                if e.point.point_type != expected {
                    return Err(OperateError::WrongType {
                        tag: name.clone(),
                        expected,
                        actual: e.point.point_type,
                    });
                }
                Ok(e.point.index)
            }
        }
    }

    async fn operate(&self, objects: Vec<ObjectBlock>, mode: OperateMode) -> Result<CommandStatus, OperateError> {
        let (reply, rx) = oneshot::channel();
        self.tx
            .send(Request::Operate { objects, mode, reply })
            .await
            .map_err(|_| OperateError::Stopped)?;
        rx.await.map_err(|_| OperateError::Stopped)?
    }

    /// Sends a CROB to a binary output.
    pub async fn operate_binary(
        &self,
        target: impl Into<OutputRef>,
        code: ControlCode,
        mode: OperateMode,
    ) -> Result<CommandStatus, OperateError> {
        let index = self.resolve(&target.into(), PointType::BinaryOutput)?;
        let obj = ObjectBlock::indexed(Variation::Crob, vec![(index, PointValue::Crob(Crob::new(code)))]);
        self.operate(vec![obj], mode).await
    }

    /// Sends a g41v3 value to an analog output.
    pub async fn operate_analog(
        &self,
        target: impl Into<OutputRef>,
        value: f64,
        mode: OperateMode,
    ) -> Result<CommandStatus, OperateError> {
        let index = self.resolve(&target.into(), PointType::AnalogOutput)?;
        if !value.is_finite() {
            return Err(OperateError::InvalidValue(value));
        }
        let obj = ObjectBlock::indexed(
            Variation::AnalogOutputFloat,
            vec![(
                index,
                PointValue::AnalogCommand {
                    value: value as f32,
                    status: CommandStatus::Success,
                },
            )],
        );
        self.operate(vec![obj], mode).await
    }
}

pub(crate) fn spawn_session(
    config: SessionConfig,
    def: &OutstationDef,
    deltas: broadcast::Sender<Arc<TagDelta>>,
    stop: watch::Receiver<bool>,
) -> (SessionHandle, JoinHandle<()>) {
    let shared = Arc::new(SessionShared {
        config,
        tags: RwLock::new(TagTable::from_outstation(def)),
        health: Mutex::new(SessionHealth::default()),
        log: Mutex::new(VecDeque::new()),
        deltas,
    });
    let (tx, rx) = mpsc::channel(32);
    let task = tokio::spawn(
        Runner {
            shared: shared.clone(),
            rx,
            stop,
            unknown_points: HashSet::new(),
        }
        .run(),
    );
    (SessionHandle { shared, tx }, task)
}

enum Exit {
    Stop,
    Reconnect,
}

struct Runner {
    shared: Arc<SessionShared>,
    rx: mpsc::Receiver<Request>,
    stop: watch::Receiver<bool>,
    unknown_points: HashSet<(PointType, u16)>,
}

impl Runner {
    fn cfg(&self) -> &SessionConfig {
        &self.shared.config
    }

    fn set_connected(&self, connected: bool) {
        self.shared.health.lock().expect("health lock").connected = connected;
    }

    async fn run(mut self) {
        let mut backoff = self.cfg().reconnect();
        let mut delay = Duration::ZERO;
        loop {
            if delay > Duration::ZERO && !self.wait_offline(delay).await {
                return;
            }
            let cfg = self.cfg().clone();
            let attempt = tokio::select! {
                _ = self.stop.changed() => return,
                r = Channel::connect(cfg.server_addr(), cfg.timeout(), cfg.client_dnp_address, cfg.server_dnp_address) => r,
            };
            match attempt {
                Ok(ch) => {
                    self.shared.note("info", format!("connected to {}", cfg.server_addr()));
                    self.set_connected(true);
                    backoff = cfg.reconnect();
                    let exit = self.connected(ch).await;
                    self.set_connected(false);
                    match exit {
                        Exit::Stop => return,
                        Exit::Reconnect => delay = Duration::ZERO,
                    }
                }
                Err(e) => {
                    self.shared.note("warn", format!("connect to {} failed: {e}", cfg.server_addr()));
                    self.shared.failed(false, &e);
                    delay = backoff;
                    backoff = (backoff * 2).min(BACKOFF_CAP);
                }
            }
        }
    }

    /// Sleeps while disconnected, refusing requests. Returns false on stop.
    async fn wait_offline(&mut self, delay: Duration) -> bool {
        let until = Instant::now() + delay;
        loop {
            tokio::select! {
                _ = self.stop.changed() => return false,
                req = self.rx.recv() => match req {
                    None => return false,
                    Some(Request::Operate { reply, .. }) => { let _ = reply.send(Err(OperateError::Offline)); }
                    Some(Request::Poll { reply, .. }) => { let _ = reply.send(Err(PollError::Offline)); }
                },
                _ = sleep_until(until) => return true,
            }
        }
    }

    async fn connected(&mut self, mut ch: Channel) -> Exit {
        let integrity_period = self.cfg().integrity_period();
        let class_period = self.cfg().class_period();
        let mut next_integrity = Instant::now();
        let mut next_class = Instant::now() + class_period;
        loop {
            let due = next_integrity.min(next_class);
            let (kind, user_reply) = tokio::select! {
                biased;
                _ = self.stop.changed() => return Exit::Stop,
                req = self.rx.recv() => match req {
                    None => return Exit::Stop,
                    Some(Request::Operate { objects, mode, reply }) => {
                        if self.shared.is_offline() && self.shared.health.lock().expect("health lock").success > 0 {
                            let _ = reply.send(Err(OperateError::Offline));
                            continue;
                        }
                        let result = self.operate(&mut ch, objects, mode).await;
                        let fatal = matches!(&result, Err(OperateError::Wire(e)) if e.is_fatal());
                        if result == Ok(CommandStatus::Success) {
                            next_class = Instant::now();
                        }
                        let _ = reply.send(result);
                        if fatal {
                            return Exit::Reconnect;
                        }
                        continue;
                    }
                    Some(Request::Poll { kind, reply }) => (kind, Some(reply)),
                },
                _ = sleep_until(due) => {
                    let kind = if next_integrity <= Instant::now() { PollKind::Integrity } else { PollKind::Events };
                    (kind, None)
                }
            };
            let result = self.poll(&mut ch, kind).await;
            let now = Instant::now();
            let exit = match &result {
                Ok(recovered) => {
                    next_class = now + class_period;
                    if kind == PollKind::Integrity {
                        next_integrity = now + integrity_period;
                    } else if *recovered {
                        next_integrity = now;
                    }
                    false
                }
                Err(e) => {
                    if self.shared.is_offline() {
                        next_integrity = now;
                    }
                    e.is_fatal()
                }
            };
            if let Some(reply) = user_reply {
                let _ = reply.send(result.map(|_| ()).map_err(PollError::Wire));
            }
            if exit {
                return Exit::Reconnect;
            }
        }
    }

    async fn exchange(&mut self, ch: &mut Channel, function: FunctionCode, objects: Vec<ObjectBlock>) -> Result<Vec<AppFragment>, WireError> {
        let before = ch.received;
        self.shared.health.lock().expect("health lock").sent += 1;
        let result = ch.transact(function, objects, self.cfg().timeout()).await;
        self.shared.health.lock().expect("health lock").received += ch.received - before;
        result
    }

    /// Runs one poll. `Ok(true)` means the session just came back online.
    async fn poll(&mut self, ch: &mut Channel, kind: PollKind) -> Result<bool, WireError> {
        use Variation::*;
        let classes: &[Variation] = match kind {
            PollKind::Integrity => &[Class1, Class2, Class3, Class0],
            PollKind::Events => &[Class1, Class2, Class3],
        };
        let objects = classes.iter().map(|&v| ObjectBlock::all(v)).collect();
        match self.exchange(ch, FunctionCode::Read, objects).await {
            Ok(frags) => {
                let recovered = self.shared.succeeded();
                self.absorb(&frags, kind == PollKind::Integrity);
                Ok(recovered)
            }
            Err(e) => {
                self.shared.failed(true, &e);
                Err(e)
            }
        }
    }

    fn absorb(&mut self, frags: &[AppFragment], integrity: bool) {
        let now = now_ms();
        let mut changed: Vec<TagEntry> = Vec::new();
        let mut unknown = Vec::new();
        {
            let mut tags = self.shared.tags.write().expect("tag lock");
            for frag in frags {
                for obj in &frag.objects {
                    let Some(pt) = crate::tags::point_type_of(obj.variation) else { continue };
                    for (index, value) in obj.values() {
                        let before = tags.by_point(pt, index).cloned();
                        match tags.apply(obj.variation, index, &value, now, integrity) {
                            Some(after) => {
                                let differs = before.as_ref().is_none_or(|b| {
                                    b.inst_mag != after.inst_mag || b.mag != after.mag || b.validity != after.validity || b.flags != after.flags
                                });
                                if differs {
                                    changed.retain(|c| c.name != after.name);
                                    changed.push(after.clone());
                                }
                            }
                            None => unknown.push((pt, index)),
                        }
                    }
                }
            }
        }
        for p in unknown {
            if self.unknown_points.insert(p) {
                self.shared.note("warn", format!("response carries {} index {} which is not in the map", p.0, p.1));
            }
        }
        let iin = frags.iter().filter_map(|f| f.iin).fold(Iin::default(), |a, b| a | b);
        for (bit, what) in [
            (Iin::PARAMETER_ERROR, "PARAMETER_ERROR"),
            (Iin::OBJECT_UNKNOWN, "OBJECT_UNKNOWN"),
            (Iin::NO_FUNC_CODE_SUPPORT, "NO_FUNC_CODE_SUPPORT"),
            (Iin::EVENT_BUFFER_OVERFLOW, "EVENT_BUFFER_OVERFLOW"),
        ] {
            if iin.contains(bit) {
                self.shared.note("warn", format!("outstation reports {what}"));
            }
        }
        self.shared.publish(changed);
    }

    async fn operate(&mut self, ch: &mut Channel, objects: Vec<ObjectBlock>, mode: OperateMode) -> Result<CommandStatus, OperateError> {
        if mode == OperateMode::SelectOperate {
            let status = self.control_step(ch, FunctionCode::Select, &objects).await?;
            if status != CommandStatus::Success {
                return Ok(status);
            }
            return self.control_step(ch, FunctionCode::Operate, &objects).await;
        }
        self.control_step(ch, FunctionCode::DirectOperate, &objects).await
    }

    async fn control_step(&mut self, ch: &mut Channel, function: FunctionCode, objects: &[ObjectBlock]) -> Result<CommandStatus, OperateError> {
        let frags = match self.exchange(ch, function, objects.to_vec()).await {
            Ok(f) => f,
            Err(e) => {
                self.shared.failed(true, &e);
                return Err(e.into());
            }
        };
        self.shared.succeeded();
        let resp = &frags[0];
        let echo = check_echo(objects, &resp.objects);
        let status = match echo {
            Some(s) => s,
            None if resp.objects.is_empty() => {
                return Err(OperateError::Rejected(resp.iin.unwrap_or_default().to_string()));
            }
            None => return Err(OperateError::EchoMismatch),
        };
        let what: Vec<String> = objects
            .iter()
            .flat_map(|o| o.values())
            .map(|(i, v)| match v {
                PointValue::Crob(c) => format!("BO {i} {}", c.code.name()),
                other => format!("AO {i} {}", other.as_f64()),
            })
            .collect();
        self.shared
            .note("info", format!("{} {} -> {}", function.name(), what.join(", "), status.name()));
        Ok(status)
    }
}

/// Returns the first non-success status (or success) when the echo matches the request.
fn check_echo(request: &[ObjectBlock], response: &[ObjectBlock]) -> Option<CommandStatus> {
    if request.len() != response.len() {
        return None;
    }
    let mut status = CommandStatus::Success;
    for (q, r) in request.iter().zip(response) {
        if q.variation != r.variation {
            return None;
        }
        let (qv, rv) = (q.values(), r.values());
        if qv.len() != rv.len() {
            return None;
        }
        for ((qi, qv), (ri, rv)) in qv.iter().zip(&rv) {
            let (same, s) = match (qv, rv) {
                (PointValue::Crob(a), PointValue::Crob(b)) => (
                    a.code == b.code && a.count == b.count && a.on_time_ms == b.on_time_ms && a.off_time_ms == b.off_time_ms,
                    b.status,
                ),
                (PointValue::AnalogCommand { value: a, .. }, PointValue::AnalogCommand { value: b, status }) => {
                    (a.to_bits() == b.to_bits(), *status)
                }
                _ => (false, CommandStatus::Success),
            };
            if qi != ri || !same {
                return None;
            }
            if status == CommandStatus::Success {
                status = s;
            }
        }
    }
    Some(status)
}
