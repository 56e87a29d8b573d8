//! One TCP connection: link handling, per-outstation application sessions,
//! reads, confirms and controls.

use std::collections::{HashMap, HashSet, VecDeque};
use std::net::SocketAddr;
use std::sync::Arc;

use gridwire_core::grid::{SetpointKind, SimCommand, SimError};
use gridwire_core::points::{Field, PointType, Target};
use gridwire_core::proto::link::func;
use gridwire_core::proto::{
    decode_app_fragment, encode_link_frame, fragment_frames, AppControl, AppError, AppFragment, CommandStatus,
    FunctionCode, Iin, LinkControl, LinkFrame, LinkReader, ObjectBlock, ObjectBody, PointValue, Reassembler,
    TransportSegment, Variation,
};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::tcp::OwnedWriteHalf;
use tokio::net::TcpStream;
use tokio::sync::watch;
use tokio::time::Instant;
use tracing::{debug, info, warn};

use crate::command_log::{wall_clock_ms, CommandLogEntry};
use crate::database::AnalogEncoding;
use crate::events::{ReaderId, StoredEvent};
use crate::respond::{pack, Packet, Unit};
use crate::server::{ClientInfo, OutstationRt, Shared};

/// Static types in the order a class 0 response lists them.
const STATIC_ORDER: [PointType; 5] = [
    PointType::BinaryInput,
    PointType::BinaryOutput,
    PointType::CounterInput,
    PointType::AnalogInput,
    PointType::AnalogOutput,
];

/// (outstation, master) link address pair.
type SessionKey = (u16, u16);

struct Pending {
    awaiting_seq: u8,
    events: Vec<StoredEvent>,
    rest: VecDeque<Packet>,
    error_iin: Iin,
    deadline: Instant,
}

struct Selection {
    seq: u8,
    objects: Vec<ObjectBlock>,
    at: Instant,
}

struct Session {
    reader: ReaderId,
    reassembler: Reassembler,
    tx_seq: u8,
    pending: Option<Pending>,
    selection: Option<Selection>,
}

struct Connection {
    shared: Arc<Shared>,
    id: u64,
    peer: SocketAddr,
    wr: OwnedWriteHalf,
    sessions: HashMap<SessionKey, Session>,
    unknown: HashSet<u16>,
}

pub(crate) async fn run(
    shared: Arc<Shared>,
    stream: TcpStream,
    peer: SocketAddr,
    id: u64,
    mut shutdown: watch::Receiver<bool>,
) {
    shared.clients.lock().expect("clients lock").insert(
        id,
        ClientInfo {
            id,
            peer: peer.to_string(),
            connected_ms: wall_clock_ms(),
            outstations: Vec::new(),
            masters: Vec::new(),
            fragments: 0,
        },
    );
    let (mut rd, wr) = stream.into_split();
    let mut conn = Connection {
        shared: shared.clone(),
        id,
        peer,
        wr,
        sessions: HashMap::new(),
        unknown: HashSet::new(),
    };
    let mut reader = LinkReader::new();
    let mut buf = vec![0u8; 4096];
    'outer: loop {
        let deadline = conn.next_deadline();
        tokio::select! {
            _ = shutdown.changed() => break,
            read = rd.read(&mut buf) => match read {
                Ok(0) => break,
                Ok(n) => {
                    if let Some(c) = &shared.capture {
                        c.record(id, true, &buf[..n]);
                    }
                    reader.push(&buf[..n]);
                    while let Some(frame) = reader.next_frame() {
                        if let Err(e) = conn.on_frame(frame).await {
                            debug!(%peer, error = %e, "write failed");
                            break 'outer;
                        }
                    }
                }
                Err(e) => {
                    debug!(%peer, error = %e, "read failed");
                    break;
                }
            },
            _ = sleep_until(deadline), if deadline.is_some() => conn.expire(),
        }
    }
    let stats = reader.stats();
    for ((outstation, _), session) in conn.sessions.drain() {
        if let Some(rt) = shared.outstations.get(&outstation) {
            rt.events.lock().expect("event lock").store.detach(session.reader);
        }
    }
    shared.clients.lock().expect("clients lock").remove(&id);
    info!(%peer, id, frames = stats.frames, crc_errors = stats.crc_errors, "client disconnected");
}

async fn sleep_until(deadline: Option<Instant>) {
    match deadline {
        Some(d) => tokio::time::sleep_until(d).await,
        None => std::future::pending().await,
    }
}

fn insert_sorted(v: &mut Vec<u16>, x: u16) {
    if let Err(pos) = v.binary_search(&x) {
        v.insert(pos, x);
    }
}

fn status_for(e: &SimError) -> CommandStatus {
    match e {
        SimError::GeneratorOffline(_) | SimError::Stopped => CommandStatus::HardwareError,
        _ => CommandStatus::NotSupported,
    }
}

impl Connection {
    fn next_deadline(&self) -> Option<Instant> {
        self.sessions
            .values()
            .filter_map(|s| s.pending.as_ref().map(|p| p.deadline))
            .min()
    }

    fn expire(&mut self) {
        let now = Instant::now();
        for ((outstation, master), s) in self.sessions.iter_mut() {
            if s.pending.as_ref().is_some_and(|p| p.deadline <= now) {
                debug!(outstation, master, "confirm timeout, events kept for the next poll");
                s.pending = None;
            }
        }
    }

    async fn write(&mut self, bytes: &[u8]) -> std::io::Result<()> {
        if let Some(c) = &self.shared.capture {
            c.record(self.id, false, bytes);
        }
        self.wr.write_all(bytes).await
    }

    async fn link_reply(&mut self, frame: &LinkFrame, function: u8) -> std::io::Result<()> {
        let control = LinkControl {
            dir: false,
            prm: false,
            fcb: false,
            fcv: false,
            function,
        };
        let bytes = encode_link_frame(&LinkFrame::new(control, frame.source, frame.destination, Vec::new()))
            .expect("empty frame encodes");
        self.write(&bytes).await
    }

    async fn on_frame(&mut self, frame: LinkFrame) -> std::io::Result<()> {
        if !frame.control.dir || !frame.control.prm {
            debug!(peer = %self.peer, control = frame.control.function_name(), "ignoring non-master frame");
            return Ok(());
        }
        if !self.shared.outstations.contains_key(&frame.destination) {
            if self.unknown.insert(frame.destination) {
                warn!(peer = %self.peer, destination = frame.destination, "dropping frame for unknown outstation");
            } else {
                debug!(peer = %self.peer, destination = frame.destination, "dropping frame for unknown outstation");
            }
            return Ok(());
        }
        let key = (frame.destination, frame.source);
        if !self.sessions.contains_key(&key) {
            let reader = (self.id << 16) | frame.source as u64;
            self.shared.outstations[&key.0]
                .events
                .lock()
                .expect("event lock")
                .store
                .attach(reader);
            self.sessions.insert(
                key,
                Session {
                    reader,
                    reassembler: Reassembler::new(self.shared.config.max_fragment.max(2048)),
                    tx_seq: 0,
                    pending: None,
                    selection: None,
                },
            );
            self.shared.update_client(self.id, |c| {
                insert_sorted(&mut c.outstations, key.0);
                insert_sorted(&mut c.masters, key.1);
            });
        }
        match frame.control.function {
            func::RESET_LINK_STATES | func::TEST_LINK_STATES => self.link_reply(&frame, func::ACK).await,
            func::REQUEST_LINK_STATUS => self.link_reply(&frame, func::LINK_STATUS).await,
            func::CONFIRMED_USER_DATA => {
                self.link_reply(&frame, func::ACK).await?;
                self.on_user_data(key, &frame.user_data).await
            }
            func::UNCONFIRMED_USER_DATA => self.on_user_data(key, &frame.user_data).await,
            _ => self.link_reply(&frame, func::NOT_SUPPORTED).await,
        }
    }

    async fn on_user_data(&mut self, key: SessionKey, data: &[u8]) -> std::io::Result<()> {
        let seg = match TransportSegment::decode(data) {
            Ok(s) => s,
            Err(e) => {
                debug!(peer = %self.peer, error = %e, "bad transport segment");
                return Ok(());
            }
        };
        let session = self.sessions.get_mut(&key).expect("session exists");
        match session.reassembler.push(&seg) {
            Ok(Some(bytes)) => {
                self.shared.update_client(self.id, |c| c.fragments += 1);
                self.on_fragment(key, &bytes).await
            }
            Ok(None) => Ok(()),
            Err(e) => {
                debug!(peer = %self.peer, error = %e, "transport reassembly error");
                Ok(())
            }
        }
    }

    async fn on_fragment(&mut self, key: SessionKey, bytes: &[u8]) -> std::io::Result<()> {
        let frag = match decode_app_fragment(bytes) {
            Ok(f) => f,
            Err(e) => {
                // Answer what can be answered: sequence from the control octet,
                // unless this was itself a confirm or response.
                if bytes.len() < 2 || bytes[1] == 0x00 || bytes[1] & 0x80 != 0 {
                    return Ok(());
                }
                let seq = bytes[0] & 0x0F;
                let iin = match e {
                    AppError::UnknownFunction(_) => Iin::NO_FUNC_CODE_SUPPORT,
                    AppError::UnsupportedObject { .. } => Iin::OBJECT_UNKNOWN,
                    _ => Iin::PARAMETER_ERROR,
                };
                debug!(peer = %self.peer, outstation = key.0, error = %e, "rejecting request");
                self.session(key).pending = None;
                return self.send_null(key, seq, iin).await;
            }
        };
        if frag.function == FunctionCode::Confirm {
            return self.on_confirm(key, &frag).await;
        }
        if frag.function.is_response() {
            return Ok(());
        }
        // any new request abandons an unconfirmed response
        self.session(key).pending = None;
        let seq = frag.control.seq;
        match frag.function {
            FunctionCode::Read => self.on_read(key, seq, &frag.objects).await,
            FunctionCode::Write => {
                let mut iin = Iin::default();
                for obj in &frag.objects {
                    if obj.variation != Variation::TimeAndDate {
                        iin.set(Iin::OBJECT_UNKNOWN);
                    }
                }
                self.send_null(key, seq, iin).await
            }
            FunctionCode::Select | FunctionCode::Operate | FunctionCode::DirectOperate => {
                self.on_control(key, &frag).await
            }
            _ => self.send_null(key, seq, Iin::NO_FUNC_CODE_SUPPORT).await,
        }
    }

    fn session(&mut self, key: SessionKey) -> &mut Session {
        self.sessions.get_mut(&key).expect("session exists")
    }

    fn rt(&self, key: SessionKey) -> &OutstationRt {
        &self.shared.outstations[&key.0]
    }

    /// Event-available and overflow bits, ignoring events about to be sent.
    fn event_iin(&self, key: SessionKey, in_flight: &HashSet<u64>) -> Iin {
        let reader = self.sessions[&key].reader;
        let ev = self.rt(key).events.lock().expect("event lock");
        let mut iin = Iin::default();
        for e in ev.store.pending(reader, [true; 3]) {
            if !in_flight.contains(&e.seq) {
                iin.set(Iin::class_events(e.record.class));
            }
        }
        if ev.store.overflow(reader) {
            iin.set(Iin::EVENT_BUFFER_OVERFLOW);
        }
        iin
    }

    async fn send_fragment(&mut self, key: SessionKey, frag: &AppFragment) -> std::io::Result<()> {
        let session = self.session(key);
        let frames = fragment_frames(frag, LinkControl::outstation_data(), key.1, key.0, session.tx_seq)
            .expect("response encodes");
        session.tx_seq = (session.tx_seq + frames.len() as u8) & 0x3F;
        let bytes: Vec<u8> = frames.concat();
        self.write(&bytes).await
    }

    async fn send_null(&mut self, key: SessionKey, seq: u8, extra: Iin) -> std::io::Result<()> {
        let iin = self.event_iin(key, &HashSet::new()) | extra;
        self.send_fragment(key, &AppFragment::response(AppControl::single(seq), iin, Vec::new()))
            .await
    }

    /// Sends the first of `packets`; keeps the rest until the master confirms.
    async fn send_packets(
        &mut self,
        key: SessionKey,
        mut packets: VecDeque<Packet>,
        seq: u8,
        fir: bool,
        error_iin: Iin,
    ) -> std::io::Result<()> {
        let Some(packet) = packets.pop_front() else { return Ok(()) };
        let fin = packets.is_empty();
        let con = !packet.events.is_empty() || !fin;
        let in_flight: HashSet<u64> = packet
            .events
            .iter()
            .chain(packets.iter().flat_map(|p| p.events.iter()))
            .map(|e| e.seq)
            .collect();
        let iin = self.event_iin(key, &in_flight) | error_iin;
        let control = AppControl {
            fir,
            fin,
            con,
            uns: false,
            seq,
        };
        let frag = AppFragment::response(control, iin, packet.objects);
        self.send_fragment(key, &frag).await?;
        if con {
            let deadline = Instant::now() + self.shared.config.confirm_timeout;
            self.session(key).pending = Some(Pending {
                awaiting_seq: seq,
                events: packet.events,
                rest: packets,
                error_iin,
                deadline,
            });
        }
        Ok(())
    }

    async fn on_confirm(&mut self, key: SessionKey, frag: &AppFragment) -> std::io::Result<()> {
        if frag.control.uns {
            return Ok(());
        }
        let seq = frag.control.seq;
        let session = self.session(key);
        let matches = session.pending.as_ref().is_some_and(|p| p.awaiting_seq == seq);
        if !matches {
            debug!(outstation = key.0, seq, "unexpected confirm");
            return Ok(());
        }
        let pending = session.pending.take().expect("pending response");
        let reader = session.reader;
        if !pending.events.is_empty() {
            self.rt(key)
                .events
                .lock()
                .expect("event lock")
                .store
                .confirm(reader, &pending.events);
        }
        self.send_packets(key, pending.rest, (seq + 1) & 0x0F, false, pending.error_iin)
            .await
    }

    async fn on_read(&mut self, key: SessionKey, seq: u8, objects: &[ObjectBlock]) -> std::io::Result<()> {
        let (units, error_iin) = self.collect_read(key, objects);
        let packets: VecDeque<Packet> = pack(units, self.shared.config.max_fragment).into();
        if packets.len() > 1 {
            debug!(outstation = key.0, fragments = packets.len(), "multi-fragment response");
        }
        self.send_packets(key, packets, seq, true, error_iin).await
    }

    fn collect_read(&self, key: SessionKey, objects: &[ObjectBlock]) -> (Vec<Unit>, Iin) {
        let shared = &self.shared;
        let rt = self.rt(key);
        let db = &rt.db;
        let state = shared.sim.snapshot();
        let mut iin = Iin::default();
        let mut classes = [false; 3];
        let mut binary_events = false;
        let mut analog_events = false;
        let mut event_encoding = shared.config.event_analog;
        let mut statics: Vec<Unit> = Vec::new();
        let mut push_static = |t: PointType, indices: &mut dyn Iterator<Item = u16>, enc: AnalogEncoding| {
            let variation = static_variation(t, enc);
            for index in indices {
                if let Some(value) = db.static_value(&shared.case, &state, t, index, enc) {
                    statics.push(Unit::Static {
                        variation,
                        index,
                        value,
                    });
                }
            }
        };
        for obj in objects {
            let v = obj.variation;
            match v {
                Variation::Class0 => {
                    for t in STATIC_ORDER {
                        push_static(t, &mut (0..db.count(t) as u16), shared.config.static_analog);
                    }
                }
                Variation::Class1 | Variation::Class2 | Variation::Class3 => {
                    classes[v.class().expect("class poll") as usize - 1] = true;
                }
                Variation::BinaryEventAny | Variation::BinaryEventTime => binary_events = true,
                Variation::AnalogEventAny => analog_events = true,
                Variation::AnalogEvent32Time | Variation::AnalogEventFloatTime => {
                    analog_events = true;
                    event_encoding = if v == Variation::AnalogEvent32Time {
                        AnalogEncoding::Int32
                    } else {
                        AnalogEncoding::Float
                    };
                }
                _ => match static_request(v, shared.config.static_analog) {
                    Some((t, enc)) => {
                        let count = db.count(t);
                        match &obj.body {
                            ObjectBody::All => push_static(t, &mut (0..count as u16), enc),
                            ObjectBody::Range { start, stop } if (*stop as usize) < count => {
                                push_static(t, &mut (*start..=*stop), enc)
                            }
                            ObjectBody::Indices(list) if list.iter().all(|&i| (i as usize) < count) => {
                                push_static(t, &mut list.iter().copied(), enc)
                            }
                            _ => iin.set(Iin::PARAMETER_ERROR),
                        }
                    }
                    None => iin.set(Iin::OBJECT_UNKNOWN),
                },
            }
        }
        let mut units = Vec::new();
        if classes.iter().any(|&c| c) || binary_events || analog_events {
            let reader = self.sessions[&key].reader;
            let pending = rt.events.lock().expect("event lock").store.pending(reader, [true; 3]);
            for e in pending {
                let r = &e.record;
                let wanted = classes[r.class as usize - 1]
                    || (binary_events && r.point_type == PointType::BinaryInput)
                    || (analog_events && r.point_type == PointType::AnalogInput);
                if wanted {
                    let (variation, value) = crate::database::event_object(r, event_encoding);
                    units.push(Unit::Event {
                        variation,
                        index: r.index,
                        value,
                        event: e,
                    });
                }
            }
        }
        units.extend(statics);
        (units, iin)
    }

    /// Checks one control object against the map. `Ok` carries the simulator command.
    fn plan_control(&self, key: SessionKey, variation: Variation, index: u16, value: &PointValue) -> Result<(SimCommand, String), CommandStatus> {
        let rt = self.rt(key);
        let case = &self.shared.case;
        match (variation, value) {
            (Variation::Crob, PointValue::Crob(crob)) => {
                let bp = rt.db.point(PointType::BinaryOutput, index).ok_or(CommandStatus::NotSupported)?;
                let on = crob.code.target_state().ok_or(CommandStatus::NotSupported)?;
                let cmd = match bp.target {
                    Target::Generator(g) => SimCommand::GenStatus {
                        gen: case.generators[g].id.clone(),
                        on,
                    },
                    Target::Branch(b) => SimCommand::Breaker {
                        branch: case.branches[b].id.clone(),
                        closed: on,
                    },
                    Target::Load(b) => SimCommand::LoadStatus {
                        bus: case.buses[b].id.to_string(),
                        on,
                    },
                    Target::Shunt(b) => SimCommand::ShuntStatus {
                        bus: case.buses[b].id.to_string(),
                        on,
                    },
                    Target::Bus(_) => return Err(CommandStatus::NotSupported),
                };
                Ok((cmd, bp.tag.clone()))
            }
            (Variation::AnalogOutputFloat, PointValue::AnalogCommand { value, .. }) => {
                let bp = rt.db.point(PointType::AnalogOutput, index).ok_or(CommandStatus::NotSupported)?;
                let Target::Generator(g) = bp.target else {
                    return Err(CommandStatus::NotSupported);
                };
                if !value.is_finite() {
                    return Err(CommandStatus::FormatError);
                }
                let kind = match bp.point.field {
                    Field::MwSetpoint => SetpointKind::MwSetpoint,
                    Field::VpuSetpoint => SetpointKind::VpuSetpoint,
                    _ => return Err(CommandStatus::NotSupported),
                };
                Ok((
                    SimCommand::Setpoint {
                        gen: case.generators[g].id.clone(),
                        kind,
                        value: *value as f64,
                    },
                    bp.tag.clone(),
                ))
            }
            _ => Err(CommandStatus::NotSupported),
        }
    }

    async fn on_control(&mut self, key: SessionKey, frag: &AppFragment) -> std::io::Result<()> {
        let seq = frag.control.seq;
        let function = frag.function;
        let mut error_iin = Iin::default();
        let now = Instant::now();
        let select_ok = match function {
            FunctionCode::Operate => {
                let timeout = self.shared.config.select_timeout;
                let sel = self.session(key).selection.take();
                sel.is_some_and(|s| {
                    s.seq.wrapping_add(1) & 0x0F == seq && s.objects == frag.objects && now.duration_since(s.at) <= timeout
                })
            }
            _ => true,
        };
        let mut echo = Vec::with_capacity(frag.objects.len());
        let mut all_ok = true;
        for obj in &frag.objects {
            if !matches!(obj.variation, Variation::Crob | Variation::AnalogOutputFloat) {
                error_iin.set(Iin::OBJECT_UNKNOWN);
                all_ok = false;
                continue;
            }
            let mut items = Vec::new();
            for (index, value) in obj.values() {
                let planned = self.plan_control(key, obj.variation, index, &value);
                let status = match function {
                    FunctionCode::Select => match &planned {
                        Ok((cmd, _)) => self.precheck(cmd),
                        Err(s) => *s,
                    },
                    _ => {
                        let status = if !select_ok {
                            CommandStatus::NoSelect
                        } else {
                            match &planned {
                                Ok((cmd, _)) => match self.shared.sim.command(cmd.clone()).await {
                                    Ok(_) => CommandStatus::Success,
                                    Err(e) => {
                                        warn!(outstation = key.0, error = %e, "control rejected by simulator");
                                        status_for(&e)
                                    }
                                },
                                Err(s) => *s,
                            }
                        };
                        self.log_command(key, function, obj.variation, index, &value, planned.as_ref().ok().map(|p| p.1.as_str()), status);
                        status
                    }
                };
                if status != CommandStatus::Success {
                    all_ok = false;
                }
                items.push((index, with_status(value, status)));
            }
            echo.push(ObjectBlock {
                variation: obj.variation,
                qualifier: obj.qualifier,
                body: ObjectBody::IndexedValues(items),
            });
        }
        if function == FunctionCode::Select && all_ok && !frag.objects.is_empty() {
            self.session(key).selection = Some(Selection {
                seq,
                objects: frag.objects.clone(),
                at: now,
            });
        }
        let iin = self.event_iin(key, &HashSet::new()) | error_iin;
        self.send_fragment(key, &AppFragment::response(AppControl::single(seq), iin, echo))
            .await
    }

    /// SELECT-time check against the latest snapshot.
    fn precheck(&self, cmd: &SimCommand) -> CommandStatus {
        if let SimCommand::Setpoint { gen, .. } = cmd {
            let state = self.shared.sim.snapshot();
            let online = self
                .shared
                .case
                .gen_idx(gen)
                .is_some_and(|g| state.statuses.gen_on[g]);
            if !online {
                return CommandStatus::HardwareError;
            }
        }
        CommandStatus::Success
    }

    #[allow(clippy::too_many_arguments)]
    fn log_command(
        &self,
        key: SessionKey,
        function: FunctionCode,
        variation: Variation,
        index: u16,
        value: &PointValue,
        tag: Option<&str>,
        status: CommandStatus,
    ) {
        let (point_type, command, numeric) = match value {
            PointValue::Crob(c) => (PointType::BinaryOutput, c.code.name(), None),
            PointValue::AnalogCommand { value, .. } => (PointType::AnalogOutput, "ANALOG".to_string(), Some(*value as f64)),
            _ => (PointType::BinaryOutput, variation.to_string(), None),
        };
        let now = wall_clock_ms();
        let entry = self.shared.log.record(CommandLogEntry {
            first_time_ms: now,
            last_time_ms: now,
            sim_time_s: self.shared.sim.snapshot().time,
            source_address: key.1,
            peer: self.peer.to_string(),
            outstation: key.0,
            tag: tag.map_or_else(|| format!("{}_{}_#{}", point_type.abbrev(), key.0, index), str::to_string),
            point_type: point_type.abbrev().to_string(),
            index,
            function: function.name().to_string(),
            command,
            value: numeric,
            status: status.name(),
            count: 1,
        });
        info!(
            outstation = key.0,
            tag = %entry.tag,
            command = %entry.command,
            value = ?entry.value,
            status = %entry.status,
            count = entry.count,
            "command executed"
        );
    }
}

fn with_status(value: PointValue, status: CommandStatus) -> PointValue {
    match value {
        PointValue::Crob(mut c) => {
            c.status = status;
            PointValue::Crob(c)
        }
        PointValue::AnalogCommand { value, .. } => PointValue::AnalogCommand { value, status },
        other => other,
    }
}

fn static_variation(t: PointType, enc: AnalogEncoding) -> Variation {
    match t {
        PointType::BinaryInput => Variation::BinaryInput,
        PointType::BinaryOutput => Variation::BinaryOutputStatus,
        PointType::CounterInput => Variation::Counter32,
        PointType::AnalogInput => enc.static_input(),
        PointType::AnalogOutput => enc.static_output(),
    }
}

/// Point type and analog encoding a static read asks for.
fn static_request(v: Variation, default: AnalogEncoding) -> Option<(PointType, AnalogEncoding)> {
    use Variation::*;
    Some(match v {
        BinaryInputAny | BinaryInput => (PointType::BinaryInput, default),
        BinaryOutputStatusAny | BinaryOutputStatus => (PointType::BinaryOutput, default),
        CounterAny | Counter32 => (PointType::CounterInput, default),
        AnalogInputAny | AnalogOutputStatusAny => (
            if v == AnalogInputAny {
                PointType::AnalogInput
            } else {
                PointType::AnalogOutput
            },
            default,
        ),
        AnalogInput32 => (PointType::AnalogInput, AnalogEncoding::Int32),
        AnalogInputFloat => (PointType::AnalogInput, AnalogEncoding::Float),
        AnalogOutputStatus32 => (PointType::AnalogOutput, AnalogEncoding::Int32),
        AnalogOutputStatusFloat => (PointType::AnalogOutput, AnalogEncoding::Float),
        _ => return None,
    })
}
