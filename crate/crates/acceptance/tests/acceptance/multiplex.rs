//! Three outstations behind one listener with three concurrent sessions.

use std::collections::HashSet;
use std::time::Duration;

use futures::future::join_all;
use gridwire_acceptance::{ensure, Verdict};
use gridwire_core::points::{autogen_map, read_point, AutogenPolicy, PointType, Reading, Target};
use gridwire_core::proto::{CommandStatus, FunctionCode, Variation};
use gridwire_master::{Master, OperateMode, PollKind, SessionHandle, TagValue, Validity};

use crate::bench::{integrity, load_case, session, wait_for, wait_online, Bench, RawClient};

const OUTSTATIONS: [u16; 3] = [560, 561, 562];
const EVENTS: [Variation; 3] = [
    Variation::BinaryEventTime,
    Variation::AnalogEvent32Time,
    Variation::AnalogEventFloatTime,
];
/// Setpoint per outstation, distinct so a misrouted command shows up.
const SETPOINTS: [f64; 3] = [120.0, 130.0, 60.0];

pub async fn run() -> Verdict {
    let case = load_case("cases/ring3.toml")?;
    let map = autogen_map(&case, &AutogenPolicy::default()).map_err(|e| e.to_string())?;
    let bench = Bench::start(case.clone(), &map).await?;
    let configs = OUTSTATIONS
        .iter()
        .enumerate()
        .map(|(k, os)| {
            let mut c = session(&format!("RTAC_{os}"), bench.addr(), *os);
            c.client_dnp_address = 10 + k as u16;
            c.class123_poll_period = 0.05;
            c
        })
        .collect();
    let master = Master::start(configs, &map).map_err(|e| e.to_string())?;
    let sessions: Vec<SessionHandle> = master.sessions().to_vec();
    let verdict = async {
        for s in &sessions {
            wait_online(s).await?;
        }
        wait_for("three connections", Duration::from_secs(5), || bench.server.clients().len() == 3).await?;

        // disjoint tag sets that together cover the map
        let mut all = HashSet::new();
        for (s, os) in sessions.iter().zip(OUTSTATIONS) {
            let def = map.outstation(os).ok_or("outstation missing")?;
            let tags = s.tags();
            ensure!(tags.len() == def.points.len(), "{} holds {} tags for {} points", s.name(), tags.len(), def.points.len());
            for t in &tags {
                ensure!(t.point.outstation == os, "{} holds {} from {}", s.name(), t.name, t.point.outstation);
                ensure!(all.insert(t.name.clone()), "{} appears in two sessions", t.name);
            }
        }
        ensure!(all.len() == map.point_count(), "sessions hold {} tags, map has {}", all.len(), map.point_count());

        // concurrent controls, one per session
        let ops = sessions.iter().zip(SETPOINTS).map(|(s, mw)| {
            let tag = format!("AO_{}_Generator_{}_1_MWSETPOINT", s.config().server_dnp_address, bus_of(s));
            async move { s.operate_analog(tag.as_str(), mw, OperateMode::Direct).await }
        });
        for (k, r) in join_all(ops).await.into_iter().enumerate() {
            let status = r.map_err(|e| format!("{}: {e}", sessions[k].name()))?;
            ensure!(status == CommandStatus::Success, "{}: {status}", sessions[k].name());
        }
        let state = bench.sim.advance(3).await.map_err(|e| e.to_string())?;
        for (k, mw) in SETPOINTS.iter().enumerate() {
            let g = case.gen_idx(&format!("{}_1", k + 1)).ok_or("unit missing")?;
            ensure!(state.gen_setpoint[g] == *mw, "unit {} setpoint {} expected {mw}", k + 1, state.gen_setpoint[g]);
        }
        let log = bench.server.command_log().entries();
        ensure!(log.len() == 3, "command log has {} entries", log.len());
        for e in &log {
            let k = OUTSTATIONS.iter().position(|os| *os == e.outstation).ok_or("unknown outstation in log")?;
            ensure!(
                e.source_address == 10 + k as u16 && e.value == Some(SETPOINTS[k]),
                "log entry crossed sessions: {e:?}"
            );
        }

        // simultaneous integrity polls against one frozen snapshot
        let polls = sessions.iter().map(|s| s.poll(PollKind::Integrity));
        for (k, r) in join_all(polls).await.into_iter().enumerate() {
            r.map_err(|e| format!("{}: {e}", sessions[k].name()))?;
        }
        let state = bench.sim.snapshot();
        for (s, os) in sessions.iter().zip(OUTSTATIONS) {
            let def = map.outstation(os).ok_or("outstation missing")?;
            for t in s.tags() {
                ensure!(t.validity == Validity::Good, "{} not good", t.name);
                let p = def.point(t.point.point_type, t.point.index).ok_or("point missing")?;
                if t.point.point_type == PointType::CounterInput {
                    continue;
                }
                let target = Target::resolve(&case, p.device, &p.key).ok_or("target missing")?;
                let truth = read_point(&case, &state, target, t.point.point_type, p.field).value;
                let matches = match (truth, t.inst_mag) {
                    (Reading::Binary(b), Some(TagValue::Binary(v))) => b == v,
                    (Reading::Analog(a), Some(TagValue::Analog(v))) => a as f32 as f64 == v,
                    _ => false,
                };
                ensure!(matches, "{}: tag {:?} vs simulator {truth:?}", t.name, t.inst_mag);
            }
            let h = s.health();
            ensure!(
                !h.offline && h.failure == 0 && h.consecutive_failures == 0 && h.success + h.failure <= h.sent,
                "{} health {h:?}",
                s.name()
            );
        }

        // wire view: each address answers for itself with its own point count
        let mut raw = RawClient::connect(bench.addr(), 99).await?;
        for os in OUTSTATIONS {
            let frags = raw.request(os, FunctionCode::Read, integrity()).await?;
            let statics: usize = frags
                .iter()
                .flat_map(|f| &f.objects)
                .filter(|b| !EVENTS.contains(&b.variation))
                .map(|b| b.count())
                .sum();
            let expected = map.outstation(os).ok_or("outstation missing")?.points.len();
            ensure!(statics == expected, "outstation {os} reported {statics} static points, map has {expected}");
        }
        Ok(format!(
            "3 sessions, {} disjoint tags, 3 concurrent controls routed, snapshots match per outstation",
            all.len()
        ))
    }
    .await;
    master.shutdown().await;
    bench.stop().await;
    verdict
}

/// Bus of the single unit behind a ring3 session, 560 -> 1 and so on.
fn bus_of(s: &SessionHandle) -> u16 {
    s.config().server_dnp_address - 559
}
