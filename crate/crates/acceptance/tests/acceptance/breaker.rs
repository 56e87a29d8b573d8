//! Latch-off of a branch breaker through the master, checked through the
//! master's tags, an independent wire reader and the server command log.

use gridwire_acceptance::{ensure, Verdict};
use gridwire_core::proto::{CommandStatus, ControlCode, FunctionCode, PointValue, Variation};
use gridwire_master::{Master, OperateMode, PollKind, TagValue};

use crate::bench::{events_only, integrity, load_case, load_map, session, wait_online, Bench, RawClient};

const OS: u16 = 560;
const MASTER_ADDRESS: u16 = 1;
const OBSERVER_ADDRESS: u16 = 7;
const BREAKER: &str = "BO_560_Branch_5047_5260_1_STATUS";
const STATUS: &str = "BI_560_Branch_5047_5260_1_STATUS";
const P: &str = "AI_560_Branch_5047_5260_1_MW";
const Q: &str = "AI_560_Branch_5047_5260_1_MVAR";

pub async fn run() -> Verdict {
    let case = load_case("cases/glenrose.toml")?;
    let map = load_map("maps/glenrose_560.toml")?;
    let bench = Bench::start(case, &map).await?;
    let mut cfg = session("PowerWorld_RTAC_560", bench.addr(), OS);
    cfg.client_dnp_address = MASTER_ADDRESS;
    let master = Master::start(vec![cfg], &map).map_err(|e| e.to_string())?;
    let s = master.sessions()[0].clone();
    let verdict = async {
        wait_online(&s).await?;
        let bi_index = s.tag(STATUS).ok_or("status tag missing")?.point.index;
        let mut observer = RawClient::connect(bench.addr(), OBSERVER_ADDRESS).await?;
        observer.request(OS, FunctionCode::Read, integrity()).await?;
        ensure!(
            s.tag(STATUS).and_then(|t| t.inst_mag) == Some(TagValue::Binary(true)),
            "breaker not closed at start"
        );

        let status = s
            .operate_binary(BREAKER, ControlCode::LATCH_OFF, OperateMode::Direct)
            .await
            .map_err(|e| e.to_string())?;
        ensure!(status == CommandStatus::Success, "command status {status}");
        bench.sim.advance(1).await.map_err(|e| e.to_string())?;
        s.poll(PollKind::Events).await.map_err(|e| e.to_string())?;

        let value = |name: &str| s.tag(name).and_then(|t| t.inst_mag);
        ensure!(value(STATUS) == Some(TagValue::Binary(false)), "status reads {:?}", value(STATUS));
        ensure!(value(P) == Some(TagValue::Analog(0.0)), "P reads {:?}", value(P));
        ensure!(value(Q) == Some(TagValue::Analog(0.0)), "Q reads {:?}", value(Q));

        let first = binary_events(observer.request(OS, FunctionCode::Read, events_only()).await?, bi_index);
        ensure!(first == vec![false], "observer saw breaker events {first:?} on the first class poll");
        let second = binary_events(observer.request(OS, FunctionCode::Read, events_only()).await?, bi_index);
        ensure!(second.is_empty(), "confirmed event delivered again: {second:?}");
        s.poll(PollKind::Events).await.map_err(|e| e.to_string())?;
        let backlog = bench.server.event_backlog(OS).ok_or("outstation missing")?;
        ensure!(backlog[0] == 0, "class 1 still holds {} events after both readers confirmed", backlog[0]);

        let log = bench.server.command_log().entries();
        ensure!(log.len() == 1, "command log has {} entries", log.len());
        let e = &log[0];
        ensure!(
            e.source_address == MASTER_ADDRESS && e.tag == BREAKER && e.command == "LATCH_OFF" && e.status == "SUCCESS",
            "unexpected log entry {e:?}"
        );
        Ok(format!(
            "status {status}; BI false, P=Q=0.0 after 1 tick + 1 class poll; one event, drained after confirm; \
             log entry from source {}",
            e.source_address
        ))
    }
    .await;
    master.shutdown().await;
    bench.stop().await;
    verdict
}

/// Binary event values reported for `index` across the response fragments.
fn binary_events(frags: Vec<gridwire_core::proto::AppFragment>, index: u16) -> Vec<bool> {
    frags
        .iter()
        .flat_map(|f| &f.objects)
        .filter(|b| b.variation == Variation::BinaryEventTime)
        .flat_map(|b| b.values())
        .filter(|(i, _)| *i == index)
        .filter_map(|(_, v)| match v {
            PointValue::Binary { value, .. } => Some(value),
            _ => None,
        })
        .collect()
}
