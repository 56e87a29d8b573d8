//! The outstation goes silent mid-poll, is then killed and restarted on the
//! same port; the session must go offline after exactly `max_retries`
//! timeouts and come back good on its first integrity poll.

use std::time::Duration;

use gridwire_acceptance::{ensure, Verdict};
use gridwire_core::proto::ControlCode;
use gridwire_master::{Master, OperateError, OperateMode, SessionHealth, Validity};
use tokio::time::timeout;

use crate::bench::{load_case, load_map, session, wait_for, wait_online, Bench, Proxy};

const OS: u16 = 560;
const MAX_RETRIES: u32 = 3;

fn counters(h: &SessionHealth) -> Result<(), String> {
    ensure!(h.success + h.failure <= h.sent, "success {} + failure {} > sent {}", h.success, h.failure, h.sent);
    Ok(())
}

pub async fn run() -> Verdict {
    let case = load_case("cases/glenrose.toml")?;
    let map = load_map("maps/glenrose_560.toml")?;
    let bench = Bench::start(case.clone(), &map).await?;
    let addr = bench.addr();
    let proxy = Proxy::start(addr).await?;
    let mut cfg = session("PowerWorld_RTAC_560", proxy.addr, OS);
    cfg.class123_poll_period = 0.02;
    cfg.poll_timeout = 0.2;
    cfg.max_retries = MAX_RETRIES;
    let master = Master::start(vec![cfg], &map).map_err(|e| e.to_string())?;
    let s = master.sessions()[0].clone();
    let mut bench = Some(bench);
    let verdict = async {
        wait_online(&s).await?;
        let start = s.health();
        wait_for("steady polling", Duration::from_secs(5), || s.health().success >= start.success + 5).await?;
        ensure!(
            s.tags().iter().all(|t| t.validity == Validity::Good),
            "tags not good while polling"
        );
        counters(&s.health())?;

        let mut deltas = master.subscribe();
        let before = s.health();
        proxy.freeze(true);
        loop {
            let d = timeout(Duration::from_secs(5), deltas.recv())
                .await
                .map_err(|_| "no invalidation within 5 s".to_string())?
                .map_err(|e| e.to_string())?;
            if d.tags.iter().any(|t| t.validity == Validity::Invalid) {
                break;
            }
        }
        let down = s.health();
        ensure!(down.offline, "invalidated but not offline");
        ensure!(
            down.consecutive_failures == MAX_RETRIES,
            "offline after {} consecutive failures",
            down.consecutive_failures
        );
        ensure!(
            down.failure - before.failure == MAX_RETRIES as u64,
            "{} failures counted while silent",
            down.failure - before.failure
        );
        ensure!(down.success == before.success, "a poll succeeded while the link was silent");
        counters(&down)?;
        let invalid = s.tags().iter().filter(|t| t.validity == Validity::Invalid).count();
        ensure!(invalid == s.tags().len(), "{invalid} of {} tags invalid", s.tags().len());
        ensure!(
            matches!(
                s.operate_binary("BO_560_Branch_5047_5260_1_STATUS", ControlCode::LATCH_OFF, OperateMode::Direct)
                    .await,
                Err(OperateError::Offline)
            ),
            "control accepted while offline"
        );

        // kill the outstation, then bring a fresh one up on the same port
        bench.take().expect("bench running").stop().await;
        proxy.freeze(false);
        tokio::time::sleep(Duration::from_millis(300)).await;
        ensure!(s.health().offline, "online with the outstation down");
        counters(&s.health())?;
        let dead = s.health();
        bench = Some(Bench::start_on(case.clone(), &map, addr).await?);
        let recovered = loop {
            let d = timeout(Duration::from_secs(5), deltas.recv())
                .await
                .map_err(|_| "no recovery within 5 s".to_string())?
                .map_err(|e| e.to_string())?;
            if d.tags.iter().any(|t| t.validity == Validity::Good) {
                break d;
            }
        };
        ensure!(
            recovered.tags.len() == s.tags().len() && recovered.tags.iter().all(|t| t.validity == Validity::Good),
            "first good update refreshed {} of {} tags",
            recovered.tags.iter().filter(|t| t.validity == Validity::Good).count(),
            s.tags().len()
        );
        let up = s.health();
        ensure!(!up.offline && up.consecutive_failures == 0, "still degraded after recovery: {up:?}");
        ensure!(up.success > dead.success, "no success counted on recovery");
        counters(&up)?;
        Ok(format!(
            "offline after exactly {MAX_RETRIES} timeouts, {invalid} tags invalid, control refused; \
             restart recovered all tags in one integrity poll; sent {} >= success {} + failure {}",
            up.sent, up.success, up.failure
        ))
    }
    .await;
    master.shutdown().await;
    if let Some(b) = bench {
        b.stop().await;
    }
    verdict
}
