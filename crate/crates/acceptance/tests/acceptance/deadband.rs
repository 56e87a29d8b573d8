//! Analog reporting: an event fires iff the live value has moved more than the
//! deadband from the last reported value, which then becomes `mag`.

use std::cell::Cell;

use gridwire_acceptance::{ensure, Verdict};
use gridwire_core::grid::{SetpointKind, Simulator};
use gridwire_core::points::{PointMap, PointType};
use gridwire_outstation::{AnalogReportState, EventStore, EventValue, OutstationDb, Scanner};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::bench::load_case;

const WALKS: u32 = 2000;
const SCANS: usize = 400;

pub fn run() -> Verdict {
    let pair = reported_pair()?;
    let walks = random_walks()?;
    let scans = scanner_walks()?;
    Ok(format!("{pair}; {walks} random walks; {scans}"))
}

/// A plant reading 1004 MW against a reported 1015 MW.
fn reported_pair() -> Result<String, String> {
    for db in [11.0, 11.000001, 15.0, 40.0] {
        let mut st = AnalogReportState::new(1015.0, db);
        ensure!(st.update(1004.0).is_none(), "deadband {db}: 1004 vs 1015 raised an event");
        ensure!(st.mag == 1015.0 && st.inst_mag == 1004.0, "deadband {db}: pair became {st:?}");
    }
    for db in [10.999999, 10.0, 5.0, 0.0] {
        let mut st = AnalogReportState::new(1015.0, db);
        ensure!(st.update(1004.0) == Some(1004.0), "deadband {db}: 1004 vs 1015 raised no event");
        ensure!(st.mag == 1004.0, "deadband {db}: mag {} after the event", st.mag);
    }
    Ok("1004/1015 held for deadband >= 11, reported below 11".into())
}

fn random_walks() -> Result<u32, String> {
    let config = Config {
        cases: WALKS,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    let events = Cell::new(0u64);
    let walk = (
        -5000.0f64..5000.0,
        prop_oneof![Just(0.0), 0.0f64..60.0],
        prop::collection::vec(prop_oneof![-30.0f64..30.0, Just(0.0)], 1..300),
    );
    runner
        .run(&walk, |(start, deadband, steps)| {
            let mut st = AnalogReportState::new(start, deadband);
            let mut reported = start;
            let mut x = start;
            for step in steps {
                x += step;
                let fire = (x - reported).abs() > deadband;
                let got = st.update(x);
                prop_assert_eq!(got.is_some(), fire, "x {} reported {} deadband {}", x, reported, deadband);
                if fire {
                    prop_assert_eq!(got, Some(x));
                    reported = x;
                    events.set(events.get() + 1);
                }
                prop_assert_eq!(st.mag, reported);
                prop_assert_eq!(st.inst_mag, x);
            }
            Ok::<(), TestCaseError>(())
        })
        .map_err(|e| format!("random walk: {e}"))?;
    ensure!(events.get() > 0, "no walk produced an event");
    Ok(WALKS)
}

/// The outstation's scanner over a simulated trajectory of a generator's
/// output, compared against the live value taken straight from the state.
fn scanner_walks() -> Result<String, String> {
    let case = load_case("cases/droop2.toml")?;
    let g = case.gen_idx("1_1").ok_or("unit missing")?;
    let mut rng = StdRng::seed_from_u64(1015);
    let mut fired = 0;
    let mut held = 0;
    for deadband in [0.0, 0.5, 3.0, 11.0, 26.0] {
        let map = PointMap::from_toml(&format!(
            "[[outstation]]\nnumber = 560\nname = \"PLANT\"\n[[outstation.point]]\ntype = \"AnalogInput\"\nindex = 0\n\
             device = \"Generator\"\nkey = \"1_1\"\nfield = \"MW\"\nclass = 2\ndeadband = {deadband:?}\n"
        ))
        .map_err(|e| e.to_string())?;
        let def = map.outstation(560).ok_or("outstation missing")?;
        let db = OutstationDb::build(def, &case).map_err(|e| e.to_string())?;
        let mut sim = Simulator::new(case.clone());
        let first = sim.step(0.1).map_err(|e| e.to_string())?.clone();
        let mut scanner = Scanner::new(&db, &case, &first);
        let mut store = EventStore::new(4096);
        store.attach(0);
        let mut reported = first.gen_p[g];
        for n in 0..SCANS {
            if n % 25 == 0 {
                let sp = rng.gen_range(400.0..1300.0);
                sim.apply_setpoint("1_1", SetpointKind::MwSetpoint, sp).map_err(|e| e.to_string())?;
            }
            let s = sim.step(0.1).map_err(|e| e.to_string())?.clone();
            scanner.scan(&db, &case, &s, &mut store);
            let x = s.gen_p[g];
            let events = store.pending(0, [true; 3]);
            store.confirm(0, &events);
            let got: Vec<f64> = events
                .iter()
                .filter(|e| e.record.point_type == PointType::AnalogInput && e.record.index == 0)
                .filter_map(|e| match e.record.value {
                    EventValue::Analog(v) => Some(v),
                    EventValue::Binary(_) => None,
                })
                .collect();
            if (x - reported).abs() > deadband {
                ensure!(got == vec![x], "deadband {deadband}, scan {n}: live {x}, reported {reported}, events {got:?}");
                reported = x;
                fired += 1;
            } else {
                ensure!(got.is_empty(), "deadband {deadband}, scan {n}: live {x} within band of {reported}, events {got:?}");
                held += 1;
            }
            let st = scanner.analog_state(0).ok_or("no analog state")?;
            ensure!(st.mag == reported && st.inst_mag == x, "deadband {deadband}, scan {n}: state {st:?}");
        }
    }
    ensure!(fired > 0 && held > 0, "scanner walks fired {fired}, held {held}");
    Ok(format!("{fired} scanner events and {held} suppressed scans matched live values"))
}
