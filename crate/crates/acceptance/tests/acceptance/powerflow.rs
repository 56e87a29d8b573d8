//! Random connected networks: bus balance, flows against a dense reference
//! solve, and generation matching load through droop dispatch with limits.

use std::fmt::Write as _;
use std::sync::Arc;

use gridwire_acceptance::{ensure, Verdict};
use gridwire_core::grid::{dispatch_units, DroopUnit, GridCase, GridState, SetpointKind, Simulator};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::oracle::{dc_flows, Line};

const CASES: usize = 25;
const MAX_BUSES: usize = 50;
const COMMANDS_PER_CASE: usize = 20;
const DISPATCH_TRIALS: usize = 2000;

struct Network {
    case: Arc<GridCase>,
    lines: Vec<Line>,
}

fn random_network(rng: &mut StdRng) -> Result<Network, String> {
    let n = rng.gen_range(2..=MAX_BUSES);
    let mut toml = String::from("name = \"random\"\n");
    let loads: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..80.0)).collect();
    for (i, mw) in loads.iter().enumerate() {
        let mvar = rng.gen_range(-10.0..30.0);
        let _ = write!(toml, "[[bus]]\nid = {}\nsubstation = {}\nload_mw = {mw:?}\nload_mvar = {mvar:?}\n", i + 1, i + 1);
    }
    let mut lines = Vec::new();
    for child in 1..n {
        lines.push(Line {
            from: rng.gen_range(0..child),
            to: child,
            x: rng.gen_range(0.01..0.5),
        });
    }
    for _ in 0..rng.gen_range(0..n) {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a != b {
            lines.push(Line {
                from: a,
                to: b,
                x: rng.gen_range(0.01..0.5),
            });
        }
    }
    for (k, l) in lines.iter().enumerate() {
        let _ = write!(
            toml,
            "[[branch]]\nfrom = {}\nto = {}\ncircuit = \"{k}\"\nx = {:?}\n",
            l.from + 1,
            l.to + 1,
            l.x
        );
    }
    let load: f64 = loads.iter().sum::<f64>().max(1.0);
    let units = rng.gen_range(1..=4);
    let weights: Vec<f64> = (0..units).map(|_| rng.gen_range(0.2..1.0)).collect();
    let margin = rng.gen_range(1.1..2.0);
    let wsum: f64 = weights.iter().sum();
    for (k, w) in weights.iter().enumerate() {
        let p_max = load * margin * w / wsum;
        let p_min = p_max * rng.gen_range(0.0..0.3);
        let p_init = rng.gen_range(p_min..=p_max);
        let _ = write!(
            toml,
            "[[generator]]\nbus = {}\ncircuit = \"{k}\"\np_init = {p_init:?}\np_min = {p_min:?}\np_max = {p_max:?}\n\
             droop_gain = {:?}\nramp_tau = {:?}\nvset = {:?}\n",
            rng.gen_range(1..=n),
            rng.gen_range(10.0..2000.0),
            rng.gen_range(0.2..3.0),
            rng.gen_range(0.98..1.05)
        );
    }
    let case = GridCase::from_toml(&toml).map_err(|e| format!("generated case rejected: {e}"))?;
    Ok(Network {
        case: Arc::new(case),
        lines,
    })
}

/// Checks one solved state; returns the number of units sitting on a limit.
fn check_state(net: &Network, s: &GridState) -> Result<usize, String> {
    let case = &net.case;
    let n = case.buses.len();
    let base = case.base_mva();
    ensure!(s.energized.iter().all(|e| *e), "connected case has a de-energized bus");
    let mut injection = vec![0.0; n];
    for (b, bus) in case.buses.iter().enumerate() {
        injection[b] -= bus.load_mw;
    }
    for (g, u) in case.generators.iter().enumerate() {
        injection[case.bus_idx(u.bus).ok_or("generator bus")?] += s.gen_p[g];
    }
    let mut residual = injection.clone();
    for (k, l) in net.lines.iter().enumerate() {
        residual[l.from] -= s.branch_p[k];
        residual[l.to] += s.branch_p[k];
    }
    for (b, r) in residual.iter().enumerate() {
        ensure!((r / base).abs() <= 1e-9, "bus {} KCL residual {:e} pu", b + 1, r / base);
    }
    let reference = dc_flows(n, &net.lines, &injection, base);
    for (k, (got, want)) in s.branch_p.iter().zip(&reference).enumerate() {
        let scale = got.abs().max(want.abs()).max(1.0);
        ensure!((got - want).abs() <= 1e-9 * scale, "branch {k}: {got} MW vs reference {want} MW");
    }
    let gen: f64 = s.gen_p.iter().sum();
    let load: f64 = case.buses.iter().map(|b| b.load_mw).sum();
    ensure!((gen - load).abs() <= 1e-6 * base, "generation {gen} MW vs load {load} MW");
    let mut pinned = 0;
    for (g, u) in case.generators.iter().enumerate() {
        let p = s.gen_p[g];
        ensure!(p >= u.p_min - 1e-9 && p <= u.p_max + 1e-9, "unit {} at {p} outside [{}, {}]", u.id, u.p_min, u.p_max);
        if (p - u.p_min).abs() <= 1e-9 || (p - u.p_max).abs() <= 1e-9 {
            pinned += 1;
        }
    }
    Ok(pinned)
}

pub fn run() -> Verdict {
    let mut rng = StdRng::seed_from_u64(0x5EED_F10E);
    let mut states = 0usize;
    let mut saturated = 0usize;
    let mut largest = 0usize;
    for c in 0..CASES {
        let net = random_network(&mut rng)?;
        largest = largest.max(net.case.buses.len());
        let mut sim = Simulator::new(net.case.clone());
        let ctx = |e: String| format!("case {c} ({} buses): {e}", net.case.buses.len());
        let s = sim.step(0.1).map_err(|e| ctx(e.to_string()))?.clone();
        saturated += check_state(&net, &s).map_err(ctx)?;
        states += 1;
        for _ in 0..COMMANDS_PER_CASE {
            let g = rng.gen_range(0..net.case.generators.len());
            let u = &net.case.generators[g];
            let target = rng.gen_range(-0.2 * u.p_max..1.5 * u.p_max);
            sim.apply_setpoint(&u.id, SetpointKind::MwSetpoint, target)
                .map_err(|e| ctx(e.to_string()))?;
            for _ in 0..rng.gen_range(1..=5) {
                let s = sim.step(0.5).map_err(|e| ctx(e.to_string()))?.clone();
                saturated += check_state(&net, &s).map_err(ctx)?;
                states += 1;
            }
        }
    }
    ensure!(saturated > 0, "no solved state put a unit on a limit");

    let mut pinned_trials = 0;
    for t in 0..DISPATCH_TRIALS {
        let units: Vec<DroopUnit> = (0..rng.gen_range(1..8))
            .map(|_| {
                let p_min = rng.gen_range(0.0..500.0);
                let p_max = p_min + rng.gen_range(0.0..200.0);
                DroopUnit {
                    setpoint: rng.gen_range(p_min - 50.0..=p_max + 50.0),
                    gain: rng.gen_range(1.0..100.0),
                    p_min,
                    p_max,
                }
            })
            .collect();
        let lo: f64 = units.iter().map(|u| u.p_min).sum();
        let hi: f64 = units.iter().map(|u| u.p_max).sum();
        let load = rng.gen_range(lo..=hi);
        let sol = dispatch_units(&units, load).map_err(|e| format!("dispatch trial {t}: {e}"))?;
        let total: f64 = sol.gen_p.iter().sum();
        ensure!((total - load).abs() <= 1e-6 * 100.0, "dispatch trial {t}: {total} MW for {load} MW");
        let mut pinned = false;
        for (p, u) in sol.gen_p.iter().zip(&units) {
            ensure!(*p >= u.p_min - 1e-9 && *p <= u.p_max + 1e-9, "dispatch trial {t}: {p} outside limits");
            pinned |= *p == u.p_min || *p == u.p_max;
        }
        pinned_trials += pinned as usize;
    }
    ensure!(pinned_trials > 0, "no dispatch trial saturated");
    Ok(format!(
        "{CASES} networks up to {largest} buses, {states} solved states, {saturated} unit-on-limit observations; \
         {DISPATCH_TRIALS} direct dispatches ({pinned_trials} saturated) balanced"
    ))
}
