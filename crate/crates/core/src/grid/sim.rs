//! The stepping simulator: droop dispatch, first-order setpoint ramping and
//! the network solves, plus device commands.

use std::sync::Arc;

use thiserror::Error;
use tracing::{info, warn};

use super::case::GridCase;
use super::dispatch::{dispatch_units, DispatchError, DroopUnit};
use super::network::{IslandIssue, Statuses, Topology};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("unknown branch {0}")]
    UnknownBranch(String),
    #[error("unknown generator {0}")]
    UnknownGenerator(String),
    #[error("unknown bus {0}")]
    UnknownBus(String),
    #[error("bus {0} has no load")]
    NoLoad(String),
    #[error("bus {0} has no shunt")]
    NoShunt(String),
    #[error("generator {0} is offline")]
    GeneratorOffline(String),
    #[error("setpoint {value} out of range for {gen}")]
    SetpointRange { gen: String, value: f64 },
    #[error("time step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("simulator stopped")]
    Stopped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum SetpointKind {
    MwSetpoint,
    VpuSetpoint,
}

/// A mutation applied between solves.
#[derive(Debug, Clone, PartialEq)]
pub enum SimCommand {
    Breaker { branch: String, closed: bool },
    GenStatus { gen: String, on: bool },
    /// Load keyed by its bus id.
    LoadStatus { bus: String, on: bool },
    /// Shunt keyed by its bus id.
    ShuntStatus { bus: String, on: bool },
    Setpoint { gen: String, kind: SetpointKind, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CommandEffect {
    Applied,
    Clamped { requested: f64, applied: f64 },
}

/// Live electrical state after a solve.
#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    pub tick: u64,
    /// Simulated seconds since start.
    pub time: f64,
    /// Wall-clock epoch (ms) that simulated time zero maps to.
    pub epoch_ms: u64,
    pub statuses: Statuses,
    pub energized: Vec<bool>,
    pub island_of_bus: Vec<usize>,
    pub island_issues: Vec<Option<IslandIssue>>,
    pub island_freq_dev: Vec<f64>,
    /// Frequency deviation (pu) of the island carrying the most load.
    pub freq_dev: f64,
    pub theta: Vec<f64>,
    pub vm: Vec<f64>,
    pub gen_p: Vec<f64>,
    pub gen_q: Vec<f64>,
    /// Commanded MW setpoints.
    pub gen_setpoint: Vec<f64>,
    /// Governor reference chasing the setpoint with the unit's time constant.
    pub gen_reference: Vec<f64>,
    pub gen_vset: Vec<f64>,
    pub branch_p: Vec<f64>,
    pub branch_q: Vec<f64>,
}

impl GridState {
    /// Timestamp of this state in ms since the Unix epoch.
    pub fn time_ms(&self) -> u64 {
        self.epoch_ms + (self.time * 1000.0).round() as u64
    }

    pub fn load_mw(&self, case: &GridCase, bus: usize) -> f64 {
        if self.energized[bus] && self.statuses.load_on[bus] {
            case.buses[bus].load_mw
        } else {
            0.0
        }
    }

    pub fn load_mvar(&self, case: &GridCase, bus: usize) -> f64 {
        if self.energized[bus] && self.statuses.load_on[bus] {
            case.buses[bus].load_mvar
        } else {
            0.0
        }
    }

    pub fn shunt_mvar(&self, case: &GridCase, bus: usize) -> f64 {
        if self.energized[bus] && self.statuses.shunt_on[bus] {
            case.buses[bus].shunt_mvar
        } else {
            0.0
        }
    }

    /// Total energized load, MW.
    pub fn total_load(&self, case: &GridCase) -> f64 {
        (0..case.buses.len()).map(|b| self.load_mw(case, b)).sum()
    }

    pub fn total_generation(&self) -> f64 {
        self.gen_p.iter().sum()
    }
}

pub struct Simulator {
    case: Arc<GridCase>,
    state: GridState,
    topo: Topology,
    topo_dirty: bool,
}

impl Simulator {
    pub fn new(case: Arc<GridCase>) -> Self {
        Self::with_epoch(case, 0)
    }

    pub fn with_epoch(case: Arc<GridCase>, epoch_ms: u64) -> Self {
        let statuses = Statuses::from_case(&case);
        let n = case.buses.len();
        let p_init: Vec<f64> = case.generators.iter().map(|g| g.p_init).collect();
        let state = GridState {
            tick: 0,
            time: 0.0,
            epoch_ms,
            energized: vec![false; n],
            island_of_bus: vec![0; n],
            island_issues: Vec::new(),
            island_freq_dev: Vec::new(),
            freq_dev: 0.0,
            theta: vec![0.0; n],
            vm: vec![0.0; n],
            gen_p: p_init.clone(),
            gen_q: vec![0.0; case.generators.len()],
            gen_setpoint: p_init.clone(),
            gen_reference: p_init,
            gen_vset: case.generators.iter().map(|g| g.vset).collect(),
            branch_p: vec![0.0; case.branches.len()],
            branch_q: vec![0.0; case.branches.len()],
            statuses,
        };
        let topo = Topology::build(&case, &state.statuses);
        let mut sim = Self {
            case,
            state,
            topo,
            topo_dirty: false,
        };
        sim.solve();
        sim
    }

    pub fn case(&self) -> &Arc<GridCase> {
        &self.case
    }

    pub fn state(&self) -> &GridState {
        &self.state
    }

    /// Advances simulated time by `dt` seconds and re-solves.
    pub fn step(&mut self, dt: f64) -> Result<&GridState, SimError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SimError::InvalidStep(dt));
        }
        for (g, gen) in self.case.generators.iter().enumerate() {
            if !self.state.statuses.gen_on[g] {
                continue;
            }
            let alpha = 1.0 - (-dt / gen.ramp_tau).exp();
            let r = &mut self.state.gen_reference[g];
            *r += (self.state.gen_setpoint[g] - *r) * alpha;
        }
        self.state.tick += 1;
        self.state.time += dt;
        self.solve();
        Ok(&self.state)
    }

    fn solve(&mut self) {
        let case = Arc::clone(&self.case);
        if self.topo_dirty {
            self.topo = Topology::build(&case, &self.state.statuses);
            self.topo_dirty = false;
        }
        let st = &mut self.state;
        let islands = &self.topo.islands;
        let mut live = vec![false; islands.len()];
        let mut issues = vec![None; islands.len()];
        let mut freqs = vec![0.0; islands.len()];
        let mut gen_p = vec![0.0; case.generators.len()];
        let mut heaviest: Option<(f64, usize)> = None;
        for (i, island) in islands.iter().enumerate() {
            if let Some(issue) = self.topo.issue(i) {
                issues[i] = Some(issue);
                continue;
            }
            let units: Vec<DroopUnit> = island
                .gens
                .iter()
                .map(|&g| {
                    let gen = &case.generators[g];
                    DroopUnit {
                        setpoint: st.gen_reference[g],
                        gain: gen.droop_gain,
                        p_min: gen.p_min,
                        p_max: gen.p_max,
                    }
                })
                .collect();
            let load: f64 = island
                .buses
                .iter()
                .filter(|&&b| st.statuses.load_on[b])
                .map(|&b| case.buses[b].load_mw)
                .sum();
            match dispatch_units(&units, load) {
                Ok(sol) => {
                    for (k, &g) in island.gens.iter().enumerate() {
                        gen_p[g] = sol.gen_p[k];
                    }
                    freqs[i] = sol.freq_dev;
                    live[i] = true;
                    if heaviest.is_none_or(|(l, _)| load > l) {
                        heaviest = Some((load, i));
                    }
                }
                Err(e) => {
                    issues[i] = Some(match e {
                        DispatchError::ExcessMinimum { .. } => IslandIssue::ExcessMinimum,
                        DispatchError::InsufficientCapacity { .. } => IslandIssue::InsufficientCapacity,
                        DispatchError::NoGeneration => IslandIssue::NoGeneration,
                    });
                }
            }
        }
        let dc = self.topo.solve_dc(&case, &st.statuses, &gen_p, &live);
        let qv = self.topo.solve_qv(&case, &st.statuses, &st.gen_vset, &live);

        let energized: Vec<bool> = self.topo.island_of_bus.iter().map(|&i| live[i]).collect();
        if energized != st.energized && st.tick > 0 {
            let dark = energized.iter().filter(|e| !**e).count();
            info!(tick = st.tick, dark_buses = dark, "energization changed");
        }
        for (i, issue) in issues.iter().enumerate() {
            if let Some(issue) = issue {
                if st.island_issues.get(i) != Some(&Some(*issue)) {
                    warn!(island = i, ?issue, buses = islands[i].buses.len(), "island de-energized");
                }
            }
        }
        st.energized = energized;
        st.island_of_bus = self.topo.island_of_bus.clone();
        st.island_issues = issues;
        st.freq_dev = heaviest.map(|(_, i)| freqs[i]).unwrap_or(0.0);
        st.island_freq_dev = freqs;
        st.theta = dc.theta;
        st.branch_p = dc.branch_p;
        st.vm = qv.vm;
        st.branch_q = qv.branch_q;
        st.gen_q = qv.gen_q;
        st.gen_p = gen_p;
    }

    pub fn apply(&mut self, cmd: &SimCommand) -> Result<CommandEffect, SimError> {
        match cmd {
            SimCommand::Breaker { branch, closed } => self.apply_breaker(branch, *closed),
            SimCommand::GenStatus { gen, on } => self.apply_gen_status(gen, *on),
            SimCommand::LoadStatus { bus, on } => self.apply_load_status(bus, *on),
            SimCommand::ShuntStatus { bus, on } => self.apply_shunt_status(bus, *on),
            SimCommand::Setpoint { gen, kind, value } => self.apply_setpoint(gen, *kind, *value),
        }
    }

    pub fn apply_breaker(&mut self, branch: &str, closed: bool) -> Result<CommandEffect, SimError> {
        let k = self
            .case
            .branch_idx(branch)
            .ok_or_else(|| SimError::UnknownBranch(branch.into()))?;
        if self.state.statuses.branch_closed[k] != closed {
            self.state.statuses.branch_closed[k] = closed;
            self.topo_dirty = true;
            info!(branch, closed, "breaker operated");
        }
        Ok(CommandEffect::Applied)
    }

    pub fn apply_gen_status(&mut self, gen: &str, on: bool) -> Result<CommandEffect, SimError> {
        let g = self
            .case
            .gen_idx(gen)
            .ok_or_else(|| SimError::UnknownGenerator(gen.into()))?;
        if self.state.statuses.gen_on[g] != on {
            self.state.statuses.gen_on[g] = on;
            if on {
                // restart from minimum output and ramp toward the setpoint
                self.state.gen_reference[g] = self.case.generators[g].p_min;
            }
            self.topo_dirty = true;
            info!(gen, on, "generator status changed");
        }
        Ok(CommandEffect::Applied)
    }

    fn bus_with(&self, bus: &str) -> Result<usize, SimError> {
        self.case
            .bus_idx_by_key(bus)
            .ok_or_else(|| SimError::UnknownBus(bus.into()))
    }

    pub fn apply_load_status(&mut self, bus: &str, on: bool) -> Result<CommandEffect, SimError> {
        let b = self.bus_with(bus)?;
        if !self.case.buses[b].has_load() {
            return Err(SimError::NoLoad(bus.into()));
        }
        self.state.statuses.load_on[b] = on;
        Ok(CommandEffect::Applied)
    }

    pub fn apply_shunt_status(&mut self, bus: &str, on: bool) -> Result<CommandEffect, SimError> {
        let b = self.bus_with(bus)?;
        if !self.case.buses[b].has_shunt() {
            return Err(SimError::NoShunt(bus.into()));
        }
        self.state.statuses.shunt_on[b] = on;
        Ok(CommandEffect::Applied)
    }

    /// MW setpoints are clamped into the unit's limits; voltage setpoints must
    /// lie in 0.5..=1.5 pu.
    pub fn apply_setpoint(&mut self, gen: &str, kind: SetpointKind, value: f64) -> Result<CommandEffect, SimError> {
        let g = self
            .case
            .gen_idx(gen)
            .ok_or_else(|| SimError::UnknownGenerator(gen.into()))?;
        if !self.state.statuses.gen_on[g] {
            return Err(SimError::GeneratorOffline(gen.into()));
        }
        if !value.is_finite() {
            return Err(SimError::SetpointRange { gen: gen.into(), value });
        }
        match kind {
            SetpointKind::MwSetpoint => {
                let unit = &self.case.generators[g];
                let applied = value.clamp(unit.p_min, unit.p_max);
                self.state.gen_setpoint[g] = applied;
                if applied != value {
                    warn!(gen, requested = value, applied, "MW setpoint clamped to unit limits");
                    Ok(CommandEffect::Clamped { requested: value, applied })
                } else {
                    info!(gen, value, "MW setpoint changed");
                    Ok(CommandEffect::Applied)
                }
            }
            SetpointKind::VpuSetpoint => {
                if !(0.5..=1.5).contains(&value) {
                    return Err(SimError::SetpointRange { gen: gen.into(), value });
                }
                self.state.gen_vset[g] = value;
                info!(gen, value, "voltage setpoint changed");
                Ok(CommandEffect::Applied)
            }
        }
    }
}
