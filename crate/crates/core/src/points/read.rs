use crate::grid::{GridCase, GridState};

use super::{DeviceType, Field, PointType};

/// A device reference resolved to indices into a [`GridCase`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Target {
    Generator(usize),
    Branch(usize),
    Load(usize),
    Shunt(usize),
    Bus(usize),
}

impl Target {
    pub fn resolve(case: &GridCase, device: DeviceType, key: &str) -> Option<Target> {
        match device {
            DeviceType::Generator => case.gen_idx(key).map(Target::Generator),
            DeviceType::Branch => case.branch_idx(key).map(Target::Branch),
            DeviceType::Load => case
                .bus_idx_by_key(key)
                .filter(|&b| case.buses[b].has_load())
                .map(Target::Load),
            DeviceType::Shunt => case
                .bus_idx_by_key(key)
                .filter(|&b| case.buses[b].has_shunt())
                .map(Target::Shunt),
            DeviceType::Bus => case.bus_idx_by_key(key).map(Target::Bus),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reading {
    Binary(bool),
    Analog(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointReading {
    pub value: Reading,
    /// False when the device sits in a de-energized part of the network.
    pub online: bool,
}

/// Current value of one point field.
pub fn read_point(case: &GridCase, state: &GridState, target: Target, point_type: PointType, field: Field) -> PointReading {
    let bus_of = |id: u32| case.bus_idx(id).expect("validated case");
    let (online, status, analog) = match target {
        Target::Generator(g) => {
            let on = state.energized[bus_of(case.generators[g].bus)];
            let value = match field {
                Field::Mw => state.gen_p[g],
                Field::Mvar => state.gen_q[g],
                Field::MwSetpoint => state.gen_setpoint[g],
                Field::VpuSetpoint => state.gen_vset[g],
                _ => 0.0,
            };
            (on, state.statuses.gen_on[g], value)
        }
        Target::Branch(k) => {
            let br = &case.branches[k];
            let on = state.energized[bus_of(br.from)] || state.energized[bus_of(br.to)];
            let value = match field {
                Field::Mw => state.branch_p[k],
                Field::Mvar => state.branch_q[k],
                _ => 0.0,
            };
            (on, state.statuses.branch_closed[k], value)
        }
        Target::Load(b) => {
            let value = match field {
                Field::Mw => state.load_mw(case, b),
                Field::Mvar => state.load_mvar(case, b),
                _ => 0.0,
            };
            (state.energized[b], state.statuses.load_on[b], value)
        }
        Target::Shunt(b) => {
            let value = match field {
                Field::Mvar => state.shunt_mvar(case, b),
                _ => 0.0,
            };
            (state.energized[b], state.statuses.shunt_on[b], value)
        }
        Target::Bus(b) => {
            let value = match field {
                Field::Vpu => state.vm[b],
                _ => 0.0,
            };
            (state.energized[b], state.energized[b], value)
        }
    };
    let value = match point_type {
        PointType::BinaryInput | PointType::BinaryOutput => Reading::Binary(status),
        PointType::CounterInput => Reading::Analog(0.0),
        PointType::AnalogInput | PointType::AnalogOutput => Reading::Analog(analog),
    };
    PointReading { value, online }
}
