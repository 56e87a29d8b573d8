use std::collections::BTreeSet;

use crate::grid::GridCase;

use super::{DeviceType, Field, MapError, OutstationDef, Point, PointMap, PointType};

/// Event class and deadband choices for generated maps.
#[derive(Debug, Clone, PartialEq)]
pub struct AutogenPolicy {
    pub binary_class: u8,
    pub analog_class: u8,
    /// Analog deadband as a fraction of the device's rating.
    pub deadband_fraction: f64,
    pub voltage_deadband: f64,
}

impl Default for AutogenPolicy {
    fn default() -> Self {
        Self {
            binary_class: 1,
            analog_class: 2,
            deadband_fraction: 0.02,
            voltage_deadband: 0.005,
        }
    }
}

struct Builder<'a> {
    policy: &'a AutogenPolicy,
    substation: u16,
    next: [u32; 5],
    points: Vec<Point>,
}

impl Builder<'_> {
    fn push(&mut self, point_type: PointType, device: DeviceType, key: &str, field: Field, deadband: f64) -> Result<(), MapError> {
        let slot = PointType::ALL.iter().position(|t| *t == point_type).unwrap();
        let index = u16::try_from(self.next[slot]).map_err(|_| MapError::Capacity {
            substation: self.substation,
            point_type,
        })?;
        self.next[slot] += 1;
        let (event_class, deadband) = match point_type {
            PointType::BinaryInput => (self.policy.binary_class, 0.0),
            PointType::AnalogInput => (self.policy.analog_class, deadband),
            _ => (0, 0.0),
        };
        self.points.push(Point {
            point_type,
            index,
            device,
            key: key.to_string(),
            field,
            event_class,
            deadband,
        });
        Ok(())
    }

    fn standard(&mut self, device: DeviceType, key: &str, rating: f64) -> Result<(), MapError> {
        let db = self.policy.deadband_fraction * rating;
        self.push(PointType::BinaryInput, device, key, Field::Status, 0.0)?;
        self.push(PointType::AnalogInput, device, key, Field::Mw, db)?;
        self.push(PointType::AnalogInput, device, key, Field::Mvar, db)
    }
}

/// One outstation per substation, numbered by substation id. Devices are taken
/// in case order: generators, branches touching the substation, loads, shunts,
/// then buses. Substations marked external are skipped.
pub fn autogen_map(case: &GridCase, policy: &AutogenPolicy) -> Result<PointMap, MapError> {
    let mut subs: BTreeSet<u16> = case.buses.iter().map(|b| b.substation).collect();
    subs.extend(case.substations.iter().map(|s| s.id));
    subs.retain(|&s| !case.is_external(s));
    let in_sub = |bus: u32, sub: u16| {
        case.bus_idx(bus)
            .is_some_and(|b| case.buses[b].substation == sub)
    };
    let mut outstations = Vec::new();
    for sub in subs {
        let mut b = Builder {
            policy,
            substation: sub,
            next: [0; 5],
            points: Vec::new(),
        };
        for g in case.generators.iter().filter(|g| in_sub(g.bus, sub)) {
            b.standard(DeviceType::Generator, &g.id, g.p_max.abs().max(1.0))?;
            b.push(PointType::AnalogOutput, DeviceType::Generator, &g.id, Field::MwSetpoint, 0.0)?;
            b.push(PointType::AnalogOutput, DeviceType::Generator, &g.id, Field::VpuSetpoint, 0.0)?;
            b.push(PointType::BinaryOutput, DeviceType::Generator, &g.id, Field::Status, 0.0)?;
        }
        for br in case.branches.iter().filter(|br| in_sub(br.from, sub) || in_sub(br.to, sub)) {
            b.standard(DeviceType::Branch, &br.id, br.rating_mva.max(1.0))?;
            b.push(PointType::BinaryOutput, DeviceType::Branch, &br.id, Field::Status, 0.0)?;
        }
        let buses: Vec<_> = case.buses.iter().filter(|bus| bus.substation == sub).collect();
        for bus in buses.iter().filter(|bus| bus.has_load()) {
            let key = bus.id.to_string();
            let rating = bus.load_mw.abs().max(bus.load_mvar.abs()).max(1.0);
            b.standard(DeviceType::Load, &key, rating)?;
            b.push(PointType::BinaryOutput, DeviceType::Load, &key, Field::Status, 0.0)?;
        }
        for bus in buses.iter().filter(|bus| bus.has_shunt()) {
            let key = bus.id.to_string();
            b.standard(DeviceType::Shunt, &key, bus.shunt_mvar.abs().max(1.0))?;
            b.push(PointType::BinaryOutput, DeviceType::Shunt, &key, Field::Status, 0.0)?;
        }
        for bus in &buses {
            let key = bus.id.to_string();
            b.push(PointType::BinaryInput, DeviceType::Bus, &key, Field::Status, 0.0)?;
            b.push(PointType::AnalogInput, DeviceType::Bus, &key, Field::Vpu, policy.voltage_deadband)?;
        }
        let name = case
            .substation_name(sub)
            .map(str::to_string)
            .unwrap_or_else(|| format!("SUB_{sub}"));
        outstations.push(OutstationDef {
            number: sub,
            name,
            points: b.points,
        });
    }
    PointMap::new(outstations)
}
