//! DNP3 point maps: outstations as containers of points bound to grid device
//! fields, with validation, canonical tag names and a TOML file format.

mod autogen;
mod read;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::GridCase;

pub use autogen::{autogen_map, AutogenPolicy};
pub use read::{read_point, PointReading, Reading, Target};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PointType {
    BinaryInput,
    AnalogInput,
    CounterInput,
    BinaryOutput,
    AnalogOutput,
}

impl PointType {
    pub const ALL: [PointType; 5] = [
        PointType::BinaryInput,
        PointType::AnalogInput,
        PointType::CounterInput,
        PointType::BinaryOutput,
        PointType::AnalogOutput,
    ];

    pub fn abbrev(self) -> &'static str {
        match self {
            PointType::BinaryInput => "BI",
            PointType::AnalogInput => "AI",
            PointType::CounterInput => "CI",
            PointType::BinaryOutput => "BO",
            PointType::AnalogOutput => "AO",
        }
    }

    pub fn from_abbrev(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.abbrev() == s)
    }

    pub fn is_input(self) -> bool {
        matches!(self, PointType::BinaryInput | PointType::AnalogInput | PointType::CounterInput)
    }

    pub fn is_binary(self) -> bool {
        matches!(self, PointType::BinaryInput | PointType::BinaryOutput)
    }
}

impl fmt::Display for PointType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.abbrev())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DeviceType {
    Generator,
    Branch,
    Load,
    Shunt,
    Bus,
}

impl DeviceType {
    pub fn name(self) -> &'static str {
        match self {
            DeviceType::Generator => "Generator",
            DeviceType::Branch => "Branch",
            DeviceType::Load => "Load",
            DeviceType::Shunt => "Shunt",
            DeviceType::Bus => "Bus",
        }
    }
}

impl fmt::Display for DeviceType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Field {
    Status,
    Mw,
    Mvar,
    Vpu,
    MwSetpoint,
    VpuSetpoint,
}

impl Field {
    pub fn name(self) -> &'static str {
        match self {
            Field::Status => "STATUS",
            Field::Mw => "MW",
            Field::Mvar => "MVAR",
            Field::Vpu => "VPU",
            Field::MwSetpoint => "MWSETPOINT",
            Field::VpuSetpoint => "VPUSETPOINT",
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Whether `field` may be bound to a point of `point_type` on a `device`.
pub fn is_legal(point_type: PointType, device: DeviceType, field: Field) -> bool {
    use DeviceType::*;
    match (point_type, field) {
        (PointType::BinaryInput, Field::Status) => true,
        (PointType::AnalogInput, Field::Mw | Field::Mvar) => device != Bus,
        (PointType::AnalogInput, Field::Vpu) => device == Bus,
        (PointType::CounterInput, Field::Mw | Field::Mvar) => device != Bus,
        (PointType::BinaryOutput, Field::Status) => device != Bus,
        (PointType::AnalogOutput, Field::MwSetpoint | Field::VpuSetpoint) => device == Generator,
        _ => false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Point {
    #[serde(rename = "type")]
    pub point_type: PointType,
    pub index: u16,
    pub device: DeviceType,
    /// Device key: generator or branch id, or the bus id for loads, shunts and buses.
    pub key: String,
    pub field: Field,
    #[serde(default, rename = "class")]
    pub event_class: u8,
    #[serde(default)]
    pub deadband: f64,
}

impl Point {
    pub fn tag_name(&self, outstation: u16) -> String {
        tag_name(self, outstation)
    }
}

/// `{AI|AO|BI|BO|CI}_{outstation}_{DeviceType}_{key}_{FIELD}`
pub fn tag_name(point: &Point, outstation: u16) -> String {
    format!(
        "{}_{}_{}_{}_{}",
        point.point_type.abbrev(),
        outstation,
        point.device.name(),
        point.key,
        point.field.name()
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutstationDef {
    pub number: u16,
    pub name: String,
    #[serde(default, rename = "point")]
    pub points: Vec<Point>,
}

impl OutstationDef {
    pub fn points_of(&self, point_type: PointType) -> impl Iterator<Item = &Point> {
        self.points.iter().filter(move |p| p.point_type == point_type)
    }

    /// Points of one type ordered by index.
    pub fn sorted_points(&self, point_type: PointType) -> Vec<&Point> {
        let mut v: Vec<&Point> = self.points_of(point_type).collect();
        v.sort_by_key(|p| p.index);
        v
    }

    pub fn point(&self, point_type: PointType, index: u16) -> Option<&Point> {
        self.points
            .iter()
            .find(|p| p.point_type == point_type && p.index == index)
    }

    pub fn count(&self, point_type: PointType) -> usize {
        self.points_of(point_type).count()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapError {
    #[error("map document does not parse: {0}")]
    Parse(String),
    #[error("outstation number {0} used more than once")]
    DuplicateOutstation(u16),
    #[error("outstation {outstation}: {point_type} index {index} used more than once")]
    DuplicateIndex { outstation: u16, point_type: PointType, index: u16 },
    #[error("outstation {outstation}: {point_type} indices are not contiguous from 0 (missing {missing})")]
    IndexGap { outstation: u16, point_type: PointType, missing: u16 },
    #[error("{tag}: {field} is not valid for a {point_type} on a {device}")]
    Illegal { tag: String, point_type: PointType, device: DeviceType, field: Field },
    #[error("{tag}: event class {class} out of range 0..=3")]
    BadClass { tag: String, class: u8 },
    #[error("{tag}: output and counter points cannot carry an event class")]
    ClassNotAllowed { tag: String },
    #[error("{tag}: deadband must be a finite value >= 0")]
    BadDeadband { tag: String },
    #[error("{tag}: only analog inputs take a deadband")]
    DeadbandNotAllowed { tag: String },
    #[error("{tag}: tag name collides with another point")]
    DuplicateTag { tag: String },
    #[error("{tag}: unknown {device} {key}")]
    UnknownDevice { tag: String, device: DeviceType, key: String },
    #[error("substation {substation} needs more than 65535 {point_type} points")]
    Capacity { substation: u16, point_type: PointType },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapDoc {
    #[serde(default, rename = "outstation")]
    outstations: Vec<OutstationDef>,
}

/// Validated set of outstations with a tag lookup index.
#[derive(Debug, Clone)]
pub struct PointMap {
    outstations: Vec<OutstationDef>,
    by_tag: HashMap<String, (usize, usize)>,
}

impl PartialEq for PointMap {
    fn eq(&self, other: &Self) -> bool {
        self.outstations == other.outstations
    }
}

impl PointMap {
    /// Builds a map after checking structural invariants (no case lookup).
    pub fn new(outstations: Vec<OutstationDef>) -> Result<Self, MapError> {
        let mut numbers = HashSet::new();
        let mut by_tag = HashMap::new();
        for (oi, os) in outstations.iter().enumerate() {
            if !numbers.insert(os.number) {
                return Err(MapError::DuplicateOutstation(os.number));
            }
            let mut indices: BTreeMap<PointType, Vec<u16>> = BTreeMap::new();
            for (pi, p) in os.points.iter().enumerate() {
                let tag = tag_name(p, os.number);
                check_point(p, &tag)?;
                if by_tag.insert(tag.clone(), (oi, pi)).is_some() {
                    return Err(MapError::DuplicateTag { tag });
                }
                indices.entry(p.point_type).or_default().push(p.index);
            }
            for (point_type, mut idx) in indices {
                idx.sort_unstable();
                for (expect, &got) in idx.iter().enumerate() {
                    if expect > 0 && got == idx[expect - 1] {
                        return Err(MapError::DuplicateIndex {
                            outstation: os.number,
                            point_type,
                            index: got,
                        });
                    }
                    if got as usize != expect {
                        return Err(MapError::IndexGap {
                            outstation: os.number,
                            point_type,
                            missing: expect as u16,
                        });
                    }
                }
            }
        }
        Ok(Self { outstations, by_tag })
    }

    pub fn from_toml(text: &str) -> Result<Self, MapError> {
        let doc: MapDoc = toml::from_str(text).map_err(|e| MapError::Parse(e.to_string()))?;
        Self::new(doc.outstations)
    }

    pub fn to_toml(&self) -> String {
        let doc = MapDoc {
            outstations: self.outstations.clone(),
        };
        toml::to_string(&doc).expect("point map serializes")
    }

    /// Checks every device reference against `case`.
    pub fn validate_against(&self, case: &GridCase) -> Result<(), MapError> {
        for os in &self.outstations {
            for p in &os.points {
                if Target::resolve(case, p.device, &p.key).is_none() {
                    return Err(MapError::UnknownDevice {
                        tag: tag_name(p, os.number),
                        device: p.device,
                        key: p.key.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn outstations(&self) -> &[OutstationDef] {
        &self.outstations
    }

    pub fn outstation(&self, number: u16) -> Option<&OutstationDef> {
        self.outstations.iter().find(|o| o.number == number)
    }

    /// Inverse of [`tag_name`].
    pub fn resolve(&self, tag: &str) -> Option<(&OutstationDef, &Point)> {
        let &(oi, pi) = self.by_tag.get(tag)?;
        let os = &self.outstations[oi];
        Some((os, &os.points[pi]))
    }

    pub fn tags(&self) -> impl Iterator<Item = (String, &OutstationDef, &Point)> {
        self.outstations
            .iter()
            .flat_map(|os| os.points.iter().map(move |p| (tag_name(p, os.number), os, p)))
    }

    pub fn point_count(&self) -> usize {
        self.by_tag.len()
    }
}

fn check_point(p: &Point, tag: &str) -> Result<(), MapError> {
    if !is_legal(p.point_type, p.device, p.field) {
        return Err(MapError::Illegal {
            tag: tag.into(),
            point_type: p.point_type,
            device: p.device,
            field: p.field,
        });
    }
    if p.event_class > 3 {
        return Err(MapError::BadClass {
            tag: tag.into(),
            class: p.event_class,
        });
    }
    let evented = matches!(p.point_type, PointType::BinaryInput | PointType::AnalogInput);
    if p.event_class != 0 && !evented {
        return Err(MapError::ClassNotAllowed { tag: tag.into() });
    }
    if !(p.deadband.is_finite() && p.deadband >= 0.0) {
        return Err(MapError::BadDeadband { tag: tag.into() });
    }
    if p.deadband != 0.0 && p.point_type != PointType::AnalogInput {
        return Err(MapError::DeadbandNotAllowed { tag: tag.into() });
    }
    Ok(())
}

/// Parses a map document and validates it against `case`.
pub fn parse_map(text: &str, case: &GridCase) -> Result<PointMap, MapError> {
    let map = PointMap::from_toml(text)?;
    map.validate_against(case)?;
    Ok(map)
}
