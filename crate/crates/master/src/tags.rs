//! Named tag database for one session, keyed by point-map tag names.

use std::collections::HashMap;

use gridwire_core::points::{Field, OutstationDef, PointType};
use gridwire_core::proto::{PointValue, Variation};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Validity {
    Good,
    Invalid,
}

/// A tag value: JSON `true`/`false` for binaries, a number otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TagValue {
    Binary(bool),
    Analog(f64),
}

impl TagValue {
    pub fn as_f64(self) -> f64 {
        match self {
            TagValue::Binary(b) => b as u8 as f64,
            TagValue::Analog(v) => v,
        }
    }

    fn from_point(value: &PointValue) -> Option<Self> {
        Some(match *value {
            PointValue::Binary { value, .. } => TagValue::Binary(value),
            PointValue::AnalogInt { value, .. } => TagValue::Analog(value as f64),
            PointValue::AnalogFloat { value, .. } => TagValue::Analog(value as f64),
            PointValue::Counter { value, .. } => TagValue::Analog(value as f64),
            _ => return None,
        })
    }
}

impl std::fmt::Display for TagValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TagValue::Binary(b) => write!(f, "{b}"),
            TagValue::Analog(v) => write!(f, "{v}"),
        }
    }
}

mod abbrev {
    use gridwire_core::points::PointType;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &PointType, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(t.abbrev())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<PointType, D::Error> {
        let s = String::deserialize(d)?;
        PointType::from_abbrev(&s).ok_or_else(|| serde::de::Error::custom(format!("unknown point type {s}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PointRef {
    pub outstation: u16,
    #[serde(rename = "type", with = "abbrev")]
    pub point_type: PointType,
    pub index: u16,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagEntry {
    pub name: String,
    /// Latest value from any poll.
    #[serde(rename = "instMag")]
    pub inst_mag: Option<TagValue>,
    /// Latest value carried by an event.
    pub mag: Option<TagValue>,
    pub validity: Validity,
    /// Wall-clock ms of the last update.
    pub timestamp: Option<u64>,
    /// Quality flags reported with the value.
    pub flags: u8,
    pub point: PointRef,
    pub unit: String,
}

fn unit(field: Field) -> &'static str {
    match field {
        Field::Mw | Field::MwSetpoint => "MW",
        Field::Mvar => "MVAR",
        Field::Vpu | Field::VpuSetpoint => "pu",
        Field::Status => "",
    }
}

/// Point type that a response object variation reports.
pub fn point_type_of(v: Variation) -> Option<PointType> {
    use Variation::*;
    Some(match v {
        BinaryInput | BinaryEventTime => PointType::BinaryInput,
        BinaryOutputStatus => PointType::BinaryOutput,
        Counter32 => PointType::CounterInput,
        AnalogInput32 | AnalogInputFloat | AnalogEvent32Time | AnalogEventFloatTime => PointType::AnalogInput,
        AnalogOutputStatus32 | AnalogOutputStatusFloat => PointType::AnalogOutput,
        _ => return None,
    })
}

pub fn is_event(v: Variation) -> bool {
    matches!(
        v,
        Variation::BinaryEventTime | Variation::AnalogEvent32Time | Variation::AnalogEventFloatTime
    )
}

/// All tags of one outstation. The session task is the only writer.
#[derive(Debug, Clone, Default)]
pub struct TagTable {
    entries: Vec<TagEntry>,
    by_point: HashMap<(PointType, u16), usize>,
    by_name: HashMap<String, usize>,
}

impl TagTable {
    pub fn from_outstation(def: &OutstationDef) -> Self {
        let mut t = TagTable::default();
        for pt in PointType::ALL {
            for p in def.sorted_points(pt) {
                let name = p.tag_name(def.number);
                let i = t.entries.len();
                t.by_point.insert((pt, p.index), i);
                t.by_name.insert(name.clone(), i);
                t.entries.push(TagEntry {
                    name,
                    inst_mag: None,
                    mag: None,
                    validity: Validity::Invalid,
                    timestamp: None,
                    flags: 0,
                    point: PointRef {
                        outstation: def.number,
                        point_type: pt,
                        index: p.index,
                    },
                    unit: unit(p.field).to_string(),
                });
            }
        }
        t
    }

    pub fn entries(&self) -> &[TagEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&TagEntry> {
        self.by_name.get(name).map(|&i| &self.entries[i])
    }

    pub fn by_point(&self, point_type: PointType, index: u16) -> Option<&TagEntry> {
        self.by_point.get(&(point_type, index)).map(|&i| &self.entries[i])
    }

    /// Applies one received object value. Returns the updated entry, or
    /// `None` when the point is not in the map.
    pub fn apply(&mut self, variation: Variation, index: u16, value: &PointValue, now_ms: u64, integrity: bool) -> Option<&TagEntry> {
        let pt = point_type_of(variation)?;
        let &i = self.by_point.get(&(pt, index))?;
        let v = TagValue::from_point(value)?;
        let e = &mut self.entries[i];
        e.inst_mag = Some(v);
        if is_event(variation) {
            e.mag = Some(v);
        }
        e.flags = value.flags().unwrap_or_default().0;
        e.timestamp = Some(now_ms);
        if integrity {
            e.validity = Validity::Good;
        }
        Some(e)
    }

    /// Marks every tag invalid and returns those that changed.
    pub fn invalidate(&mut self) -> Vec<TagEntry> {
        let mut changed = Vec::new();
        for e in &mut self.entries {
            if e.validity != Validity::Invalid {
                e.validity = Validity::Invalid;
                changed.push(e.clone());
            }
        }
        changed
    }
}
