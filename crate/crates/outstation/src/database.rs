//! Point bindings for one outstation and the static/event value conversions.

use gridwire_core::grid::{GridCase, GridState};
use gridwire_core::points::{read_point, MapError, OutstationDef, Point, PointReading, PointType, Reading, Target};
use gridwire_core::proto::{Flags, PointValue, Timestamp, Variation};

use crate::events::{AnalogReportState, EventRecord, EventStore, EventValue};

/// Wire representation used for analog values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AnalogEncoding {
    /// g30v5 / g40v3 / g32v7
    #[default]
    Float,
    /// g30v1 / g40v1 / g32v3
    Int32,
}

impl AnalogEncoding {
    pub fn static_input(self) -> Variation {
        match self {
            AnalogEncoding::Float => Variation::AnalogInputFloat,
            AnalogEncoding::Int32 => Variation::AnalogInput32,
        }
    }

    pub fn static_output(self) -> Variation {
        match self {
            AnalogEncoding::Float => Variation::AnalogOutputStatusFloat,
            AnalogEncoding::Int32 => Variation::AnalogOutputStatus32,
        }
    }

    pub fn event(self) -> Variation {
        match self {
            AnalogEncoding::Float => Variation::AnalogEventFloatTime,
            AnalogEncoding::Int32 => Variation::AnalogEvent32Time,
        }
    }
}

/// Builds an analog point value, rounding and clamping for the integer form.
pub fn analog_value(value: f64, flags: Flags, encoding: AnalogEncoding, time: Option<Timestamp>) -> PointValue {
    match encoding {
        AnalogEncoding::Float => PointValue::AnalogFloat {
            value: value as f32,
            flags,
            time,
        },
        AnalogEncoding::Int32 => {
            let r = value.round();
            let (value, flags) = if r > i32::MAX as f64 {
                (i32::MAX, flags.with(Flags::OVER_RANGE))
            } else if r < i32::MIN as f64 {
                (i32::MIN, flags.with(Flags::OVER_RANGE))
            } else {
                (r as i32, flags)
            };
            PointValue::AnalogInt { value, flags, time }
        }
    }
}

fn flags_for(reading: &PointReading) -> Flags {
    if reading.online {
        Flags::ONLINE
    } else {
        Flags::default()
    }
}

#[derive(Debug, Clone)]
pub struct BoundPoint {
    pub point: Point,
    pub target: Target,
    pub tag: String,
}

fn slot(t: PointType) -> usize {
    PointType::ALL.iter().position(|x| *x == t).expect("known type")
}

/// The points of one outstation, resolved against the case. Within each type
/// the vector position equals the DNP3 index.
#[derive(Debug, Clone)]
pub struct OutstationDb {
    pub number: u16,
    pub name: String,
    points: [Vec<BoundPoint>; 5],
}

impl OutstationDb {
    pub fn build(def: &OutstationDef, case: &GridCase) -> Result<Self, MapError> {
        let mut points: [Vec<BoundPoint>; 5] = Default::default();
        for t in PointType::ALL {
            for p in def.sorted_points(t) {
                let tag = p.tag_name(def.number);
                let target = Target::resolve(case, p.device, &p.key).ok_or_else(|| MapError::UnknownDevice {
                    tag: tag.clone(),
                    device: p.device,
                    key: p.key.clone(),
                })?;
                points[slot(t)].push(BoundPoint {
                    point: p.clone(),
                    target,
                    tag,
                });
            }
        }
        Ok(Self {
            number: def.number,
            name: def.name.clone(),
            points,
        })
    }

    pub fn points(&self, t: PointType) -> &[BoundPoint] {
        &self.points[slot(t)]
    }

    pub fn point(&self, t: PointType, index: u16) -> Option<&BoundPoint> {
        self.points[slot(t)].get(index as usize)
    }

    pub fn count(&self, t: PointType) -> usize {
        self.points[slot(t)].len()
    }

    pub fn reading(&self, case: &GridCase, state: &GridState, t: PointType, index: u16) -> Option<PointReading> {
        let bp = self.point(t, index)?;
        Some(read_point(case, state, bp.target, t, bp.point.field))
    }

    /// Static wire value of one point.
    pub fn static_value(
        &self,
        case: &GridCase,
        state: &GridState,
        t: PointType,
        index: u16,
        encoding: AnalogEncoding,
    ) -> Option<PointValue> {
        let r = self.reading(case, state, t, index)?;
        let flags = flags_for(&r);
        Some(match (t, r.value) {
            (PointType::CounterInput, _) => PointValue::Counter { value: 0, flags },
            (_, Reading::Binary(value)) => PointValue::Binary {
                value,
                flags,
                time: None,
            },
            (_, Reading::Analog(v)) => analog_value(v, flags, encoding, None),
        })
    }
}

/// Per-outstation change detector feeding an [`EventStore`].
#[derive(Debug, Clone)]
pub struct Scanner {
    binaries: Vec<Option<bool>>,
    analogs: Vec<Option<AnalogReportState>>,
}

impl Scanner {
    /// Captures the current values without producing events.
    pub fn new(db: &OutstationDb, case: &GridCase, state: &GridState) -> Self {
        let binaries = db
            .points(PointType::BinaryInput)
            .iter()
            .map(|bp| {
                (bp.point.event_class != 0).then(|| {
                    matches!(
                        read_point(case, state, bp.target, PointType::BinaryInput, bp.point.field).value,
                        Reading::Binary(true)
                    )
                })
            })
            .collect();
        let analogs = db
            .points(PointType::AnalogInput)
            .iter()
            .map(|bp| {
                (bp.point.event_class != 0).then(|| {
                    let v = match read_point(case, state, bp.target, PointType::AnalogInput, bp.point.field).value {
                        Reading::Analog(v) => v,
                        Reading::Binary(b) => b as u8 as f64,
                    };
                    AnalogReportState::new(v, bp.point.deadband)
                })
            })
            .collect();
        Self { binaries, analogs }
    }

    pub fn analog_state(&self, index: u16) -> Option<&AnalogReportState> {
        self.analogs.get(index as usize).and_then(|a| a.as_ref())
    }

    /// Compares `state` with the last scan and queues events into `store`.
    pub fn scan(&mut self, db: &OutstationDb, case: &GridCase, state: &GridState, store: &mut EventStore) -> usize {
        let time = state.time_ms();
        let mut queued = 0;
        for (i, bp) in db.points(PointType::BinaryInput).iter().enumerate() {
            let Some(last) = self.binaries[i].as_mut() else { continue };
            let r = read_point(case, state, bp.target, PointType::BinaryInput, bp.point.field);
            let value = matches!(r.value, Reading::Binary(true));
            if value != *last {
                *last = value;
                store.push(EventRecord {
                    point_type: PointType::BinaryInput,
                    index: i as u16,
                    value: EventValue::Binary(value),
                    flags: flags_for(&r),
                    time,
                    class: bp.point.event_class,
                });
                queued += 1;
            }
        }
        for (i, bp) in db.points(PointType::AnalogInput).iter().enumerate() {
            let Some(rs) = self.analogs[i].as_mut() else { continue };
            let r = read_point(case, state, bp.target, PointType::AnalogInput, bp.point.field);
            let Reading::Analog(v) = r.value else { continue };
            if let Some(mag) = rs.update(v) {
                store.push(EventRecord {
                    point_type: PointType::AnalogInput,
                    index: i as u16,
                    value: EventValue::Analog(mag),
                    flags: flags_for(&r),
                    time,
                    class: bp.point.event_class,
                });
                queued += 1;
            }
        }
        queued
    }
}

/// Wire value and variation of a stored event.
pub fn event_object(record: &EventRecord, encoding: AnalogEncoding) -> (Variation, PointValue) {
    let time = Some(Timestamp(record.time.min(Timestamp::MAX)));
    match record.value {
        EventValue::Binary(value) => (
            Variation::BinaryEventTime,
            PointValue::Binary {
                value,
                flags: record.flags,
                time,
            },
        ),
        EventValue::Analog(v) => (encoding.event(), analog_value(v, record.flags, encoding, time)),
    }
}
