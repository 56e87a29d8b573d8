//! Object headers and point values for the supported group/variation subset.

use std::fmt;

use super::app::FunctionCode;
use super::AppError;

/// Supported (group, variation) pairs. `*Any` forms are variation 0, used in reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variation {
    /// g1v0
    BinaryInputAny,
    /// g1v2
    BinaryInput,
    /// g2v0
    BinaryEventAny,
    /// g2v2
    BinaryEventTime,
    /// g10v0
    BinaryOutputStatusAny,
    /// g10v2
    BinaryOutputStatus,
    /// g12v1
    Crob,
    /// g20v0
    CounterAny,
    /// g20v1
    Counter32,
    /// g30v0
    AnalogInputAny,
    /// g30v1
    AnalogInput32,
    /// g30v5
    AnalogInputFloat,
    /// g32v0
    AnalogEventAny,
    /// g32v3
    AnalogEvent32Time,
    /// g32v7
    AnalogEventFloatTime,
    /// g40v0
    AnalogOutputStatusAny,
    /// g40v1
    AnalogOutputStatus32,
    /// g40v3
    AnalogOutputStatusFloat,
    /// g41v3
    AnalogOutputFloat,
    /// g50v1
    TimeAndDate,
    /// g60v1
    Class0,
    /// g60v2
    Class1,
    /// g60v3
    Class2,
    /// g60v4
    Class3,
}

const ALL_VARIATIONS: [Variation; 24] = [
    Variation::BinaryInputAny,
    Variation::BinaryInput,
    Variation::BinaryEventAny,
    Variation::BinaryEventTime,
    Variation::BinaryOutputStatusAny,
    Variation::BinaryOutputStatus,
    Variation::Crob,
    Variation::CounterAny,
    Variation::Counter32,
    Variation::AnalogInputAny,
    Variation::AnalogInput32,
    Variation::AnalogInputFloat,
    Variation::AnalogEventAny,
    Variation::AnalogEvent32Time,
    Variation::AnalogEventFloatTime,
    Variation::AnalogOutputStatusAny,
    Variation::AnalogOutputStatus32,
    Variation::AnalogOutputStatusFloat,
    Variation::AnalogOutputFloat,
    Variation::TimeAndDate,
    Variation::Class0,
    Variation::Class1,
    Variation::Class2,
    Variation::Class3,
];

impl Variation {
    pub fn all() -> &'static [Variation] {
        &ALL_VARIATIONS
    }

    pub fn group_var(self) -> (u8, u8) {
        use Variation::*;
        match self {
            BinaryInputAny => (1, 0),
            BinaryInput => (1, 2),
            BinaryEventAny => (2, 0),
            BinaryEventTime => (2, 2),
            BinaryOutputStatusAny => (10, 0),
            BinaryOutputStatus => (10, 2),
            Crob => (12, 1),
            CounterAny => (20, 0),
            Counter32 => (20, 1),
            AnalogInputAny => (30, 0),
            AnalogInput32 => (30, 1),
            AnalogInputFloat => (30, 5),
            AnalogEventAny => (32, 0),
            AnalogEvent32Time => (32, 3),
            AnalogEventFloatTime => (32, 7),
            AnalogOutputStatusAny => (40, 0),
            AnalogOutputStatus32 => (40, 1),
            AnalogOutputStatusFloat => (40, 3),
            AnalogOutputFloat => (41, 3),
            TimeAndDate => (50, 1),
            Class0 => (60, 1),
            Class1 => (60, 2),
            Class2 => (60, 3),
            Class3 => (60, 4),
        }
    }

    pub fn from_group_var(group: u8, variation: u8) -> Option<Self> {
        ALL_VARIATIONS
            .iter()
            .copied()
            .find(|v| v.group_var() == (group, variation))
    }

    /// Encoded size of one value, or `None` when the variation never carries data.
    pub fn value_size(self) -> Option<usize> {
        use Variation::*;
        match self {
            BinaryInput | BinaryOutputStatus => Some(1),
            BinaryEventTime => Some(7),
            Counter32 | AnalogInput32 | AnalogInputFloat | AnalogOutputStatus32 | AnalogOutputStatusFloat => {
                Some(5)
            }
            AnalogEvent32Time | AnalogEventFloatTime | Crob => Some(11),
            AnalogOutputFloat => Some(5),
            TimeAndDate => Some(6),
            _ => None,
        }
    }

    /// Class poll number for g60 variations.
    pub fn class(self) -> Option<u8> {
        match self {
            Variation::Class0 => Some(0),
            Variation::Class1 => Some(1),
            Variation::Class2 => Some(2),
            Variation::Class3 => Some(3),
            _ => None,
        }
    }

    pub fn class_poll(class: u8) -> Option<Variation> {
        match class {
            0 => Some(Variation::Class0),
            1 => Some(Variation::Class1),
            2 => Some(Variation::Class2),
            3 => Some(Variation::Class3),
            _ => None,
        }
    }

    fn is_static_readable(self) -> bool {
        use Variation::*;
        matches!(
            self,
            BinaryInputAny
                | BinaryInput
                | BinaryOutputStatusAny
                | BinaryOutputStatus
                | CounterAny
                | Counter32
                | AnalogInputAny
                | AnalogInput32
                | AnalogInputFloat
                | AnalogOutputStatusAny
                | AnalogOutputStatus32
                | AnalogOutputStatusFloat
        )
    }

    fn is_static_data(self) -> bool {
        self.is_static_readable() && self.value_size().is_some()
    }

    fn is_indexed_data(self) -> bool {
        use Variation::*;
        matches!(
            self,
            BinaryEventTime | AnalogEvent32Time | AnalogEventFloatTime | Crob | AnalogOutputFloat
        )
    }

    fn is_event(self) -> bool {
        use Variation::*;
        matches!(self, BinaryEventTime | AnalogEvent32Time | AnalogEventFloatTime)
    }
}

impl fmt::Display for Variation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (g, v) = self.group_var();
        write!(f, "g{g}v{v}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Qualifier {
    /// 0x00
    Range8,
    /// 0x01
    Range16,
    /// 0x06
    AllObjects,
    /// 0x07
    Count8,
    /// 0x17
    CountIndex8,
    /// 0x28
    CountIndex16,
}

impl Qualifier {
    pub fn to_u8(self) -> u8 {
        match self {
            Qualifier::Range8 => 0x00,
            Qualifier::Range16 => 0x01,
            Qualifier::AllObjects => 0x06,
            Qualifier::Count8 => 0x07,
            Qualifier::CountIndex8 => 0x17,
            Qualifier::CountIndex16 => 0x28,
        }
    }

    pub fn from_u8(b: u8) -> Option<Self> {
        Some(match b {
            0x00 => Qualifier::Range8,
            0x01 => Qualifier::Range16,
            0x06 => Qualifier::AllObjects,
            0x07 => Qualifier::Count8,
            0x17 => Qualifier::CountIndex8,
            0x28 => Qualifier::CountIndex16,
            _ => return None,
        })
    }

    fn is_range(self) -> bool {
        matches!(self, Qualifier::Range8 | Qualifier::Range16)
    }

    fn is_count_index(self) -> bool {
        matches!(self, Qualifier::CountIndex8 | Qualifier::CountIndex16)
    }

    fn field_len(self) -> usize {
        match self {
            Qualifier::Range8 => 2,
            Qualifier::Range16 => 4,
            Qualifier::AllObjects => 0,
            Qualifier::Count8 | Qualifier::CountIndex8 => 1,
            Qualifier::CountIndex16 => 2,
        }
    }

    fn index_len(self) -> usize {
        match self {
            Qualifier::CountIndex8 => 1,
            Qualifier::CountIndex16 => 2,
            _ => 0,
        }
    }
}

/// Quality flags. For binary variations bit 7 carries the state and is not stored here.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct Flags(pub u8);

impl Flags {
    pub const ONLINE: Flags = Flags(0x01);
    pub const RESTART: Flags = Flags(0x02);
    pub const COMM_LOST: Flags = Flags(0x04);
    pub const REMOTE_FORCED: Flags = Flags(0x08);
    pub const LOCAL_FORCED: Flags = Flags(0x10);
    pub const OVER_RANGE: Flags = Flags(0x20);

    pub fn online(self) -> bool {
        self.0 & Flags::ONLINE.0 != 0
    }

    pub fn with(self, other: Flags) -> Flags {
        Flags(self.0 | other.0)
    }
}

/// Milliseconds since the Unix epoch, 48 bits on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Hash)]
pub struct Timestamp(pub u64);

impl Timestamp {
    pub const MAX: u64 = (1 << 48) - 1;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CommandStatus {
    Success,
    Timeout,
    NoSelect,
    FormatError,
    NotSupported,
    AlreadyActive,
    HardwareError,
    Local,
    TooManyOps,
    NotAuthorized,
    Other(u8),
}

impl CommandStatus {
    pub fn to_u8(self) -> u8 {
        use CommandStatus::*;
        match self {
            Success => 0,
            Timeout => 1,
            NoSelect => 2,
            FormatError => 3,
            NotSupported => 4,
            AlreadyActive => 5,
            HardwareError => 6,
            Local => 7,
            TooManyOps => 8,
            NotAuthorized => 9,
            Other(b) => b,
        }
    }

    pub fn from_u8(b: u8) -> Self {
        use CommandStatus::*;
        match b {
            0 => Success,
            1 => Timeout,
            2 => NoSelect,
            3 => FormatError,
            4 => NotSupported,
            5 => AlreadyActive,
            6 => HardwareError,
            7 => Local,
            8 => TooManyOps,
            9 => NotAuthorized,
            b => Other(b),
        }
    }

    pub fn name(self) -> String {
        use CommandStatus::*;
        match self {
            Success => "SUCCESS".into(),
            Timeout => "TIMEOUT".into(),
            NoSelect => "NO_SELECT".into(),
            FormatError => "FORMAT_ERROR".into(),
            NotSupported => "NOT_SUPPORTED".into(),
            AlreadyActive => "ALREADY_ACTIVE".into(),
            HardwareError => "HARDWARE_ERROR".into(),
            Local => "LOCAL".into(),
            TooManyOps => "TOO_MANY_OPS".into(),
            NotAuthorized => "NOT_AUTHORIZED".into(),
            Other(b) => format!("STATUS_{b}"),
        }
    }
}

impl fmt::Display for CommandStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// CROB control code octet: operation type in bits 0..3, queue/clear in
/// bits 4/5, trip-close code in bits 6..7.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ControlCode(pub u8);

impl ControlCode {
    pub const NUL: ControlCode = ControlCode(0x00);
    pub const PULSE_ON: ControlCode = ControlCode(0x01);
    pub const PULSE_OFF: ControlCode = ControlCode(0x02);
    pub const LATCH_ON: ControlCode = ControlCode(0x03);
    pub const LATCH_OFF: ControlCode = ControlCode(0x04);
    pub const CLOSE_PULSE_ON: ControlCode = ControlCode(0x41);
    pub const TRIP_PULSE_ON: ControlCode = ControlCode(0x81);

    pub fn op_type(self) -> u8 {
        self.0 & 0x0F
    }

    pub fn trip_close(self) -> u8 {
        self.0 >> 6
    }

    /// The device state this code commands: `true` closes/starts, `false`
    /// opens/stops. Pulses act like latches because simulated devices have no
    /// pulse timers.
    pub fn target_state(self) -> Option<bool> {
        if self.0 & 0x30 != 0 {
            return None;
        }
        match (self.trip_close(), self.op_type()) {
            (0, 0x03) => Some(true),
            (0, 0x04) => Some(false),
            (0, 0x01) => Some(true),
            (0, 0x02) => Some(false),
            (1, 0x01) => Some(true),
            (2, 0x01) => Some(false),
            _ => None,
        }
    }

    pub fn name(self) -> String {
        match self {
            ControlCode::NUL => "NUL".into(),
            ControlCode::PULSE_ON => "PULSE_ON".into(),
            ControlCode::PULSE_OFF => "PULSE_OFF".into(),
            ControlCode::LATCH_ON => "LATCH_ON".into(),
            ControlCode::LATCH_OFF => "LATCH_OFF".into(),
            ControlCode::CLOSE_PULSE_ON => "CLOSE".into(),
            ControlCode::TRIP_PULSE_ON => "TRIP".into(),
            ControlCode(b) => format!("CODE_0x{b:02X}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Crob {
    pub code: ControlCode,
    pub count: u8,
    pub on_time_ms: u32,
    pub off_time_ms: u32,
    pub status: CommandStatus,
}

impl Crob {
    pub fn new(code: ControlCode) -> Self {
        Self {
            code,
            count: 1,
            on_time_ms: 0,
            off_time_ms: 0,
            status: CommandStatus::Success,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PointValue {
    /// g1v2, g10v2 (no time) and g2v2 (with time)
    Binary {
        value: bool,
        flags: Flags,
        time: Option<Timestamp>,
    },
    /// g30v1, g40v1 (no time) and g32v3 (with time)
    AnalogInt {
        value: i32,
        flags: Flags,
        time: Option<Timestamp>,
    },
    /// g30v5 (no time) and g32v7 (with time)
    AnalogFloat {
        value: f32,
        flags: Flags,
        time: Option<Timestamp>,
    },
    /// g20v1
    Counter { value: u32, flags: Flags },
    /// g12v1
    Crob(Crob),
    /// g41v3
    AnalogCommand { value: f32, status: CommandStatus },
    /// g50v1
    Time(Timestamp),
}

impl PointValue {
    pub fn flags(&self) -> Option<Flags> {
        match *self {
            PointValue::Binary { flags, .. }
            | PointValue::AnalogInt { flags, .. }
            | PointValue::AnalogFloat { flags, .. }
            | PointValue::Counter { flags, .. } => Some(flags),
            _ => None,
        }
    }

    pub fn time(&self) -> Option<Timestamp> {
        match *self {
            PointValue::Binary { time, .. }
            | PointValue::AnalogInt { time, .. }
            | PointValue::AnalogFloat { time, .. } => time,
            PointValue::Time(t) => Some(t),
            _ => None,
        }
    }

    /// Numeric view of the value (binary as 0/1).
    pub fn as_f64(&self) -> f64 {
        match *self {
            PointValue::Binary { value, .. } => value as u8 as f64,
            PointValue::AnalogInt { value, .. } => value as f64,
            PointValue::AnalogFloat { value, .. } => value as f64,
            PointValue::Counter { value, .. } => value as f64,
            PointValue::Crob(c) => c.code.0 as f64,
            PointValue::AnalogCommand { value, .. } => value as f64,
            PointValue::Time(t) => t.0 as f64,
        }
    }

    fn matches(&self, v: Variation) -> bool {
        use Variation::*;
        matches!(
            (v, self),
            (BinaryInput | BinaryOutputStatus, PointValue::Binary { time: None, .. })
                | (BinaryEventTime, PointValue::Binary { time: Some(_), .. })
                | (AnalogInput32 | AnalogOutputStatus32, PointValue::AnalogInt { time: None, .. })
                | (AnalogEvent32Time, PointValue::AnalogInt { time: Some(_), .. })
                | (AnalogInputFloat | AnalogOutputStatusFloat, PointValue::AnalogFloat { time: None, .. })
                | (AnalogEventFloatTime, PointValue::AnalogFloat { time: Some(_), .. })
                | (Counter32, PointValue::Counter { .. })
                | (Crob, PointValue::Crob(_))
                | (AnalogOutputFloat, PointValue::AnalogCommand { .. })
                | (TimeAndDate, PointValue::Time(_))
        )
    }

    fn encode(&self, out: &mut Vec<u8>) -> Result<(), AppError> {
        fn time(out: &mut Vec<u8>, t: Timestamp) -> Result<(), AppError> {
            if t.0 > Timestamp::MAX {
                return Err(AppError::TimestampRange(t.0));
            }
            out.extend_from_slice(&t.0.to_le_bytes()[..6]);
            Ok(())
        }
        match *self {
            PointValue::Binary { value, flags, time: t } => {
                out.push((flags.0 & 0x7F) | (value as u8) << 7);
                if let Some(t) = t {
                    time(out, t)?;
                }
            }
            PointValue::AnalogInt { value, flags, time: t } => {
                out.push(flags.0);
                out.extend_from_slice(&value.to_le_bytes());
                if let Some(t) = t {
                    time(out, t)?;
                }
            }
            PointValue::AnalogFloat { value, flags, time: t } => {
                out.push(flags.0);
                out.extend_from_slice(&value.to_le_bytes());
                if let Some(t) = t {
                    time(out, t)?;
                }
            }
            PointValue::Counter { value, flags } => {
                out.push(flags.0);
                out.extend_from_slice(&value.to_le_bytes());
            }
            PointValue::Crob(c) => {
                out.push(c.code.0);
                out.push(c.count);
                out.extend_from_slice(&c.on_time_ms.to_le_bytes());
                out.extend_from_slice(&c.off_time_ms.to_le_bytes());
                out.push(c.status.to_u8());
            }
            PointValue::AnalogCommand { value, status } => {
                out.extend_from_slice(&value.to_le_bytes());
                out.push(status.to_u8());
            }
            PointValue::Time(t) => time(out, t)?,
        }
        Ok(())
    }

    /// Decodes one value; `b` is exactly `v.value_size()` octets.
    fn decode(v: Variation, b: &[u8]) -> PointValue {
        use Variation::*;
        let u32_at = |i: usize| u32::from_le_bytes([b[i], b[i + 1], b[i + 2], b[i + 3]]);
        let time_at = |i: usize| {
            let mut t = [0u8; 8];
            t[..6].copy_from_slice(&b[i..i + 6]);
            Timestamp(u64::from_le_bytes(t))
        };
        match v {
            BinaryInput | BinaryOutputStatus => PointValue::Binary {
                value: b[0] & 0x80 != 0,
                flags: Flags(b[0] & 0x7F),
                time: None,
            },
            BinaryEventTime => PointValue::Binary {
                value: b[0] & 0x80 != 0,
                flags: Flags(b[0] & 0x7F),
                time: Some(time_at(1)),
            },
            AnalogInput32 | AnalogOutputStatus32 => PointValue::AnalogInt {
                value: u32_at(1) as i32,
                flags: Flags(b[0]),
                time: None,
            },
            AnalogEvent32Time => PointValue::AnalogInt {
                value: u32_at(1) as i32,
                flags: Flags(b[0]),
                time: Some(time_at(5)),
            },
            AnalogInputFloat | AnalogOutputStatusFloat => PointValue::AnalogFloat {
                value: f32::from_bits(u32_at(1)),
                flags: Flags(b[0]),
                time: None,
            },
            AnalogEventFloatTime => PointValue::AnalogFloat {
                value: f32::from_bits(u32_at(1)),
                flags: Flags(b[0]),
                time: Some(time_at(5)),
            },
            Counter32 => PointValue::Counter {
                value: u32_at(1),
                flags: Flags(b[0]),
            },
            Crob => PointValue::Crob(self::Crob {
                code: ControlCode(b[0]),
                count: b[1],
                on_time_ms: u32_at(2),
                off_time_ms: u32_at(6),
                status: CommandStatus::from_u8(b[10]),
            }),
            AnalogOutputFloat => PointValue::AnalogCommand {
                value: f32::from_bits(u32_at(0)),
                status: CommandStatus::from_u8(b[4]),
            },
            TimeAndDate => PointValue::Time(time_at(0)),
            _ => unreachable!("variation {v} carries no data"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObjectBody {
    /// Qualifier 0x06: no range, no data.
    All,
    /// Start-stop range without data (read requests).
    Range { start: u16, stop: u16 },
    /// Start-stop range with one value per index.
    RangedValues { start: u16, values: Vec<PointValue> },
    /// Count with index prefixes, without data (read requests).
    Indices(Vec<u16>),
    /// Count with index prefixes and values.
    IndexedValues(Vec<(u16, PointValue)>),
    /// Plain count (qualifier 0x07) with values.
    CountedValues(Vec<PointValue>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectBlock {
    pub variation: Variation,
    pub qualifier: Qualifier,
    pub body: ObjectBody,
}

fn carries_data(function: FunctionCode, v: Variation) -> bool {
    !matches!(function, FunctionCode::Read | FunctionCode::Confirm) && v.value_size().is_some()
}

fn check_supported(v: Variation, q: Qualifier, data: bool) -> Result<(), AppError> {
    let ok = if data {
        match q {
            Qualifier::Range8 | Qualifier::Range16 => v.is_static_data(),
            Qualifier::CountIndex8 | Qualifier::CountIndex16 => v.is_indexed_data(),
            Qualifier::Count8 => v == Variation::TimeAndDate,
            Qualifier::AllObjects => false,
        }
    } else {
        match q {
            Qualifier::AllObjects => v.value_size().is_none() || v.is_static_data() || v.is_event(),
            Qualifier::Range8
            | Qualifier::Range16
            | Qualifier::CountIndex8
            | Qualifier::CountIndex16 => v.is_static_readable(),
            Qualifier::Count8 => false,
        }
    };
    if ok {
        Ok(())
    } else {
        let (group, variation) = v.group_var();
        Err(AppError::UnsupportedObject {
            group,
            variation,
            qualifier: q.to_u8(),
        })
    }
}

impl ObjectBlock {
    pub fn all(variation: Variation) -> Self {
        Self {
            variation,
            qualifier: Qualifier::AllObjects,
            body: ObjectBody::All,
        }
    }

    pub fn range_request(variation: Variation, start: u16, stop: u16) -> Self {
        Self {
            variation,
            qualifier: if stop <= 0xFF {
                Qualifier::Range8
            } else {
                Qualifier::Range16
            },
            body: ObjectBody::Range { start, stop },
        }
    }

    /// Contiguous values starting at `start`; picks the 1-octet qualifier when it fits.
    pub fn ranged(variation: Variation, start: u16, values: Vec<PointValue>) -> Self {
        let stop = start as usize + values.len().saturating_sub(1);
        Self {
            variation,
            qualifier: if stop <= 0xFF {
                Qualifier::Range8
            } else {
                Qualifier::Range16
            },
            body: ObjectBody::RangedValues { start, values },
        }
    }

    /// Index-prefixed values with 2-octet count and indices.
    pub fn indexed(variation: Variation, items: Vec<(u16, PointValue)>) -> Self {
        Self {
            variation,
            qualifier: Qualifier::CountIndex16,
            body: ObjectBody::IndexedValues(items),
        }
    }

    pub fn counted(variation: Variation, values: Vec<PointValue>) -> Self {
        Self {
            variation,
            qualifier: Qualifier::Count8,
            body: ObjectBody::CountedValues(values),
        }
    }

    /// Number of objects described by the header.
    pub fn count(&self) -> usize {
        match &self.body {
            ObjectBody::All => 0,
            ObjectBody::Range { start, stop } => (*stop as usize + 1).saturating_sub(*start as usize),
            ObjectBody::RangedValues { values, .. } | ObjectBody::CountedValues(values) => {
                values.len()
            }
            ObjectBody::Indices(i) => i.len(),
            ObjectBody::IndexedValues(items) => items.len(),
        }
    }

    /// (index, value) pairs carried by the block.
    pub fn values(&self) -> Vec<(u16, PointValue)> {
        match &self.body {
            ObjectBody::RangedValues { start, values } => values
                .iter()
                .enumerate()
                .map(|(i, v)| (start.wrapping_add(i as u16), *v))
                .collect(),
            ObjectBody::IndexedValues(items) => items.clone(),
            ObjectBody::CountedValues(values) => values
                .iter()
                .enumerate()
                .map(|(i, v)| (i as u16, *v))
                .collect(),
            _ => Vec::new(),
        }
    }

    pub fn encoded_len(&self) -> usize {
        let size = self.variation.value_size().unwrap_or(0);
        let data = match &self.body {
            ObjectBody::All | ObjectBody::Range { .. } => 0,
            ObjectBody::Indices(i) => i.len() * self.qualifier.index_len(),
            _ => self.count() * (size + self.qualifier.index_len()),
        };
        3 + self.qualifier.field_len() + data
    }

    pub(crate) fn encode_into(&self, function: FunctionCode, out: &mut Vec<u8>) -> Result<(), AppError> {
        let v = self.variation;
        let q = self.qualifier;
        let data = carries_data(function, v);
        check_supported(v, q, data)?;
        let (group, variation) = v.group_var();
        let mismatch = AppError::BodyMismatch { group, variation };
        out.extend_from_slice(&[group, variation, q.to_u8()]);

        let check_value = |val: &PointValue| {
            if val.matches(v) {
                Ok(())
            } else {
                Err(AppError::ValueMismatch { group, variation })
            }
        };
        let push_range = |out: &mut Vec<u8>, start: u16, stop: u16| -> Result<(), AppError> {
            if stop < start {
                return Err(AppError::RangeInverted { start, stop });
            }
            if q == Qualifier::Range8 {
                if stop > 0xFF {
                    return Err(AppError::IndexOverflow(stop as usize));
                }
                out.extend_from_slice(&[start as u8, stop as u8]);
            } else {
                out.extend_from_slice(&start.to_le_bytes());
                out.extend_from_slice(&stop.to_le_bytes());
            }
            Ok(())
        };
        let push_count = |out: &mut Vec<u8>, n: usize| -> Result<(), AppError> {
            match q.index_len().max(1) {
                1 if n <= 0xFF => out.push(n as u8),
                2 if n <= 0xFFFF => out.extend_from_slice(&(n as u16).to_le_bytes()),
                _ => return Err(AppError::CountOverflow(n)),
            }
            Ok(())
        };
        let push_index = |out: &mut Vec<u8>, i: u16| -> Result<(), AppError> {
            if q == Qualifier::CountIndex8 {
                if i > 0xFF {
                    return Err(AppError::IndexOverflow(i as usize));
                }
                out.push(i as u8);
            } else {
                out.extend_from_slice(&i.to_le_bytes());
            }
            Ok(())
        };

        match (&self.body, data) {
            (ObjectBody::All, _) if q == Qualifier::AllObjects => {}
            (ObjectBody::Range { start, stop }, false) if q.is_range() => {
                push_range(out, *start, *stop)?;
            }
            (ObjectBody::RangedValues { start, values }, true) if q.is_range() => {
                if values.is_empty() {
                    return Err(mismatch);
                }
                let stop = *start as usize + values.len() - 1;
                if stop > 0xFFFF {
                    return Err(AppError::IndexOverflow(stop));
                }
                push_range(out, *start, stop as u16)?;
                for val in values {
                    check_value(val)?;
                    val.encode(out)?;
                }
            }
            (ObjectBody::Indices(indices), false) if q.is_count_index() => {
                push_count(out, indices.len())?;
                for &i in indices {
                    push_index(out, i)?;
                }
            }
            (ObjectBody::IndexedValues(items), true) if q.is_count_index() => {
                push_count(out, items.len())?;
                for (i, val) in items {
                    check_value(val)?;
                    push_index(out, *i)?;
                    val.encode(out)?;
                }
            }
            (ObjectBody::CountedValues(values), true) if q == Qualifier::Count8 => {
                push_count(out, values.len())?;
                for val in values {
                    check_value(val)?;
                    val.encode(out)?;
                }
            }
            _ => return Err(mismatch),
        }
        Ok(())
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], AppError> {
        if self.remaining() < n {
            return Err(AppError::Truncated);
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, AppError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, AppError> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn uint(&mut self, width: usize) -> Result<u16, AppError> {
        if width == 1 {
            self.u8().map(u16::from)
        } else {
            self.u16()
        }
    }
}

/// Decodes the object headers of a fragment body. Whether values follow each
/// header is implied by `function`: READ requests never carry values.
pub fn decode_objects(function: FunctionCode, body: &[u8]) -> Result<Vec<ObjectBlock>, AppError> {
    let mut cur = Cursor { buf: body, pos: 0 };
    let mut blocks = Vec::new();
    if function == FunctionCode::Confirm {
        return if body.is_empty() {
            Ok(blocks)
        } else {
            Err(AppError::TrailingData(body.len()))
        };
    }
    while cur.remaining() > 0 {
        let hdr = cur.take(3)?;
        let (group, var_num, qual) = (hdr[0], hdr[1], hdr[2]);
        let unsupported = AppError::UnsupportedObject {
            group,
            variation: var_num,
            qualifier: qual,
        };
        let v = Variation::from_group_var(group, var_num).ok_or(unsupported.clone())?;
        let q = Qualifier::from_u8(qual).ok_or(unsupported)?;
        let data = carries_data(function, v);
        check_supported(v, q, data)?;
        let size = v.value_size().unwrap_or(0);

        let body = match q {
            Qualifier::AllObjects => ObjectBody::All,
            Qualifier::Range8 | Qualifier::Range16 => {
                let w = if q == Qualifier::Range8 { 1 } else { 2 };
                let start = cur.uint(w)?;
                let stop = cur.uint(w)?;
                if stop < start {
                    return Err(AppError::RangeInverted { start, stop });
                }
                if data {
                    let n = (stop - start) as usize + 1;
                    if n * size > cur.remaining() {
                        return Err(AppError::Truncated);
                    }
                    let values = (0..n)
                        .map(|_| cur.take(size).map(|b| PointValue::decode(v, b)))
                        .collect::<Result<Vec<_>, _>>()?;
                    ObjectBody::RangedValues { start, values }
                } else {
                    ObjectBody::Range { start, stop }
                }
            }
            Qualifier::Count8 => {
                let n = cur.u8()? as usize;
                if n * size > cur.remaining() {
                    return Err(AppError::Truncated);
                }
                let values = (0..n)
                    .map(|_| cur.take(size).map(|b| PointValue::decode(v, b)))
                    .collect::<Result<Vec<_>, _>>()?;
                ObjectBody::CountedValues(values)
            }
            Qualifier::CountIndex8 | Qualifier::CountIndex16 => {
                let w = q.index_len();
                let n = cur.uint(w)? as usize;
                let per = w + if data { size } else { 0 };
                if n * per > cur.remaining() {
                    return Err(AppError::Truncated);
                }
                if data {
                    let items = (0..n)
                        .map(|_| {
                            let i = cur.uint(w)?;
                            Ok((i, PointValue::decode(v, cur.take(size)?)))
                        })
                        .collect::<Result<Vec<_>, AppError>>()?;
                    ObjectBody::IndexedValues(items)
                } else {
                    let idx = (0..n).map(|_| cur.uint(w)).collect::<Result<Vec<_>, _>>()?;
                    ObjectBody::Indices(idx)
                }
            }
        };
        blocks.push(ObjectBlock {
            variation: v,
            qualifier: q,
            body,
        });
    }
    Ok(blocks)
}
