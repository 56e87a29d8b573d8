//! Application layer: fragments, function codes, internal indications.

use std::fmt;

use super::objects::{decode_objects, ObjectBlock};
use super::AppError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FunctionCode {
    Confirm,
    Read,
    Write,
    Select,
    Operate,
    DirectOperate,
    Response,
    UnsolicitedResponse,
}

impl FunctionCode {
    pub fn to_u8(self) -> u8 {
        match self {
            FunctionCode::Confirm => 0x00,
            FunctionCode::Read => 0x01,
            FunctionCode::Write => 0x02,
            FunctionCode::Select => 0x03,
            FunctionCode::Operate => 0x04,
            FunctionCode::DirectOperate => 0x05,
            FunctionCode::Response => 0x81,
            FunctionCode::UnsolicitedResponse => 0x82,
        }
    }

    pub fn from_u8(b: u8) -> Option<Self> {
        Some(match b {
            0x00 => FunctionCode::Confirm,
            0x01 => FunctionCode::Read,
            0x02 => FunctionCode::Write,
            0x03 => FunctionCode::Select,
            0x04 => FunctionCode::Operate,
            0x05 => FunctionCode::DirectOperate,
            0x81 => FunctionCode::Response,
            0x82 => FunctionCode::UnsolicitedResponse,
            _ => return None,
        })
    }

    pub fn is_response(self) -> bool {
        matches!(self, FunctionCode::Response | FunctionCode::UnsolicitedResponse)
    }

    pub fn name(self) -> &'static str {
        match self {
            FunctionCode::Confirm => "CONFIRM",
            FunctionCode::Read => "READ",
            FunctionCode::Write => "WRITE",
            FunctionCode::Select => "SELECT",
            FunctionCode::Operate => "OPERATE",
            FunctionCode::DirectOperate => "DIRECT_OPERATE",
            FunctionCode::Response => "RESPONSE",
            FunctionCode::UnsolicitedResponse => "UNSOLICITED_RESPONSE",
        }
    }
}

impl fmt::Display for FunctionCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The application control octet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AppControl {
    pub fir: bool,
    pub fin: bool,
    pub con: bool,
    pub uns: bool,
    /// 0..=15
    pub seq: u8,
}

impl AppControl {
    /// A single-fragment message (FIR and FIN set).
    pub fn single(seq: u8) -> Self {
        Self {
            fir: true,
            fin: true,
            con: false,
            uns: false,
            seq: seq & 0x0F,
        }
    }

    pub fn to_byte(self) -> u8 {
        (self.fir as u8) << 7
            | (self.fin as u8) << 6
            | (self.con as u8) << 5
            | (self.uns as u8) << 4
            | (self.seq & 0x0F)
    }

    pub fn from_byte(b: u8) -> Self {
        Self {
            fir: b & 0x80 != 0,
            fin: b & 0x40 != 0,
            con: b & 0x20 != 0,
            uns: b & 0x10 != 0,
            seq: b & 0x0F,
        }
    }
}

/// Internal indications. Bits 0..7 are IIN1, bits 8..15 are IIN2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct Iin(pub u16);

impl Iin {
    pub const BROADCAST: Iin = Iin(1 << 0);
    pub const CLASS_1_EVENTS: Iin = Iin(1 << 1);
    pub const CLASS_2_EVENTS: Iin = Iin(1 << 2);
    pub const CLASS_3_EVENTS: Iin = Iin(1 << 3);
    pub const NEED_TIME: Iin = Iin(1 << 4);
    pub const LOCAL_CONTROL: Iin = Iin(1 << 5);
    pub const DEVICE_TROUBLE: Iin = Iin(1 << 6);
    pub const DEVICE_RESTART: Iin = Iin(1 << 7);
    pub const NO_FUNC_CODE_SUPPORT: Iin = Iin(1 << 8);
    pub const OBJECT_UNKNOWN: Iin = Iin(1 << 9);
    pub const PARAMETER_ERROR: Iin = Iin(1 << 10);
    pub const EVENT_BUFFER_OVERFLOW: Iin = Iin(1 << 11);
    pub const ALREADY_EXECUTING: Iin = Iin(1 << 12);
    pub const CONFIG_CORRUPT: Iin = Iin(1 << 13);

    const NAMES: [(Iin, &'static str); 14] = [
        (Iin::BROADCAST, "BROADCAST"),
        (Iin::CLASS_1_EVENTS, "CLASS_1_EVENTS"),
        (Iin::CLASS_2_EVENTS, "CLASS_2_EVENTS"),
        (Iin::CLASS_3_EVENTS, "CLASS_3_EVENTS"),
        (Iin::NEED_TIME, "NEED_TIME"),
        (Iin::LOCAL_CONTROL, "LOCAL_CONTROL"),
        (Iin::DEVICE_TROUBLE, "DEVICE_TROUBLE"),
        (Iin::DEVICE_RESTART, "DEVICE_RESTART"),
        (Iin::NO_FUNC_CODE_SUPPORT, "NO_FUNC_CODE_SUPPORT"),
        (Iin::OBJECT_UNKNOWN, "OBJECT_UNKNOWN"),
        (Iin::PARAMETER_ERROR, "PARAMETER_ERROR"),
        (Iin::EVENT_BUFFER_OVERFLOW, "EVENT_BUFFER_OVERFLOW"),
        (Iin::ALREADY_EXECUTING, "ALREADY_EXECUTING"),
        (Iin::CONFIG_CORRUPT, "CONFIG_CORRUPT"),
    ];

    pub fn contains(self, other: Iin) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn set(&mut self, other: Iin) {
        self.0 |= other.0;
    }

    pub fn to_bytes(self) -> [u8; 2] {
        self.0.to_le_bytes()
    }

    pub fn from_bytes(b: [u8; 2]) -> Self {
        Iin(u16::from_le_bytes(b))
    }

    /// Event-available bit for class 1..=3.
    pub fn class_events(class: u8) -> Iin {
        match class {
            1 => Iin::CLASS_1_EVENTS,
            2 => Iin::CLASS_2_EVENTS,
            3 => Iin::CLASS_3_EVENTS,
            _ => Iin(0),
        }
    }
}

impl std::ops::BitOr for Iin {
    type Output = Iin;
    fn bitor(self, rhs: Iin) -> Iin {
        Iin(self.0 | rhs.0)
    }
}

impl fmt::Display for Iin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = Iin::NAMES
            .iter()
            .filter(|(bit, _)| self.contains(*bit))
            .map(|(_, n)| *n)
            .collect();
        if names.is_empty() {
            f.write_str("-")
        } else {
            f.write_str(&names.join("|"))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppFragment {
    pub control: AppControl,
    pub function: FunctionCode,
    /// Present exactly on responses.
    pub iin: Option<Iin>,
    pub objects: Vec<ObjectBlock>,
}

impl AppFragment {
    pub fn request(function: FunctionCode, seq: u8, objects: Vec<ObjectBlock>) -> Self {
        Self {
            control: AppControl::single(seq),
            function,
            iin: None,
            objects,
        }
    }

    pub fn response(control: AppControl, iin: Iin, objects: Vec<ObjectBlock>) -> Self {
        Self {
            control,
            function: FunctionCode::Response,
            iin: Some(iin),
            objects,
        }
    }

    pub fn confirm(seq: u8, uns: bool) -> Self {
        Self {
            control: AppControl {
                uns,
                ..AppControl::single(seq)
            },
            function: FunctionCode::Confirm,
            iin: None,
            objects: Vec::new(),
        }
    }

    pub fn header_len(&self) -> usize {
        if self.function.is_response() {
            4
        } else {
            2
        }
    }

    pub fn encoded_len(&self) -> usize {
        self.header_len() + self.objects.iter().map(|o| o.encoded_len()).sum::<usize>()
    }
}

pub fn encode_app_fragment(frag: &AppFragment) -> Result<Vec<u8>, AppError> {
    let mut out = Vec::with_capacity(frag.encoded_len());
    out.push(frag.control.to_byte());
    out.push(frag.function.to_u8());
    match (frag.function.is_response(), frag.iin) {
        (true, Some(iin)) => out.extend_from_slice(&iin.to_bytes()),
        (true, None) => return Err(AppError::MissingIin),
        (false, Some(_)) => return Err(AppError::UnexpectedIin),
        (false, None) => {}
    }
    for obj in &frag.objects {
        obj.encode_into(frag.function, &mut out)?;
    }
    Ok(out)
}

pub fn decode_app_fragment(bytes: &[u8]) -> Result<AppFragment, AppError> {
    if bytes.len() < 2 {
        return Err(AppError::Truncated);
    }
    let control = AppControl::from_byte(bytes[0]);
    let function = FunctionCode::from_u8(bytes[1]).ok_or(AppError::UnknownFunction(bytes[1]))?;
    let (iin, body) = if function.is_response() {
        if bytes.len() < 4 {
            return Err(AppError::Truncated);
        }
        (Some(Iin::from_bytes([bytes[2], bytes[3]])), &bytes[4..])
    } else {
        (None, &bytes[2..])
    };
    let objects = decode_objects(function, body)?;
    Ok(AppFragment {
        control,
        function,
        iin,
        objects,
    })
}
