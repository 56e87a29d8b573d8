//! One-line-per-frame text rendering of captured traffic.

use std::collections::HashMap;
use std::fmt::Write;

use super::app::{decode_app_fragment, AppFragment};
use super::link::{func, LinkFrame};
use super::objects::{ObjectBlock, ObjectBody, PointValue};
use super::transport::{Reassembler, TransportSegment};

const MAX_RENDERED_VALUES: usize = 8;

fn render_value(v: &PointValue) -> String {
    match v {
        PointValue::Binary { value, flags, time } => match time {
            Some(t) => format!("{value}@{}/0x{:02X}", t.0, flags.0),
            None => format!("{value}/0x{:02X}", flags.0),
        },
        PointValue::AnalogInt { value, flags, time } => match time {
            Some(t) => format!("{value}@{}/0x{:02X}", t.0, flags.0),
            None => format!("{value}/0x{:02X}", flags.0),
        },
        PointValue::AnalogFloat { value, flags, time } => match time {
            Some(t) => format!("{value}@{}/0x{:02X}", t.0, flags.0),
            None => format!("{value}/0x{:02X}", flags.0),
        },
        PointValue::Counter { value, flags } => format!("{value}/0x{:02X}", flags.0),
        PointValue::Crob(c) => format!("{}x{} {}", c.code.name(), c.count, c.status),
        PointValue::AnalogCommand { value, status } => format!("{value} {status}"),
        PointValue::Time(t) => format!("t={}", t.0),
    }
}

pub fn render_block(block: &ObjectBlock) -> String {
    let mut s = format!("{} q=0x{:02X}", block.variation, block.qualifier.to_u8());
    match &block.body {
        ObjectBody::All => {}
        ObjectBody::Range { start, stop } => {
            let _ = write!(s, " [{start}..{stop}]");
        }
        ObjectBody::Indices(idx) => {
            let _ = write!(s, " idx={idx:?}");
        }
        _ => {
            let values = block.values();
            if let ObjectBody::RangedValues { start, .. } = &block.body {
                let _ = write!(s, " [{start}..{}]", *start as usize + values.len() - 1);
            }
            for (i, v) in values.iter().take(MAX_RENDERED_VALUES) {
                let _ = write!(s, " {i}={}", render_value(v));
            }
            if values.len() > MAX_RENDERED_VALUES {
                let _ = write!(s, " ...(+{})", values.len() - MAX_RENDERED_VALUES);
            }
        }
    }
    s
}

pub fn render_fragment(frag: &AppFragment) -> String {
    let c = frag.control;
    let mut s = format!("{} seq={}", frag.function, c.seq);
    for (set, name) in [(c.fir, "fir"), (c.fin, "fin"), (c.con, "con"), (c.uns, "uns")] {
        if set {
            let _ = write!(s, " {name}");
        }
    }
    if let Some(iin) = frag.iin {
        let _ = write!(s, " iin={iin}");
    }
    for block in &frag.objects {
        let _ = write!(s, " ; {}", render_block(block));
    }
    s
}

/// Renders frames one line each, reassembling transport segments per address pair.
#[derive(Debug, Default)]
pub struct FrameDumper {
    reassembly: HashMap<(u16, u16), Reassembler>,
}

impl FrameDumper {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn line(&mut self, frame: &LinkFrame) -> String {
        let c = frame.control;
        let mut s = format!(
            "{} {}->{} {}",
            if c.dir { "M>O" } else { "O>M" },
            frame.source,
            frame.destination,
            c.function_name()
        );
        let is_data = c.prm
            && matches!(c.function, func::UNCONFIRMED_USER_DATA | func::CONFIRMED_USER_DATA);
        if !is_data {
            return s;
        }
        let seg = match TransportSegment::decode(&frame.user_data) {
            Ok(seg) => seg,
            Err(e) => {
                let _ = write!(s, " | transport error: {e}");
                return s;
            }
        };
        let r = self
            .reassembly
            .entry((frame.source, frame.destination))
            .or_default();
        match r.push(&seg) {
            Ok(Some(app)) => match decode_app_fragment(&app) {
                Ok(frag) => {
                    let _ = write!(s, " | {}", render_fragment(&frag));
                }
                Err(e) => {
                    let _ = write!(s, " | app error: {e}");
                }
            },
            Ok(None) => {
                let _ = write!(
                    s,
                    " | segment seq={} fir={} fin={} len={}",
                    seg.sequence,
                    seg.fir as u8,
                    seg.fin as u8,
                    seg.payload.len()
                );
            }
            Err(e) => {
                let _ = write!(s, " | transport error: {e}");
            }
        }
        s
    }
}
