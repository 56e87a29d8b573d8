//! Splits response objects into fragments no larger than the configured limit.

use gridwire_core::proto::{ObjectBlock, PointValue, Variation};

use crate::events::StoredEvent;

const RESPONSE_HEADER: usize = 4;
const OBJECT_HEADER: usize = 3;
const RANGE_FIELD: usize = 4;
const COUNT_FIELD: usize = 2;
const INDEX_PREFIX: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Unit {
    Static {
        variation: Variation,
        index: u16,
        value: PointValue,
    },
    Event {
        variation: Variation,
        index: u16,
        value: PointValue,
        event: StoredEvent,
    },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct Packet {
    pub objects: Vec<ObjectBlock>,
    pub events: Vec<StoredEvent>,
}

enum Open {
    Ranged { variation: Variation, start: u16, values: Vec<PointValue> },
    Indexed { variation: Variation, items: Vec<(u16, PointValue)> },
}

impl Open {
    fn close(self) -> ObjectBlock {
        match self {
            Open::Ranged { variation, start, values } => ObjectBlock::ranged(variation, start, values),
            Open::Indexed { variation, items } => ObjectBlock::indexed(variation, items),
        }
    }

    fn accepts(&self, unit: &Unit) -> bool {
        match (self, unit) {
            (Open::Ranged { variation, start, values }, Unit::Static { variation: v, index, .. }) => {
                v == variation && *index as usize == *start as usize + values.len()
            }
            (Open::Indexed { variation, .. }, Unit::Event { variation: v, .. }) => v == variation,
            _ => false,
        }
    }
}

struct Builder {
    max: usize,
    done: Vec<Packet>,
    current: Packet,
    open: Option<Open>,
    used: usize,
}

impl Builder {
    fn flush(&mut self) {
        if let Some(open) = self.open.take() {
            self.current.objects.push(open.close());
        }
        self.done.push(std::mem::take(&mut self.current));
        self.used = RESPONSE_HEADER;
    }

    fn push(&mut self, unit: Unit) {
        let (variation, size) = match unit {
            Unit::Static { variation, .. } | Unit::Event { variation, .. } => {
                (variation, variation.value_size().unwrap_or(0))
            }
        };
        let extend = self.open.as_ref().is_some_and(|o| o.accepts(&unit));
        let cost = match (extend, &unit) {
            (true, Unit::Static { .. }) => size,
            (true, Unit::Event { .. }) => INDEX_PREFIX + size,
            (false, Unit::Static { .. }) => OBJECT_HEADER + RANGE_FIELD + size,
            (false, Unit::Event { .. }) => OBJECT_HEADER + COUNT_FIELD + INDEX_PREFIX + size,
        };
        let has_content = !self.current.objects.is_empty() || self.open.is_some();
        if has_content && self.used + cost > self.max {
            self.flush();
            return self.push(unit);
        }
        self.used += cost;
        if !extend {
            if let Some(open) = self.open.take() {
                self.current.objects.push(open.close());
            }
            self.open = Some(match unit {
                Unit::Static { index, .. } => Open::Ranged {
                    variation,
                    start: index,
                    values: Vec::new(),
                },
                Unit::Event { .. } => Open::Indexed {
                    variation,
                    items: Vec::new(),
                },
            });
        }
        match (self.open.as_mut().expect("open block"), unit) {
            (Open::Ranged { values, .. }, Unit::Static { value, .. }) => values.push(value),
            (Open::Indexed { items, .. }, Unit::Event { index, value, event, .. }) => {
                items.push((index, value));
                self.current.events.push(event);
            }
            _ => unreachable!("block kind matches unit"),
        }
    }
}

/// Packs units in order. Always yields at least one (possibly empty) packet.
pub(crate) fn pack(units: impl IntoIterator<Item = Unit>, max_fragment: usize) -> Vec<Packet> {
    let mut b = Builder {
        max: max_fragment,
        done: Vec::new(),
        current: Packet::default(),
        open: None,
        used: RESPONSE_HEADER,
    };
    for u in units {
        b.push(u);
    }
    b.flush();
    b.done
}
