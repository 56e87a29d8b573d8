//! Event detection and the bounded per-class event buffers.

use std::collections::{HashMap, VecDeque};

use gridwire_core::points::PointType;
use gridwire_core::proto::Flags;

pub const DEFAULT_EVENT_CAPACITY: usize = 1024;

/// Dead-band tracking for one analog point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalogReportState {
    /// Latest engineering value.
    pub inst_mag: f64,
    /// Last value reported as an event.
    pub mag: f64,
    pub deadband: f64,
}

impl AnalogReportState {
    pub fn new(initial: f64, deadband: f64) -> Self {
        Self {
            inst_mag: initial,
            mag: initial,
            deadband,
        }
    }

    /// Records a new value. Returns it when it moved more than the deadband
    /// away from the last reported value, which then becomes `mag`.
    pub fn update(&mut self, value: f64) -> Option<f64> {
        self.inst_mag = value;
        if (self.inst_mag - self.mag).abs() > self.deadband {
            self.mag = self.inst_mag;
            Some(self.mag)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventValue {
    Binary(bool),
    Analog(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord {
    pub point_type: PointType,
    pub index: u16,
    pub value: EventValue,
    pub flags: Flags,
    /// ms since the Unix epoch.
    pub time: u64,
    pub class: u8,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoredEvent {
    pub seq: u64,
    pub record: EventRecord,
}

/// Identifies one reader (a connection) of an outstation's events.
pub type ReaderId = u64;

#[derive(Debug, Clone, Default)]
struct Cursor {
    /// Lowest unconfirmed sequence number per class.
    next: [u64; 3],
    overflow: bool,
}

/// Three bounded FIFOs (classes 1-3) shared by any number of readers, each with
/// its own confirm cursor. Full buffers discard their oldest event.
#[derive(Debug)]
pub struct EventStore {
    capacity: usize,
    classes: [VecDeque<StoredEvent>; 3],
    next_seq: u64,
    readers: HashMap<ReaderId, Cursor>,
    discarded: u64,
}

impl EventStore {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            classes: Default::default(),
            next_seq: 0,
            readers: HashMap::new(),
            discarded: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Total events dropped because a buffer was full.
    pub fn discarded(&self) -> u64 {
        self.discarded
    }

    pub fn len(&self, class: u8) -> usize {
        self.classes[slot(class)].len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.iter().all(|c| c.is_empty())
    }

    pub fn push(&mut self, record: EventRecord) {
        let c = slot(record.class);
        let seq = self.next_seq;
        self.next_seq += 1;
        let buf = &mut self.classes[c];
        if buf.len() == self.capacity {
            let lost = buf.pop_front().expect("full buffer");
            self.discarded += 1;
            for cur in self.readers.values_mut() {
                if lost.seq >= cur.next[c] {
                    cur.overflow = true;
                    cur.next[c] = lost.seq + 1;
                }
            }
        }
        buf.push_back(StoredEvent { seq, record });
    }

    /// Registers a reader positioned at the oldest retained event.
    pub fn attach(&mut self, reader: ReaderId) {
        let next = std::array::from_fn(|c| self.classes[c].front().map_or(self.next_seq, |e| e.seq));
        self.readers.entry(reader).or_insert(Cursor { next, overflow: false });
    }

    pub fn detach(&mut self, reader: ReaderId) {
        if self.readers.remove(&reader).is_some() {
            self.prune();
        }
    }

    pub fn is_attached(&self, reader: ReaderId) -> bool {
        self.readers.contains_key(&reader)
    }

    /// Unconfirmed events of `classes` for `reader`, oldest first.
    pub fn pending(&self, reader: ReaderId, classes: [bool; 3]) -> Vec<StoredEvent> {
        let Some(cur) = self.readers.get(&reader) else {
            return Vec::new();
        };
        let mut out: Vec<StoredEvent> = (0..3)
            .filter(|&c| classes[c])
            .flat_map(|c| self.classes[c].iter().filter(move |e| e.seq >= cur.next[c]).copied())
            .collect();
        out.sort_by_key(|e| e.seq);
        out
    }

    /// Which classes hold unconfirmed events for `reader`.
    pub fn pending_classes(&self, reader: ReaderId) -> [bool; 3] {
        let Some(cur) = self.readers.get(&reader) else {
            return [false; 3];
        };
        std::array::from_fn(|c| self.classes[c].back().is_some_and(|e| e.seq >= cur.next[c]))
    }

    pub fn overflow(&self, reader: ReaderId) -> bool {
        self.readers.get(&reader).is_some_and(|c| c.overflow)
    }

    /// Marks `events` confirmed by `reader` and drops events every reader has confirmed.
    /// Clears the reader's overflow flag once nothing remains pending.
    pub fn confirm(&mut self, reader: ReaderId, events: &[StoredEvent]) {
        let Some(cur) = self.readers.get_mut(&reader) else {
            return;
        };
        for e in events {
            let c = slot(e.record.class);
            cur.next[c] = cur.next[c].max(e.seq + 1);
        }
        if self.pending_classes(reader) == [false; 3] {
            if let Some(cur) = self.readers.get_mut(&reader) {
                cur.overflow = false;
            }
        }
        self.prune();
    }

    fn prune(&mut self) {
        if self.readers.is_empty() {
            return;
        }
        for c in 0..3 {
            let min = self.readers.values().map(|r| r.next[c]).min().unwrap_or(0);
            while self.classes[c].front().is_some_and(|e| e.seq < min) {
                self.classes[c].pop_front();
            }
        }
    }
}

fn slot(class: u8) -> usize {
    debug_assert!((1..=3).contains(&class));
    (class.clamp(1, 3) - 1) as usize
}
