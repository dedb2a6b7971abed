use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Event variants in tiebreak order: at equal timestamps a lower rank is
/// processed first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventKind {
    PassengerArrival,
    BusArrivalAtStop,
    DisruptionOccurred,
    OverageDetected,
    SubstituteArrived,
    DayEnd,
}

impl EventKind {
    pub fn rank(self) -> u8 {
        self as u8
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::PassengerArrival => "PassengerArrival",
            EventKind::BusArrivalAtStop => "BusArrivalAtStop",
            EventKind::DisruptionOccurred => "DisruptionOccurred",
            EventKind::OverageDetected => "OverageDetected",
            EventKind::SubstituteArrived => "SubstituteArrived",
            EventKind::DayEnd => "DayEnd",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Payload {
    PassengerArrival {
        group: usize,
    },
    BusArrivalAtStop {
        bus: usize,
        visit: usize,
    },
    DisruptionOccurred {
        bus: usize,
        trip: usize,
        seq: usize,
    },
    OverageDetected {
        bus: usize,
        trip: usize,
        seq: usize,
        stranded: u32,
    },
    SubstituteArrived {
        sub: usize,
    },
    DayEnd,
}

impl Payload {
    pub(crate) fn kind(&self) -> EventKind {
        match self {
            Payload::PassengerArrival { .. } => EventKind::PassengerArrival,
            Payload::BusArrivalAtStop { .. } => EventKind::BusArrivalAtStop,
            Payload::DisruptionOccurred { .. } => EventKind::DisruptionOccurred,
            Payload::OverageDetected { .. } => EventKind::OverageDetected,
            Payload::SubstituteArrived { .. } => EventKind::SubstituteArrived,
            Payload::DayEnd => EventKind::DayEnd,
        }
    }

    fn entity(&self) -> usize {
        match *self {
            Payload::PassengerArrival { group } => group,
            Payload::BusArrivalAtStop { bus, .. }
            | Payload::DisruptionOccurred { bus, .. }
            | Payload::OverageDetected { bus, .. } => bus,
            Payload::SubstituteArrived { sub } => sub,
            Payload::DayEnd => 0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Event {
    pub t: f64,
    pub payload: Payload,
    /// Insertion counter; makes the order total even for identical keys.
    seq: u64,
}

impl Event {
    fn key(&self) -> (u8, usize, u64) {
        (self.payload.kind().rank(), self.payload.entity(), self.seq)
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed so the max-heap pops the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .t
            .total_cmp(&self.t)
            .then_with(|| other.key().cmp(&self.key()))
    }
}

#[derive(Debug, Default)]
pub(crate) struct EventQueue {
    heap: BinaryHeap<Event>,
    next_seq: u64,
    last_t: f64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self {
            heap: BinaryHeap::new(),
            next_seq: 0,
            last_t: f64::NEG_INFINITY,
        }
    }

    pub fn push(&mut self, t: f64, payload: Payload) {
        debug_assert!(
            t >= self.last_t,
            "event scheduled in the past: {t} < {}",
            self.last_t
        );
        self.heap.push(Event {
            t,
            payload,
            seq: self.next_seq,
        });
        self.next_seq += 1;
    }

    pub fn pop(&mut self) -> Option<Event> {
        let e = self.heap.pop()?;
        debug_assert!(e.t >= self.last_t);
        self.last_t = e.t;
        Some(e)
    }
}

/// One line of `trace.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: f64,
    pub kind: EventKind,
    pub entity: String,
    pub stop: Option<String>,
    pub detail: String,
}

/// `trace.jsonl` text: one record per line.
pub fn trace_to_jsonl(trace: &[TraceRecord]) -> String {
    let mut out = String::new();
    for r in trace {
        out.push_str(&serde_json::to_string(r).expect("trace serializes"));
        out.push('\n');
    }
    out
}

/// True when timestamps never decrease.
pub fn validate_trace(trace: &[TraceRecord]) -> bool {
    trace.windows(2).all(|w| w[0].t <= w[1].t)
}
