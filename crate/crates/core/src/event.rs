//! Event and stream types shared by every other module.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Sign of a brightness change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    Neg,
    Pos,
}

impl Polarity {
    pub fn value(self) -> i8 {
        match self {
            Polarity::Neg => -1,
            Polarity::Pos => 1,
        }
    }

    /// Strict decoding: only -1 and +1.
    pub fn from_signed(v: i64) -> Option<Self> {
        match v {
            -1 => Some(Polarity::Neg),
            1 => Some(Polarity::Pos),
            _ => None,
        }
    }

    /// Lenient decoding used at text boundaries: {0, 1} is accepted with 0 -> -1.
    pub fn from_lenient(v: i64) -> Option<Self> {
        match v {
            0 | -1 => Some(Polarity::Neg),
            1 => Some(Polarity::Pos),
            _ => None,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Polarity::Neg => Polarity::Pos,
            Polarity::Pos => Polarity::Neg,
        }
    }

    /// Channel block in an EST: 0 for -1, 1 for +1.
    pub fn block(self) -> usize {
        match self {
            Polarity::Neg => 0,
            Polarity::Pos => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    pub x: u16,
    pub y: u16,
    /// Microseconds.
    pub t: i64,
    pub p: Polarity,
}

impl Event {
    pub fn new(x: u16, y: u16, t: i64, p: Polarity) -> Self {
        Self { x, y, t, p }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SensorGeometry {
    pub width: u16,
    pub height: u16,
}

impl SensorGeometry {
    /// GEN1 / ATIS sensor resolution.
    pub const GEN1: SensorGeometry = SensorGeometry {
        width: 304,
        height: 240,
    };

    pub fn new(width: u16, height: u16) -> Option<Self> {
        (width >= 1 && height >= 1).then_some(Self { width, height })
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && x < self.width as i64 && y < self.height as i64
    }

    pub fn pixels(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationReason {
    EmptyGeometry,
    OutOfBounds,
    NegativeTimestamp,
    TimestampOrder,
}

impl fmt::Display for ViolationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViolationReason::EmptyGeometry => "empty geometry",
            ViolationReason::OutOfBounds => "out of bounds",
            ViolationReason::NegativeTimestamp => "negative timestamp",
            ViolationReason::TimestampOrder => "timestamp order",
        })
    }
}

/// First invariant violated by a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Violation {
    pub index: usize,
    pub reason: ViolationReason,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at event {}", self.reason, self.index)
    }
}

/// Checks geometry, bounds, non-negative timestamps and time order.
pub fn validate(geometry: SensorGeometry, events: &[Event]) -> Result<(), Violation> {
    if geometry.width == 0 || geometry.height == 0 {
        return Err(Violation {
            index: 0,
            reason: ViolationReason::EmptyGeometry,
        });
    }
    let mut prev = i64::MIN;
    for (index, e) in events.iter().enumerate() {
        let reason = if e.x >= geometry.width || e.y >= geometry.height {
            Some(ViolationReason::OutOfBounds)
        } else if e.t < 0 {
            Some(ViolationReason::NegativeTimestamp)
        } else if e.t < prev {
            Some(ViolationReason::TimestampOrder)
        } else {
            None
        };
        if let Some(reason) = reason {
            return Err(Violation { index, reason });
        }
        prev = e.t;
    }
    Ok(())
}

/// A time-ordered, bounds-checked sequence of events.
///
/// Immutable once built; transforms produce new streams.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    geometry: SensorGeometry,
    events: Vec<Event>,
    label: Option<usize>,
}

impl EventStream {
    pub fn new(
        geometry: SensorGeometry,
        events: Vec<Event>,
        label: Option<usize>,
    ) -> Result<Self, Violation> {
        validate(geometry, &events)?;
        Ok(Self {
            geometry,
            events,
            label,
        })
    }

    pub fn empty(geometry: SensorGeometry) -> Self {
        Self {
            geometry,
            events: Vec::new(),
            label: None,
        }
    }

    /// Caller guarantees the invariants (used by transforms that cannot break them).
    pub(crate) fn from_valid(
        geometry: SensorGeometry,
        events: Vec<Event>,
        label: Option<usize>,
    ) -> Self {
        debug_assert!(validate(geometry, &events).is_ok());
        Self {
            geometry,
            events,
            label,
        }
    }

    pub fn geometry(&self) -> SensorGeometry {
        self.geometry
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn label(&self) -> Option<usize> {
        self.label
    }

    pub fn with_label(mut self, label: Option<usize>) -> Self {
        self.label = label;
        self
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn validate(&self) -> Result<(), Violation> {
        validate(self.geometry, &self.events)
    }

    /// `t_last - t_first`, or 0 with fewer than two events.
    pub fn duration(&self) -> i64 {
        match (self.events.first(), self.events.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0,
        }
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }
}
