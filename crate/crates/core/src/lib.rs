//! Event-camera robustness benchmarking toolkit.
//!
//! The pipeline mirrors a standard robustness study: event streams are read
//! (or synthesized), corrupted by parameterized noise, converted to Event
//! Spike Tensors, classified by a small trained head, and scored with the
//! usual classification metrics. [`bench`] wires the stages into sweeps.

pub mod bench;
pub mod error;
pub mod est;
pub mod event;
pub mod io;
pub mod metrics;
pub mod nn;
pub mod noise;
pub mod rng;
pub mod synth;
pub mod trainer;

pub use error::{Error, ErrorClass, Result};
pub use event::{Event, EventStream, Polarity, SensorGeometry};
