//! Parameterized event noise: spatial shift, event loss, polarity reversal.
//!
//! Every transform is a pure function of `(stream, spec)`. Draws come from a
//! [`CounterRng`] keyed by `spec.seed` and indexed by event position, so the
//! `i`-th event always sees the same random numbers regardless of how the
//! stream is processed.
//!
//! | kind       | parameter                          | per-event draw                 |
//! |------------|------------------------------------|--------------------------------|
//! | shift_*    | δ = round(level · dimension)       | Δ uniform on {−δ, …, +δ}       |
//! | loss       | η = level                          | keep iff r > η, r ∈ (0, 1]     |
//! | polarity   | ρ = level                          | flip iff r ≤ ρ, r ∈ (0, 1]     |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{Event, EventStream};
use crate::rng::{derive_seed, CounterRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// No corruption; the reference cell of a sweep.
    Clean,
    ShiftX,
    ShiftY,
    ShiftXy,
    Loss,
    Polarity,
}

impl NoiseKind {
    pub const DEFAULT_GRID: [NoiseKind; 4] = [
        NoiseKind::ShiftX,
        NoiseKind::ShiftY,
        NoiseKind::Loss,
        NoiseKind::Polarity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::Clean => "clean",
            NoiseKind::ShiftX => "shift_x",
            NoiseKind::ShiftY => "shift_y",
            NoiseKind::ShiftXy => "shift_xy",
            NoiseKind::Loss => "loss",
            NoiseKind::Polarity => "polarity",
        }
    }

    pub fn is_shift(self) -> bool {
        matches!(self, NoiseKind::ShiftX | NoiseKind::ShiftY | NoiseKind::ShiftXy)
    }

    fn axes(self) -> (bool, bool) {
        match self {
            NoiseKind::ShiftX => (true, false),
            NoiseKind::ShiftY => (false, true),
            NoiseKind::ShiftXy => (true, true),
            _ => (false, false),
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "clean" => NoiseKind::Clean,
            "shift_x" => NoiseKind::ShiftX,
            "shift_y" => NoiseKind::ShiftY,
            "shift_xy" => NoiseKind::ShiftXy,
            "loss" => NoiseKind::Loss,
            "polarity" => NoiseKind::Polarity,
            other => return Err(Error::Config(format!("unknown noise kind {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftScope {
    /// Fresh offsets for every event.
    #[default]
    PerEvent,
    /// One offset pair for the whole stream (calibration-error reading).
    PerStream,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OobPolicy {
    #[default]
    Drop,
    Clamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub level: f64,
    pub seed: u64,
    #[serde(default)]
    pub shift_scope: ShiftScope,
    #[serde(default)]
    pub oob_policy: OobPolicy,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, level: f64, seed: u64) -> Self {
        Self {
            kind,
            level,
            seed,
            shift_scope: ShiftScope::default(),
            oob_policy: OobPolicy::default(),
        }
    }

    pub fn clean(seed: u64) -> Self {
        Self::new(NoiseKind::Clean, 0.0, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.level) {
            return Err(Error::Config(format!(
                "noise level must be in [0, 1], got {}",
                self.level
            )));
        }
        Ok(())
    }

    /// Same spec with a different seed (used to give each sample its own draws).
    pub fn reseeded(&self, seed: u64) -> Self {
        Self { seed, ..*self }
    }

    /// Maximum shift in pixels along x and y for this spec and geometry.
    pub fn max_shift(&self, width: u16, height: u16) -> (i64, i64) {
        let (ax, ay) = self.kind.axes();
        let d = |on: bool, dim: u16| if on { (self.level * dim as f64).round() as i64 } else { 0 };
        (d(ax, width), d(ay, height))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShiftedResult {
    pub stream: EventStream,
    pub dropped_count: usize,
}

/// Uniform offset on {−δ, …, +δ}.
fn offset(rng: &CounterRng, counter: u64, delta: i64) -> i64 {
    if delta == 0 {
        0
    } else {
        rng.below_at(counter, 2 * delta as u64 + 1) as i64 - delta
    }
}

/// Spatial shift `x' = x + Δx, y' = y + Δy`.
///
/// Event `i` uses counters `2i` (x) and `2i + 1` (y); with
/// [`ShiftScope::PerStream`] every event uses counters 0 and 1. Non-shift
/// kinds have no active axis and return the input unchanged.
pub fn apply_shift(stream: &EventStream, spec: &NoiseSpec) -> ShiftedResult {
    let g = stream.geometry();
    let (dx, dy) = spec.max_shift(g.width, g.height);
    if dx == 0 && dy == 0 {
        return ShiftedResult {
            stream: stream.clone(),
            dropped_count: 0,
        };
    }
    let rng = CounterRng::new(spec.seed);
    let mut out = Vec::with_capacity(stream.len());
    let mut dropped = 0;
    for (i, e) in stream.events().iter().enumerate() {
        let base = match spec.shift_scope {
            ShiftScope::PerEvent => 2 * i as u64,
            ShiftScope::PerStream => 0,
        };
        let x = e.x as i64 + offset(&rng, base, dx);
        let y = e.y as i64 + offset(&rng, base + 1, dy);
        let (x, y) = if g.contains(x, y) {
            (x, y)
        } else {
            match spec.oob_policy {
                OobPolicy::Drop => {
                    dropped += 1;
                    continue;
                }
                OobPolicy::Clamp => (
                    x.clamp(0, g.width as i64 - 1),
                    y.clamp(0, g.height as i64 - 1),
                ),
            }
        };
        out.push(Event {
            x: x as u16,
            y: y as u16,
            ..*e
        });
    }
    ShiftedResult {
        stream: EventStream::from_valid(g, out, stream.label()),
        dropped_count: dropped,
    }
}

/// Event loss: event `i` survives iff `r_i > η` with `r_i = unit_at(i)`.
pub fn apply_loss(stream: &EventStream, spec: &NoiseSpec) -> EventStream {
    let eta = spec.level;
    let rng = CounterRng::new(spec.seed);
    let kept: Vec<Event> = stream
        .events()
        .iter()
        .enumerate()
        .filter(|(i, _)| rng.unit_at(*i as u64) > eta)
        .map(|(_, e)| *e)
        .collect();
    EventStream::from_valid(stream.geometry(), kept, stream.label())
}

/// Polarity reversal: `p' = −p` iff `r_i ≤ ρ`.
pub fn apply_polarity(stream: &EventStream, spec: &NoiseSpec) -> EventStream {
    let rho = spec.level;
    let rng = CounterRng::new(spec.seed);
    let events: Vec<Event> = stream
        .events()
        .iter()
        .enumerate()
        .map(|(i, e)| {
            if rng.unit_at(i as u64) <= rho {
                Event { p: e.p.flipped(), ..*e }
            } else {
                *e
            }
        })
        .collect();
    EventStream::from_valid(stream.geometry(), events, stream.label())
}

/// Dispatches on `spec.kind`. Returns the noised stream and the number of
/// events removed (by loss or by out-of-bounds shifting).
pub fn apply(stream: &EventStream, spec: &NoiseSpec) -> Result<(EventStream, usize)> {
    spec.validate()?;
    Ok(match spec.kind {
        NoiseKind::Clean => (stream.clone(), 0),
        NoiseKind::ShiftX | NoiseKind::ShiftY | NoiseKind::ShiftXy => {
            let r = apply_shift(stream, spec);
            (r.stream, r.dropped_count)
        }
        NoiseKind::Loss => {
            let s = apply_loss(stream, spec);
            let removed = stream.len() - s.len();
            (s, removed)
        }
        NoiseKind::Polarity => (apply_polarity(stream, spec), 0),
    })
}

/// Default sweep levels: 5 % to 20 % in 5 % steps.
pub const DEFAULT_LEVELS: [f64; 4] = [0.05, 0.10, 0.15, 0.20];

/// One clean spec followed by `kinds × levels` in the given order.
///
/// Cell `j` (clean is cell 0) gets seed `derive_seed(base_seed, j)`.
pub fn sweep_grid(kinds: &[NoiseKind], levels: &[f64], base_seed: u64) -> Result<Vec<NoiseSpec>> {
    if levels.is_empty() {
        return Err(Error::Config("sweep needs at least one level".into()));
    }
    let mut grid = vec![NoiseSpec::clean(derive_seed(base_seed, 0))];
    for &kind in kinds {
        for &level in levels {
            let spec = NoiseSpec::new(kind, level, derive_seed(base_seed, grid.len() as u64));
            spec.validate()?;
            grid.push(spec);
        }
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{Polarity, SensorGeometry};

    fn stream(n: usize) -> EventStream {
        let g = SensorGeometry::GEN1;
        let rng = CounterRng::new(1234);
        let events = (0..n)
            .map(|i| {
                let x = rng.below_at(3 * i as u64, 304) as u16;
                let y = rng.below_at(3 * i as u64 + 1, 240) as u16;
                let p = if rng.at(3 * i as u64 + 2) & 1 == 0 {
                    Polarity::Neg
                } else {
                    Polarity::Pos
                };
                Event::new(x, y, i as i64 * 3, p)
            })
            .collect();
        EventStream::new(g, events, Some(1)).unwrap()
    }

    #[test]
    fn zero_shift_is_identity() {
        let s = stream(500);
        let r = apply_shift(&s, &NoiseSpec::new(NoiseKind::ShiftXy, 0.0, 5));
        assert_eq!(r.stream, s);
        assert_eq!(r.dropped_count, 0);
    }

    #[test]
    fn five_percent_shift_bounds() {
        let spec = NoiseSpec::new(NoiseKind::ShiftXy, 0.05, 8);
        assert_eq!(spec.max_shift(304, 240), (15, 12));
        // Clamp keeps indices aligned with the input so per-event offsets can be checked.
        let spec = NoiseSpec {
            oob_policy: OobPolicy::Clamp,
            ..spec
        };
        let s = stream(5000);
        let r = apply_shift(&s, &spec);
        assert_eq!(r.stream.len(), s.len());
        let mut max_dx = 0;
        for (a, b) in s.events().iter().zip(r.stream.events()) {
            let dx = (a.x as i64 - b.x as i64).abs();
            let dy = (a.y as i64 - b.y as i64).abs();
            assert!(dx <= 15 && dy <= 12);
            max_dx = max_dx.max(dx);
        }
        assert_eq!(max_dx, 15);
    }

    #[test]
    fn drop_at_border() {
        // Find a seed whose first x draw is -1 with delta 1 (level 1/304 rounds to 1).
        let g = SensorGeometry::GEN1;
        let s = EventStream::new(g, vec![Event::new(0, 10, 0, Polarity::Pos)], None).unwrap();
        let level = 1.0 / 304.0;
        let seed = (0..1000u64)
            .find(|&seed| offset(&CounterRng::new(seed), 0, 1) == -1)
            .unwrap();
        let r = apply_shift(&s, &NoiseSpec::new(NoiseKind::ShiftX, level, seed));
        assert!(r.stream.is_empty());
        assert_eq!(r.dropped_count, 1);
        let clamped = apply_shift(
            &s,
            &NoiseSpec {
                oob_policy: OobPolicy::Clamp,
                ..NoiseSpec::new(NoiseKind::ShiftX, level, seed)
            },
        );
        assert_eq!(clamped.stream.events()[0].x, 0);
        assert_eq!(clamped.dropped_count, 0);
    }

    #[test]
    fn per_stream_offset_is_shared() {
        let s = stream(300);
        let spec = NoiseSpec {
            shift_scope: ShiftScope::PerStream,
            oob_policy: OobPolicy::Clamp,
            ..NoiseSpec::new(NoiseKind::ShiftY, 0.02, 77)
        };
        let r = apply_shift(&s, &spec);
        let (_, d) = spec.max_shift(304, 240);
        let want = offset(&CounterRng::new(77), 1, d);
        for (a, b) in s.events().iter().zip(r.stream.events()) {
            assert_eq!(b.y as i64, (a.y as i64 + want).clamp(0, 239));
            assert_eq!(a.x, b.x);
        }
    }

    #[test]
    fn shift_offsets_cover_range() {
        let rng = CounterRng::new(4);
        let mut seen = [false; 7];
        for i in 0..2000 {
            seen[(offset(&rng, i, 3) + 3) as usize] = true;
        }
        assert!(seen.iter().all(|&b| b));
    }

    #[test]
    fn loss_extremes() {
        let s = stream(1000);
        assert_eq!(apply_loss(&s, &NoiseSpec::new(NoiseKind::Loss, 0.0, 1)), s);
        assert!(apply_loss(&s, &NoiseSpec::new(NoiseKind::Loss, 1.0, 1)).is_empty());
    }

    #[test]
    fn loss_binomial_bound() {
        let s = stream(10_000);
        let kept = apply_loss(&s, &NoiseSpec::new(NoiseKind::Loss, 0.25, 42)).len();
        assert!((7370..=7630).contains(&kept), "kept {kept}");
    }

    #[test]
    fn polarity_extremes_and_bound() {
        let s = stream(10_000);
        assert_eq!(apply_polarity(&s, &NoiseSpec::new(NoiseKind::Polarity, 0.0, 3)), s);
        let all = apply_polarity(&s, &NoiseSpec::new(NoiseKind::Polarity, 1.0, 3));
        assert!(s.events().iter().zip(all.events()).all(|(a, b)| a.p == b.p.flipped()));
        let half = apply_polarity(&s, &NoiseSpec::new(NoiseKind::Polarity, 0.5, 3));
        let flipped = s
            .events()
            .iter()
            .zip(half.events())
            .filter(|(a, b)| a.p != b.p)
            .count();
        assert!((4850..=5150).contains(&flipped), "flipped {flipped}");
    }

    #[test]
    fn grids() {
        let g = sweep_grid(&[NoiseKind::Loss], &[0.05, 0.10, 0.20], 0).unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!(g[0].kind, NoiseKind::Clean);
        assert_eq!(sweep_grid(&NoiseKind::DEFAULT_GRID, &DEFAULT_LEVELS, 0).unwrap().len(), 17);
        assert_eq!(sweep_grid(&[], &DEFAULT_LEVELS, 0).unwrap().len(), 1);
        assert!(sweep_grid(&[NoiseKind::Loss], &[], 0).is_err());
        assert!(sweep_grid(&[NoiseKind::Loss], &[1.5], 0).is_err());
        let seeds: std::collections::HashSet<u64> =
            sweep_grid(&NoiseKind::DEFAULT_GRID, &DEFAULT_LEVELS, 9).unwrap().iter().map(|s| s.seed).collect();
        assert_eq!(seeds.len(), 17);
    }

    #[test]
    fn dispatch_and_validation() {
        let s = stream(100);
        assert!(apply(&s, &NoiseSpec::new(NoiseKind::Loss, -0.1, 0)).is_err());
        let (out, removed) = apply(&s, &NoiseSpec::new(NoiseKind::Loss, 0.5, 0)).unwrap();
        assert_eq!(out.len() + removed, 100);
        assert_eq!(apply(&s, &NoiseSpec::clean(0)).unwrap().0, s);
        assert_eq!(out.label(), Some(1));
    }

    #[test]
    fn kind_names_roundtrip() {
        for k in [
            NoiseKind::Clean,
            NoiseKind::ShiftX,
            NoiseKind::ShiftY,
            NoiseKind::ShiftXy,
            NoiseKind::Loss,
            NoiseKind::Polarity,
        ] {
            assert_eq!(k.name().parse::<NoiseKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.name()));
        }
    }
}
