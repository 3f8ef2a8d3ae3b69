//! Deterministic synthetic event streams standing in for car / pedestrian
//! recordings.
//!
//! A shape moves across the sensor with constant velocity and bounces off
//! the borders (the centre follows a triangle wave inside the admissible
//! range). Events are sampled on the shape's edges: the edge facing the
//! direction of motion emits +1, the opposite edge −1.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{Event, EventStream, Polarity, SensorGeometry};
use crate::io::{write_evs1, DatasetManifest, Sample, Split};
use crate::rng::{derive_seed, CounterRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    /// Segment of length `extent` perpendicular to the motion.
    Bar,
    /// Circle of diameter `extent`.
    Blob,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Motion {
    /// Pixels per millisecond.
    pub vx: f64,
    pub vy: f64,
    pub shape: Shape,
    pub extent: u16,
    /// Shape centre at t = 0.
    pub x0: f64,
    pub y0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub geometry: SensorGeometry,
    pub class_id: usize,
    pub n_events: usize,
    /// Microseconds.
    pub duration: i64,
    pub motion: Motion,
    /// Gaussian pixel jitter (standard deviation).
    pub jitter: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let g = self.geometry;
        if g.width == 0 || g.height == 0 {
            return Err(Error::Config("synth geometry must be non-empty".into()));
        }
        if self.n_events == 0 || self.duration < 1 {
            return Err(Error::Config("synth needs n_events >= 1 and duration >= 1".into()));
        }
        if self.motion.extent >= g.width.min(g.height) {
            return Err(Error::Config(format!(
                "extent {} must be smaller than min(width, height) = {}",
                self.motion.extent,
                g.width.min(g.height)
            )));
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(Error::Config("jitter must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// Edge thickness of a bar (distance between leading and trailing edge).
    pub fn bar_thickness(&self) -> f64 {
        (self.motion.extent as f64 / 4.0).max(2.0)
    }

    /// Centre of the shape at time `t` (µs).
    pub fn center_at(&self, t: i64) -> (f64, f64) {
        let m = &self.motion;
        let ms = t as f64 / 1000.0;
        let margin = m.extent as f64 / 2.0;
        let g = self.geometry;
        (
            reflect(m.x0 + m.vx * ms, margin, g.width as f64 - 1.0 - margin),
            reflect(m.y0 + m.vy * ms, margin, g.height as f64 - 1.0 - margin),
        )
    }

    /// Direction of travel at time `t` (unit vector; +x when static).
    pub fn direction_at(&self, t: i64) -> (f64, f64) {
        let m = &self.motion;
        let speed = m.vx.hypot(m.vy);
        if speed == 0.0 {
            return (1.0, 0.0);
        }
        // Finite difference of the reflected trajectory picks up bounces.
        let (a, b) = (self.center_at(t), self.center_at(t + 1));
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let n = dx.hypot(dy);
        if n < 1e-12 {
            (m.vx / speed, m.vy / speed)
        } else {
            (dx / n, dy / n)
        }
    }
}

fn reflect(p: f64, lo: f64, hi: f64) -> f64 {
    let span = hi - lo;
    if span <= 0.0 {
        return (lo + hi) / 2.0;
    }
    let q = (p - lo).rem_euclid(2.0 * span);
    lo + if q > span { 2.0 * span - q } else { q }
}

/// Samples `spec.n_events` events, sorted by time (ties keep sampling order).
pub fn generate(spec: &SynthSpec) -> Result<EventStream> {
    spec.validate()?;
    let g = spec.geometry;
    let mut rng = CounterRng::new(spec.seed);
    let half = spec.motion.extent as f64 / 2.0;
    let mut events = Vec::with_capacity(spec.n_events);
    for _ in 0..spec.n_events {
        let t = rng.next_below(spec.duration as u64 + 1) as i64;
        let (cx, cy) = spec.center_at(t);
        let (dx, dy) = spec.direction_at(t);
        let (px, py, p) = match spec.motion.shape {
            Shape::Bar => {
                let along = rng.next_range(-half, half);
                let leading = rng.next_u64() & 1 == 1;
                let off = spec.bar_thickness() / 2.0 * if leading { 1.0 } else { -1.0 };
                // perpendicular = (-dy, dx)
                (
                    cx + off * dx - along * dy,
                    cy + off * dy + along * dx,
                    if leading { Polarity::Pos } else { Polarity::Neg },
                )
            }
            Shape::Blob => {
                let theta = rng.next_range(0.0, std::f64::consts::TAU);
                let (nx, ny) = (theta.cos(), theta.sin());
                let p = if nx * dx + ny * dy > 0.0 {
                    Polarity::Pos
                } else {
                    Polarity::Neg
                };
                (cx + half * nx, cy + half * ny, p)
            }
        };
        let (jx, jy) = if spec.jitter > 0.0 {
            (spec.jitter * rng.next_gaussian(), spec.jitter * rng.next_gaussian())
        } else {
            (0.0, 0.0)
        };
        let x = (px + jx).round().clamp(0.0, g.width as f64 - 1.0) as u16;
        let y = (py + jy).round().clamp(0.0, g.height as f64 - 1.0) as u16;
        events.push(Event { x, y, t, p });
    }
    events.sort_by_key(|e| e.t);
    EventStream::new(g, events, Some(spec.class_id)).map_err(Error::Invalid)
}

/// Named per-class template for dataset generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassTemplate {
    pub name: String,
    pub spec: SynthSpec,
}

/// Two-class defaults on the GEN1 geometry: a horizontally travelling bar
/// ("car") and a vertically bouncing blob ("pedestrian").
pub fn default_templates(geometry: SensorGeometry, n_events: usize) -> Vec<ClassTemplate> {
    let (w, h) = (geometry.width as f64, geometry.height as f64);
    let extent = ((geometry.width.min(geometry.height) as f64) / 4.0).round().max(2.0) as u16;
    let extent = extent.min(geometry.width.min(geometry.height).saturating_sub(1));
    let duration = 100_000;
    vec![
        ClassTemplate {
            name: "car".into(),
            spec: SynthSpec {
                geometry,
                class_id: 0,
                n_events,
                duration,
                motion: Motion {
                    vx: w / 250.0,
                    vy: 0.0,
                    shape: Shape::Bar,
                    extent,
                    x0: w * 0.3,
                    y0: h * 0.5,
                },
                jitter: 1.5,
                seed: 0,
            },
        },
        ClassTemplate {
            name: "pedestrian".into(),
            spec: SynthSpec {
                geometry,
                class_id: 1,
                n_events,
                duration,
                motion: Motion {
                    vx: 0.0,
                    vy: h / 40.0,
                    shape: Shape::Blob,
                    extent,
                    x0: w * 0.5,
                    y0: h * 0.5,
                },
                jitter: 1.5,
                seed: 0,
            },
        },
    ]
}

/// Per-sample variation of a template: speed scaled by U(0.75, 1.25) and the
/// start position moved by up to ±10 % of each dimension. All draws come from
/// `sample_seed`, which also becomes its own seed.
pub fn vary(template: &SynthSpec, sample_seed: u64) -> SynthSpec {
    let mut rng = CounterRng::new(derive_seed(sample_seed, 0x5EED));
    let mut spec = *template;
    let speed = rng.next_range(0.75, 1.25);
    spec.motion.vx *= speed;
    spec.motion.vy *= speed;
    spec.motion.x0 += rng.next_range(-0.1, 0.1) * spec.geometry.width as f64;
    spec.motion.y0 += rng.next_range(-0.1, 0.1) * spec.geometry.height as f64;
    spec.seed = sample_seed;
    spec
}

/// One generated sample before it is written anywhere.
#[derive(Debug, Clone)]
pub struct SynthSample {
    pub id: String,
    pub file_name: String,
    pub label: usize,
    pub stream: EventStream,
}

/// Generates `per_class` samples per template. Sample `j` (counting across
/// classes, class-major) uses seed `derive_seed(seed, j)`.
pub fn generate_samples(per_class: usize, templates: &[ClassTemplate], seed: u64) -> Result<Vec<SynthSample>> {
    if per_class == 0 {
        return Err(Error::Config("per_class must be at least 1".into()));
    }
    if templates.is_empty() {
        return Err(Error::Config("no class templates".into()));
    }
    let mut out = Vec::with_capacity(per_class * templates.len());
    for (class, tpl) in templates.iter().enumerate() {
        let mut spec = tpl.spec;
        spec.class_id = class;
        for i in 0..per_class {
            let j = (class * per_class + i) as u64;
            let stream = generate(&vary(&spec, derive_seed(seed, j)))?;
            let id = format!("{}_{i:04}", tpl.name);
            out.push(SynthSample {
                file_name: format!("{id}.evs1"),
                id,
                label: class,
                stream,
            });
        }
    }
    Ok(out)
}

pub fn manifest_for(samples: &[SynthSample], templates: &[ClassTemplate]) -> DatasetManifest {
    DatasetManifest {
        samples: samples
            .iter()
            .map(|s| Sample {
                id: s.id.clone(),
                path: s.file_name.clone().into(),
                label: s.label,
                split: Split::Train,
                fold: None,
            })
            .collect(),
        classes: templates.iter().map(|t| t.name.clone()).collect(),
        geometry: templates[0].spec.geometry,
    }
}

/// Writes one EVS1 file per sample plus `manifest.json` into `out_dir`.
pub fn generate_dataset(
    per_class: usize,
    templates: &[ClassTemplate],
    out_dir: &Path,
    seed: u64,
) -> Result<DatasetManifest> {
    let samples = generate_samples(per_class, templates, seed)?;
    std::fs::create_dir_all(out_dir)?;
    for s in &samples {
        let file = std::fs::File::create(out_dir.join(&s.file_name))?;
        let mut w = std::io::BufWriter::new(file);
        write_evs1(&s.stream, &mut w)?;
        std::io::Write::flush(&mut w)?;
    }
    let manifest = manifest_for(&samples, templates);
    manifest.save(&out_dir.join("manifest.json"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bar_spec() -> SynthSpec {
        SynthSpec {
            geometry: SensorGeometry::GEN1,
            class_id: 0,
            n_events: 500,
            duration: 100_000,
            motion: Motion {
                vx: 0.2,
                vy: 0.0,
                shape: Shape::Bar,
                extent: 40,
                x0: 100.0,
                y0: 120.0,
            },
            jitter: 0.0,
            seed: 17,
        }
    }

    #[test]
    fn deterministic_and_exact_count() {
        let a = generate(&bar_spec()).unwrap();
        let b = generate(&bar_spec()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 500);
        assert!(a.validate().is_ok());
        assert_eq!(a.label(), Some(0));
    }

    #[test]
    fn bar_follows_analytic_trajectory() {
        let s = generate(&bar_spec()).unwrap();
        for e in s.events() {
            // Independent recomputation: x(t) = x0 + vx * t[ms]; travel stays inside the sensor.
            let x_t = 100.0 + 0.2 * e.t as f64 / 1000.0;
            assert!((e.x as f64 - x_t).abs() <= 40.0, "x={} at t={} vs {x_t}", e.x, e.t);
            assert!((e.y as f64 - 120.0).abs() <= 20.5);
        }
    }

    #[test]
    fn leading_edge_positive() {
        let s = generate(&bar_spec()).unwrap();
        for e in s.events() {
            let x_t = 100.0 + 0.2 * e.t as f64 / 1000.0;
            match e.p {
                Polarity::Pos => assert!(e.x as f64 >= x_t - 0.5),
                Polarity::Neg => assert!(e.x as f64 <= x_t + 0.5),
            }
        }
    }

    #[test]
    fn reflection_keeps_center_inside() {
        for p in [-500.0, -1.0, 0.0, 50.0, 199.0, 1234.5] {
            let r = reflect(p, 10.0, 100.0);
            assert!((10.0..=100.0).contains(&r));
        }
        assert_eq!(reflect(105.0, 10.0, 100.0), 95.0);
        assert_eq!(reflect(5.0, 10.0, 100.0), 15.0);
    }

    #[test]
    fn spec_validation() {
        let mut s = bar_spec();
        s.motion.extent = 240;
        assert!(generate(&s).is_err());
        let mut s = bar_spec();
        s.n_events = 0;
        assert!(generate(&s).is_err());
    }

    #[test]
    fn blob_streams_valid() {
        for t in default_templates(SensorGeometry::GEN1, 300) {
            let s = generate(&vary(&t.spec, 9)).unwrap();
            assert_eq!(s.len(), 300);
            assert!(s.validate().is_ok());
        }
    }

    #[test]
    fn dataset_manifest_balanced() {
        let dir = tempfile::tempdir().unwrap();
        let tpl = default_templates(SensorGeometry::new(64, 48).unwrap(), 50);
        let m = generate_dataset(10, &tpl, dir.path(), 3).unwrap();
        assert_eq!(m.samples.len(), 20);
        assert_eq!(m.class_counts(), vec![10, 10]);
        let loaded = DatasetManifest::load(&dir.path().join("manifest.json")).unwrap();
        assert_eq!(loaded, m);
        let first = std::fs::read(dir.path().join(&m.samples[0].path)).unwrap();
        let again = tempfile::tempdir().unwrap();
        generate_dataset(10, &tpl, again.path(), 3).unwrap();
        assert_eq!(std::fs::read(again.path().join(&m.samples[0].path)).unwrap(), first);
    }
}
