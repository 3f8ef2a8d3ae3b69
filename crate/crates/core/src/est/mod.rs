//! Event Spike Tensors and frame reconstruction.
//!
//! Channel layout is polarity-major: channels `0..B` hold the temporal bins
//! of negative events, channels `B..2B` those of positive events. Values are
//! indexed `[channel][y][x]`.

mod frames;
mod kernel;
mod pool;
mod resize;

pub use frames::{reconstruct_frames, FrameMode, FrameVideo};
pub use kernel::{trilinear_weights, KernelSpec, MlpKernel, MLP_KERNEL_LAYERS, TRILINEAR_QUANTUM};
pub use pool::{pool_features, PoolGrid, PooledEvents};
pub use resize::crop_resize;

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::event::EventStream;

/// Temporal bins used by default (nine per polarity, eighteen channels).
pub const DEFAULT_BINS: usize = 9;

#[derive(Debug, Clone, PartialEq)]
pub struct EstTensor {
    bins: usize,
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl EstTensor {
    pub fn zeros(bins: usize, height: usize, width: usize) -> Self {
        Self {
            bins,
            height,
            width,
            values: vec![0.0; 2 * bins * height * width],
        }
    }

    pub fn from_values(bins: usize, height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != 2 * bins * height * width {
            return Err(Error::Shape(format!(
                "{} values for shape (2*{bins}, {height}, {width})",
                values.len()
            )));
        }
        Ok(Self {
            bins,
            height,
            width,
            values,
        })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn channels(&self) -> usize {
        2 * self.bins
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels(), self.height, self.width)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn index(&self, channel: usize, y: usize, x: usize) -> usize {
        (channel * self.height + y) * self.width + x
    }

    pub fn get(&self, channel: usize, y: usize, x: usize) -> f64 {
        self.values[self.index(channel, y, x)]
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.values[c * n..(c + 1) * n]
    }

    pub fn channel_sums(&self) -> Vec<f64> {
        (0..self.channels()).map(|c| self.channel(c).iter().sum()).collect()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Shape header `[2, bins, height, width]` as u64 LE, then f64 LE values.
    pub fn write_dump<W: Write>(&self, mut sink: W) -> Result<u64> {
        let mut buf = Vec::with_capacity(32 + 8 * self.values.len());
        for d in [2, self.bins, self.height, self.width] {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        sink.write_all(&buf)?;
        Ok(buf.len() as u64)
    }

    pub fn read_dump<R: Read>(mut source: R) -> Result<Self> {
        let mut bytes = Vec::new();
        source.read_to_end(&mut bytes)?;
        if bytes.len() < 32 {
            return Err(Error::TruncatedHeader);
        }
        let dim = |i: usize| u64::from_le_bytes(bytes[8 * i..8 * i + 8].try_into().unwrap()) as usize;
        if dim(0) != 2 {
            return Err(Error::Shape(format!("expected 2 polarity blocks, got {}", dim(0))));
        }
        let (bins, height, width) = (dim(1), dim(2), dim(3));
        let values: Vec<f64> = bytes[32..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if (bytes.len() - 32) % 8 != 0 {
            return Err(Error::Shape("dump payload is not a whole number of f64".into()));
        }
        Self::from_values(bins, height, width, values)
    }
}

/// Per-event bin coordinate `t* = (t − t_first)/(t_last − t_first)·(B − 1)`.
///
/// Zero-duration streams (including single events) map every event to 0.
pub fn normalize_time(stream: &EventStream, bins: usize) -> Vec<f64> {
    let events = stream.events();
    let duration = stream.duration();
    if duration == 0 {
        return vec![0.0; events.len()];
    }
    let t0 = events[0].t;
    let scale = (bins.saturating_sub(1)) as f64 / duration as f64;
    events
        .iter()
        .map(|e| ((e.t - t0) as f64 * scale).min((bins - 1) as f64))
        .collect()
}

/// Accumulates every event into its polarity block at `(y, x)`.
///
/// Trilinear: weight `1 − frac(t*)` to bin `⌊t*⌋` and `frac(t*)` to the next
/// bin (quantized, see [`TRILINEAR_QUANTUM`]). MLP: `k(t* − b)` to every bin.
pub fn build_est(stream: &EventStream, bins: usize, kernel: &KernelSpec) -> EstTensor {
    assert!(bins >= 1, "at least one temporal bin");
    let g = stream.geometry();
    let mut tensor = EstTensor::zeros(bins, g.height as usize, g.width as usize);
    let tstar = normalize_time(stream, bins);
    for (e, &ts) in stream.events().iter().zip(&tstar) {
        let block = e.p.block() * bins;
        match kernel {
            KernelSpec::Trilinear => {
                for (b, w) in trilinear_weights(ts, bins) {
                    if w != 0.0 {
                        let i = tensor.index(block + b, e.y as usize, e.x as usize);
                        tensor.values[i] += w;
                    }
                }
            }
            KernelSpec::Mlp(k) => {
                for b in 0..bins {
                    let i = tensor.index(block + b, e.y as usize, e.x as usize);
                    tensor.values[i] += k.eval(ts - b as f64);
                }
            }
        }
    }
    tensor
}
