//! Measurement kernels distributing an event over temporal bins.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Mlp, LEAKY_SLOPE};

/// Layer widths of the learnable kernel.
pub const MLP_KERNEL_LAYERS: [usize; 4] = [1, 30, 30, 1];

/// Trilinear bin weights are quantized to multiples of 2^-24 so that every
/// per-event weight pair sums to exactly 1 and any accumulation order gives
/// the same cell values (exact while a cell holds fewer than 2^29 events).
pub const TRILINEAR_QUANTUM: f64 = 1.0 / (1u64 << 24) as f64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    Trilinear,
    Mlp(MlpKernel),
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::Trilinear
    }
}

/// Scalar network `k(Δt)` evaluated at `t* − b` for every bin `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpKernel {
    pub net: Mlp,
}

impl MlpKernel {
    pub fn new(net: Mlp) -> Result<Self> {
        if net.widths.len() < 2 || net.input_width() != 1 || net.output_width() != 1 {
            return Err(Error::Shape(format!(
                "kernel layers must start and end with width 1, got {:?}",
                net.widths
            )));
        }
        if net.params.len() != Mlp::param_count(&net.widths) {
            return Err(Error::Shape("kernel parameter count does not match layers".into()));
        }
        Ok(Self { net })
    }

    pub fn random(layers: &[usize], seed: u64) -> Result<Self> {
        Self::new(Mlp::init_uniform(layers, LEAKY_SLOPE, seed))
    }

    /// Weights that make the network compute the triangular bump
    /// `max(0, 1 − |u|)` exactly.
    ///
    /// Needs at least two hidden layers, the first with width ≥ 6. The first
    /// hidden layer computes `leaky(±(u − k))` for `k ∈ {−1, 0, 1}`; the second
    /// recombines them through `relu(z) = α·leaky(z) + β·leaky(−z)` with
    /// `α = 1/(1 − s²)`, `β = s/(1 − s²)`.
    pub fn triangle(layers: &[usize]) -> Result<Self> {
        if layers.len() < 4 || layers[1] < 6 {
            return Err(Error::Shape(format!(
                "triangle kernel needs [1, >=6, >=1, ..., 1], got {layers:?}"
            )));
        }
        let mut net = Mlp::zeros(layers, LEAKY_SLOPE);
        let s = net.slope;
        let alpha = 1.0 / (1.0 - s * s);
        let beta = s / (1.0 - s * s);
        let (w0, b0) = net.layer_offsets(0);
        for (i, k) in [-1.0, 0.0, 1.0].into_iter().enumerate() {
            // unit 2i: leaky(u - k); unit 2i+1: leaky(-(u - k))
            net.params[w0 + 2 * i] = 1.0;
            net.params[b0 + 2 * i] = -k;
            net.params[w0 + 2 * i + 1] = -1.0;
            net.params[b0 + 2 * i + 1] = k;
        }
        let (w1, _) = net.layer_offsets(1);
        for (i, c) in [1.0, -2.0, 1.0].into_iter().enumerate() {
            net.params[w1 + 2 * i] = c * alpha;
            net.params[w1 + 2 * i + 1] = c * beta;
        }
        // Remaining layers pass unit 0 through (its value is non-negative).
        for l in 2..net.num_layers() {
            let (w, _) = net.layer_offsets(l);
            net.params[w] = 1.0;
        }
        Self::new(net)
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.net.eval(&[u])[0]
    }
}

/// Bin weights of one event for the trilinear kernel: `(bin, weight)` pairs.
#[inline]
pub fn trilinear_weights(tstar: f64, bins: usize) -> [(usize, f64); 2] {
    let lo = (tstar.floor() as usize).min(bins - 1);
    let frac = tstar - lo as f64;
    let hi_w = (frac / TRILINEAR_QUANTUM).round() * TRILINEAR_QUANTUM;
    if lo + 1 >= bins || hi_w == 0.0 {
        [(lo, 1.0), (lo, 0.0)]
    } else {
        [(lo, 1.0 - hi_w), (lo + 1, hi_w)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_kernel_is_exact() {
        let k = MlpKernel::triangle(&MLP_KERNEL_LAYERS).unwrap();
        for i in -400..=400 {
            let u = i as f64 / 100.0;
            let want = (1.0 - u.abs()).max(0.0);
            assert!((k.eval(u) - want).abs() < 1e-12, "u={u}");
        }
    }

    #[test]
    fn kernel_shape_checks() {
        assert!(MlpKernel::random(&[2, 30, 1], 0).is_err());
        assert!(MlpKernel::random(&[1, 30, 30, 1], 0).is_ok());
        assert!(MlpKernel::triangle(&[1, 5, 5, 1]).is_err());
    }

    #[test]
    fn trilinear_split() {
        assert_eq!(trilinear_weights(2.25, 9), [(2, 0.75), (3, 0.25)]);
        assert_eq!(trilinear_weights(0.0, 9)[0], (0, 1.0));
        assert_eq!(trilinear_weights(8.0, 9), [(8, 1.0), (8, 0.0)]);
    }
}
