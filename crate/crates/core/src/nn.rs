//! Minimal fully connected network over a flat parameter vector.
//!
//! Hidden layers use a leaky rectifier; the last layer is affine. Parameters
//! are stored layer by layer as a row-major `out × in` weight matrix followed
//! by `out` biases.

use serde::{Deserialize, Serialize};

use crate::rng::CounterRng;

pub const LEAKY_SLOPE: f64 = 0.1;

#[inline]
pub fn leaky(z: f64, slope: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        slope * z
    }
}

#[inline]
fn leaky_grad(z: f64, slope: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        slope
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub widths: Vec<usize>,
    pub params: Vec<f64>,
    pub slope: f64,
}

/// Forward-pass record needed for backpropagation.
#[derive(Debug, Clone)]
pub struct Trace {
    /// Input to each layer (post-activation, post-dropout of the previous one).
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of each layer.
    pre: Vec<Vec<f64>>,
    /// Dropout multipliers per hidden layer (0 or 1/(1-rate)); empty when off.
    masks: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

/// Inverted-dropout configuration for one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct Dropout {
    pub rate: f64,
    pub seed: u64,
}

impl Mlp {
    pub fn param_count(widths: &[usize]) -> usize {
        widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn zeros(widths: &[usize], slope: f64) -> Self {
        Self {
            widths: widths.to_vec(),
            params: vec![0.0; Self::param_count(widths)],
            slope,
        }
    }

    /// Weights and biases uniform on ±1/√fan_in.
    pub fn init_uniform(widths: &[usize], slope: f64, seed: u64) -> Self {
        let mut net = Self::zeros(widths, slope);
        let mut rng = CounterRng::new(seed);
        let mut off = 0;
        for w in widths.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for p in &mut net.params[off..off + w[0] * w[1] + w[1]] {
                *p = rng.next_range(-bound, bound);
            }
            off += w[0] * w[1] + w[1];
        }
        net
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.widths.len() - 1
    }

    /// (weight offset, bias offset) of layer `l`.
    pub fn layer_offsets(&self, l: usize) -> (usize, usize) {
        let off: usize = self.widths[..=l]
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum();
        (off, off + self.widths[l] * self.widths[l + 1])
    }

    pub fn forward(&self, input: &[f64], dropout: Option<Dropout>) -> Trace {
        debug_assert_eq!(input.len(), self.input_width());
        let layers = self.num_layers();
        let mut inputs = Vec::with_capacity(layers);
        let mut pre = Vec::with_capacity(layers);
        let mut masks = Vec::new();
        let mut cur = input.to_vec();
        let mask_rng = dropout.map(|d| CounterRng::new(d.seed));
        let mut mask_counter = 0u64;
        let mut off = 0;
        for l in 0..layers {
            let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
            let w = &self.params[off..off + n_in * n_out];
            let b = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
            off += n_in * n_out + n_out;
            let z: Vec<f64> = (0..n_out)
                .map(|j| {
                    let row = &w[j * n_in..(j + 1) * n_in];
                    row.iter().zip(&cur).map(|(a, x)| a * x).sum::<f64>() + b[j]
                })
                .collect();
            let next = if l + 1 == layers {
                z.clone()
            } else {
                let mut a: Vec<f64> = z.iter().map(|&v| leaky(v, self.slope)).collect();
                if let (Some(d), Some(rng)) = (dropout, mask_rng.as_ref()) {
                    if d.rate > 0.0 {
                        let scale = 1.0 / (1.0 - d.rate);
                        let mask: Vec<f64> = (0..n_out)
                            .map(|_| {
                                let r = rng.unit_at(mask_counter);
                                mask_counter += 1;
                                if r <= d.rate {
                                    0.0
                                } else {
                                    scale
                                }
                            })
                            .collect();
                        for (v, m) in a.iter_mut().zip(&mask) {
                            *v *= m;
                        }
                        masks.push(mask);
                    }
                }
                a
            };
            inputs.push(std::mem::replace(&mut cur, next));
            pre.push(z);
        }
        Trace {
            inputs,
            pre,
            masks,
            output: cur,
        }
    }

    pub fn eval(&self, input: &[f64]) -> Vec<f64> {
        self.forward(input, None).output
    }

    /// Accumulates `∂(d_out · output)/∂θ` into `grad` and returns the gradient
    /// with respect to the input.
    pub fn backward(&self, trace: &Trace, d_out: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let layers = self.num_layers();
        let mut delta = d_out.to_vec();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
            if l + 1 != layers {
                if !trace.masks.is_empty() {
                    for (d, m) in delta.iter_mut().zip(&trace.masks[l]) {
                        *d *= m;
                    }
                }
                for (d, &z) in delta.iter_mut().zip(&trace.pre[l]) {
                    *d *= leaky_grad(z, self.slope);
                }
            }
            let (w_off, b_off) = self.layer_offsets(l);
            let x = &trace.inputs[l];
            for j in 0..n_out {
                let dj = delta[j];
                if dj == 0.0 {
                    continue;
                }
                grad[b_off + j] += dj;
                let g = &mut grad[w_off + j * n_in..w_off + (j + 1) * n_in];
                for (gi, xi) in g.iter_mut().zip(x) {
                    *gi += dj * xi;
                }
            }
            let w = &self.params[w_off..w_off + n_in * n_out];
            let mut d_in = vec![0.0; n_in];
            for j in 0..n_out {
                let dj = delta[j];
                if dj == 0.0 {
                    continue;
                }
                for (di, wi) in d_in.iter_mut().zip(&w[j * n_in..(j + 1) * n_in]) {
                    *di += dj * wi;
                }
            }
            delta = d_in;
        }
        delta
    }

    /// Smallest |pre-activation| over hidden units (distance to a kink).
    pub fn min_hidden_margin(&self, trace: &Trace) -> f64 {
        trace.pre[..trace.pre.len().saturating_sub(1)]
            .iter()
            .flatten()
            .fold(f64::INFINITY, |m, z| m.min(z.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_and_counts() {
        let widths = [1, 30, 30, 1];
        assert_eq!(Mlp::param_count(&widths), 60 + 930 + 31);
        let net = Mlp::zeros(&widths, LEAKY_SLOPE);
        assert_eq!(net.layer_offsets(0), (0, 30));
        assert_eq!(net.layer_offsets(1), (60, 960));
        assert_eq!(net.layer_offsets(2), (990, 1020));
    }

    #[test]
    fn hand_computed_forward() {
        // 2-2-1: h = leaky(W1 x + b1), y = W2 h + b2
        let mut net = Mlp::zeros(&[2, 2, 1], 0.1);
        net.params = vec![1.0, -1.0, 0.5, 2.0, 0.0, -3.0, 1.0, 1.0, 0.25];
        let y = net.eval(&[2.0, 1.0]);
        // z1 = 2-1+0 = 1 -> 1; z2 = 1+2-3 = 0 -> 0; y = 1 + 0 + 0.25
        assert_eq!(y, vec![1.25]);
        let y = net.eval(&[-2.0, 1.0]);
        // z1 = -3 -> -0.3; z2 = -1+2-3 = -2 -> -0.2; y = -0.5 + 0.25
        assert!((y[0] + 0.25).abs() < 1e-15);
    }

    #[test]
    fn backward_matches_finite_difference() {
        let net = Mlp::init_uniform(&[3, 4, 2], 0.1, 7);
        let x = [0.3, -0.8, 1.1];
        let d_out = [0.7, -1.3];
        let trace = net.forward(&x, None);
        let mut grad = vec![0.0; net.params.len()];
        let d_in = net.backward(&trace, &d_out, &mut grad);
        let f = |n: &Mlp, x: &[f64]| -> f64 {
            n.eval(x).iter().zip(&d_out).map(|(a, b)| a * b).sum()
        };
        let h = 1e-6;
        for i in 0..net.params.len() {
            let mut p = net.clone();
            p.params[i] += h;
            let mut m = net.clone();
            m.params[i] -= h;
            let fd = (f(&p, &x) - f(&m, &x)) / (2.0 * h);
            assert!((fd - grad[i]).abs() < 1e-7, "param {i}: {fd} vs {}", grad[i]);
        }
        for i in 0..3 {
            let mut xp = x;
            xp[i] += h;
            let mut xm = x;
            xm[i] -= h;
            let fd = (f(&net, &xp) - f(&net, &xm)) / (2.0 * h);
            assert!((fd - d_in[i]).abs() < 1e-7);
        }
    }

    #[test]
    fn dropout_is_seeded() {
        let net = Mlp::init_uniform(&[4, 16, 2], 0.1, 1);
        let x = [1.0, 2.0, 3.0, 4.0];
        let a = net.forward(&x, Some(Dropout { rate: 0.5, seed: 3 })).output;
        let b = net.forward(&x, Some(Dropout { rate: 0.5, seed: 3 })).output;
        let c = net.forward(&x, Some(Dropout { rate: 0.0, seed: 3 })).output;
        assert_eq!(a, b);
        assert_eq!(c, net.eval(&x));
    }
}
