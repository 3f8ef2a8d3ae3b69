use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::est::{KernelSpec, MlpKernel, PooledEvents};
use crate::nn::{Dropout, Mlp, LEAKY_SLOPE};
use crate::rng::derive_seed;

/// Per-feature affine normalization `(x − mean) · inv_std`, fitted on the
/// training split. Features with zero training variance get `inv_std = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub inv_std: Vec<f64>,
}

impl Standardizer {
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Option<Self> {
        let mut n = 0usize;
        let mut sum: Vec<f64> = Vec::new();
        let mut sq: Vec<f64> = Vec::new();
        for row in rows {
            if sum.is_empty() {
                sum = vec![0.0; row.len()];
                sq = vec![0.0; row.len()];
            }
            for ((s, q), &v) in sum.iter_mut().zip(&mut sq).zip(row) {
                *s += v;
                *q += v * v;
            }
            n += 1;
        }
        if n == 0 {
            return None;
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let inv_std = sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| {
                let var = (q / n as f64 - m * m).max(0.0);
                let sd = var.sqrt();
                if sd > 1e-12 {
                    1.0 / sd
                } else {
                    0.0
                }
            })
            .collect();
        Some(Self { mean, inv_std })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.inv_std)
            .map(|((v, m), s)| (v - m) * s)
            .collect()
    }
}

/// Classifier weights: an MLP head over pooled features, optionally preceded
/// by a trainable EST kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub head: Mlp,
    pub dropout_rate: f64,
    pub input_norm: Option<Standardizer>,
    pub kernel: Option<MlpKernel>,
}

impl ModelParams {
    /// `layers = [D, h1, …, C]`, uniform fan-in initialization from `seed`.
    pub fn init(layers: &[usize], dropout_rate: f64, seed: u64) -> Result<Self> {
        if layers.len() < 2 || layers.contains(&0) {
            return Err(Error::Shape(format!("bad head layers {layers:?}")));
        }
        if !(0.0..1.0).contains(&dropout_rate) {
            return Err(Error::Config(format!("dropout rate {dropout_rate} not in [0, 1)")));
        }
        Ok(Self {
            head: Mlp::init_uniform(layers, LEAKY_SLOPE, seed),
            dropout_rate,
            input_norm: None,
            kernel: None,
        })
    }

    pub fn input_width(&self) -> usize {
        self.head.input_width()
    }

    pub fn classes(&self) -> usize {
        self.head.output_width()
    }

    pub fn kernel_spec(&self) -> KernelSpec {
        match &self.kernel {
            Some(k) => KernelSpec::Mlp(k.clone()),
            None => KernelSpec::Trilinear,
        }
    }

    /// Number of trainable parameters (head, then kernel).
    pub fn trainable_len(&self) -> usize {
        self.head.params.len() + self.kernel.as_ref().map_or(0, |k| k.net.params.len())
    }

    pub fn trainable(&self) -> Vec<f64> {
        let mut v = self.head.params.clone();
        if let Some(k) = &self.kernel {
            v.extend_from_slice(&k.net.params);
        }
        v
    }

    pub fn set_trainable(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.trainable_len(), "trainable length mismatch");
        let n = self.head.params.len();
        self.head.params.copy_from_slice(&values[..n]);
        if let Some(k) = &mut self.kernel {
            k.net.params.copy_from_slice(&values[n..]);
        }
    }
}

/// Classifier input: precomputed pooled features, or events from which
/// features are computed with the model's kernel.
#[derive(Debug, Clone, PartialEq)]
pub enum SampleInput {
    Features(Vec<f64>),
    Events(PooledEvents),
}

impl SampleInput {
    pub fn raw_features(&self, params: &ModelParams) -> Vec<f64> {
        match self {
            SampleInput::Features(f) => f.clone(),
            SampleInput::Events(ev) => ev.features(&params.kernel_spec()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    /// Dropout active with a mask drawn from `seed`.
    Train { seed: u64 },
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|e| e / total).collect()
}

fn dropout_for(params: &ModelParams, mode: Mode) -> Option<Dropout> {
    match mode {
        Mode::Train { seed } if params.dropout_rate > 0.0 => Some(Dropout {
            rate: params.dropout_rate,
            seed,
        }),
        _ => None,
    }
}

fn prepare(params: &ModelParams, raw: &[f64]) -> Result<Vec<f64>> {
    if raw.len() != params.input_width() {
        return Err(Error::Shape(format!(
            "feature length {} but model expects {}",
            raw.len(),
            params.input_width()
        )));
    }
    Ok(match &params.input_norm {
        Some(n) => n.apply(raw),
        None => raw.to_vec(),
    })
}

/// Class probabilities for one feature vector.
pub fn forward(params: &ModelParams, features: &[f64], mode: Mode) -> Result<Vec<f64>> {
    let x = prepare(params, features)?;
    Ok(softmax(&params.head.forward(&x, dropout_for(params, mode)).output))
}

pub fn predict(params: &ModelParams, input: &SampleInput) -> Result<Vec<f64>> {
    forward(params, &input.raw_features(params), Mode::Eval)
}

/// Gradient of the mean loss, laid out like [`ModelParams::trainable_len`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub head: Vec<f64>,
    pub kernel: Option<Vec<f64>>,
}

impl Gradient {
    pub fn flat(&self) -> Vec<f64> {
        let mut v = self.head.clone();
        if let Some(k) = &self.kernel {
            v.extend_from_slice(k);
        }
        v
    }
}

/// Lower clamp on probabilities inside the log.
pub const PROB_FLOOR: f64 = 1e-15;

/// Mean cross-entropy over the batch and its gradient.
///
/// With `dropout_seed = Some(s)`, sample `k` of the batch is run in training
/// mode with mask seed `derive_seed(s, k)`. Kernel gradients are produced only
/// for [`SampleInput::Events`] inputs when the model carries a kernel.
pub fn loss_and_grad(
    params: &ModelParams,
    batch: &[(&SampleInput, usize)],
    dropout_seed: Option<u64>,
) -> Result<(f64, Gradient)> {
    if batch.is_empty() {
        return Err(Error::Shape("empty batch".into()));
    }
    let classes = params.classes();
    let mut head_grad = vec![0.0; params.head.params.len()];
    let mut kernel_grad = params.kernel.as_ref().map(|k| vec![0.0; k.net.params.len()]);
    let mut loss = 0.0;
    let scale = 1.0 / batch.len() as f64;
    for (k, &(input, label)) in batch.iter().enumerate() {
        if label >= classes {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        let raw = input.raw_features(params);
        let x = prepare(params, &raw)?;
        let mode = match dropout_seed {
            Some(s) => Mode::Train {
                seed: derive_seed(s, k as u64),
            },
            None => Mode::Eval,
        };
        let trace = params.head.forward(&x, dropout_for(params, mode));
        let probs = softmax(&trace.output);
        loss -= probs[label].max(PROB_FLOOR).ln();
        let d_logits: Vec<f64> = probs
            .iter()
            .enumerate()
            .map(|(c, p)| (p - if c == label { 1.0 } else { 0.0 }) * scale)
            .collect();
        let d_x = params.head.backward(&trace, &d_logits, &mut head_grad);
        if let (SampleInput::Events(ev), Some(kernel), Some(kg)) =
            (input, params.kernel.as_ref(), kernel_grad.as_mut())
        {
            let d_raw: Vec<f64> = match &params.input_norm {
                Some(n) => d_x.iter().zip(&n.inv_std).map(|(d, s)| d * s).collect(),
                None => d_x,
            };
            ev.kernel_backward(kernel, &d_raw, kg);
        }
    }
    Ok((
        loss * scale,
        Gradient {
            head: head_grad,
            kernel: kernel_grad,
        },
    ))
}
