//! Checkpoint format: the line `EVBCKPT1`, one line of JSON header, then the
//! weights as little-endian f64 in the order head, standardizer mean,
//! standardizer inverse std, kernel.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::fit::TrainConfig;
use super::model::{ModelParams, Standardizer};
use crate::error::{Error, Result};
use crate::est::MlpKernel;
use crate::nn::Mlp;

pub const CHECKPOINT_MAGIC: &str = "EVBCKPT1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub head_layers: Vec<usize>,
    pub slope: f64,
    pub dropout_rate: f64,
    pub standardized: bool,
    pub kernel_layers: Option<Vec<usize>>,
    pub kernel_slope: Option<f64>,
    pub weight_count: usize,
    /// Hex SHA-256 of the canonical JSON of the training config.
    pub config_hash: String,
}

pub fn config_hash(config: &TrainConfig) -> String {
    let json = serde_json::to_string(config).expect("config serializes");
    Sha256::digest(json.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn write_checkpoint<W: Write>(params: &ModelParams, config_hash: &str, mut sink: W) -> Result<()> {
    let mut weights = params.head.params.clone();
    if let Some(n) = &params.input_norm {
        weights.extend_from_slice(&n.mean);
        weights.extend_from_slice(&n.inv_std);
    }
    if let Some(k) = &params.kernel {
        weights.extend_from_slice(&k.net.params);
    }
    let header = CheckpointHeader {
        head_layers: params.head.widths.clone(),
        slope: params.head.slope,
        dropout_rate: params.dropout_rate,
        standardized: params.input_norm.is_some(),
        kernel_layers: params.kernel.as_ref().map(|k| k.net.widths.clone()),
        kernel_slope: params.kernel.as_ref().map(|k| k.net.slope),
        weight_count: weights.len(),
        config_hash: config_hash.to_string(),
    };
    writeln!(sink, "{CHECKPOINT_MAGIC}")?;
    writeln!(sink, "{}", serde_json::to_string(&header)?)?;
    let mut buf = Vec::with_capacity(weights.len() * 8);
    for w in &weights {
        buf.extend_from_slice(&w.to_le_bytes());
    }
    sink.write_all(&buf)?;
    Ok(())
}

pub fn read_checkpoint<R: BufRead>(mut source: R) -> Result<(ModelParams, CheckpointHeader)> {
    let mut line = String::new();
    source.read_line(&mut line)?;
    if line.trim_end() != CHECKPOINT_MAGIC {
        return Err(Error::BadMagic);
    }
    line.clear();
    source.read_line(&mut line)?;
    let header: CheckpointHeader = serde_json::from_str(line.trim_end())?;
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    if bytes.len() != header.weight_count * 8 {
        return Err(Error::TruncatedPayload {
            declared: header.weight_count as u64,
            remaining: bytes.len(),
        });
    }
    let weights: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let head_len = Mlp::param_count(&header.head_layers);
    let dim = header.head_layers.first().copied().unwrap_or(0);
    let norm_len = if header.standardized { 2 * dim } else { 0 };
    let kernel_len = header.kernel_layers.as_deref().map_or(0, Mlp::param_count);
    if header.head_layers.len() < 2 || head_len + norm_len + kernel_len != weights.len() {
        return Err(Error::Shape("checkpoint header does not match weight count".into()));
    }
    let mut rest = weights.as_slice();
    let mut take = |n: usize| {
        let (a, b) = rest.split_at(n);
        rest = b;
        a.to_vec()
    };
    let head = Mlp {
        widths: header.head_layers.clone(),
        params: take(head_len),
        slope: header.slope,
    };
    let input_norm = header.standardized.then(|| Standardizer {
        mean: take(dim),
        inv_std: take(dim),
    });
    let kernel = match &header.kernel_layers {
        Some(layers) => Some(MlpKernel::new(Mlp {
            widths: layers.clone(),
            params: take(kernel_len),
            slope: header.kernel_slope.unwrap_or(crate::nn::LEAKY_SLOPE),
        })?),
        None => None,
    };
    Ok((
        ModelParams {
            head,
            dropout_rate: header.dropout_rate,
            input_norm,
            kernel,
        },
        header,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::est::MLP_KERNEL_LAYERS;

    #[test]
    fn roundtrip() {
        let mut p = ModelParams::init(&[4, 3, 2], 0.25, 7).unwrap();
        p.input_norm = Some(Standardizer {
            mean: vec![0.1, 0.2, 0.3, 0.4],
            inv_std: vec![1.0, 2.0, 0.0, 4.0],
        });
        p.kernel = Some(MlpKernel::random(&MLP_KERNEL_LAYERS, 3).unwrap());
        let hash = config_hash(&TrainConfig::default());
        let mut buf = Vec::new();
        write_checkpoint(&p, &hash, &mut buf).unwrap();
        assert!(buf.starts_with(b"EVBCKPT1\n{"));
        let (q, h) = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(p, q);
        assert_eq!(h.config_hash, hash);
        assert_eq!(hash.len(), 64);
    }

    #[test]
    fn truncated_weights_rejected() {
        let p = ModelParams::init(&[2, 2], 0.0, 1).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&p, "x", &mut buf).unwrap();
        buf.pop();
        assert!(read_checkpoint(buf.as_slice()).is_err());
        assert!(matches!(read_checkpoint(&b"NOPE\n"[..]), Err(Error::BadMagic)));
    }

    #[test]
    fn hash_tracks_config() {
        let a = TrainConfig::default();
        let b = TrainConfig { seed: 1, ..a.clone() };
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a), config_hash(&a.clone()));
    }
}
