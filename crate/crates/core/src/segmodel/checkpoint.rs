//! Checkpoint file: `RACCKPT1`, then u64 `in_dim`, `hidden`, `n_classes`,
//! `k`, then every parameter as little-endian f64 in the order of
//! [`Weights::tensors`].

use std::fs;
use std::path::Path;

use super::{ModelConfig, ModelParams, Weights};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"RACCKPT1";

pub fn save_checkpoint(params: &ModelParams, path: &Path) -> Result<()> {
    let cfg = &params.config;
    let mut out = Vec::with_capacity(8 + 32 + params.weights.n_values() * 8);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    for v in [cfg.in_dim, cfg.hidden, cfg.n_classes, cfg.k] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for t in params.weights.tensors() {
        for v in t {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Loads a checkpoint; when `expected` is given the stored shapes must
/// match it.
pub fn load_checkpoint(path: &Path, expected: Option<&ModelConfig>) -> Result<ModelParams> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 40 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(Error::Format(format!(
            "{}: not a checkpoint (bad magic or header)",
            path.display()
        )));
    }
    let header: Vec<usize> = bytes[8..40]
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()) as usize)
        .collect();
    let config = ModelConfig {
        in_dim: header[0],
        hidden: header[1],
        n_classes: header[2],
        k: header[3],
    };
    config.validate()?;
    if let Some(exp) = expected {
        if *exp != config {
            return Err(Error::Format(format!(
                "checkpoint shapes {config:?} do not match config {exp:?}"
            )));
        }
    }
    let mut weights = Weights::zeros(&config);
    let needed = weights.n_values() * 8;
    let body = &bytes[40..];
    if body.len() != needed {
        return Err(Error::Format(format!(
            "checkpoint body has {} bytes, expected {needed}",
            body.len()
        )));
    }
    let mut values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    for t in weights.tensors_mut() {
        for v in t.iter_mut() {
            *v = values.next().expect("length checked");
        }
    }
    ModelParams::from_weights(config, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_validation() {
        let cfg = ModelConfig {
            in_dim: 6,
            hidden: 5,
            n_classes: 3,
            k: 4,
        };
        let params = ModelParams::init(cfg, 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.ckpt");
        save_checkpoint(&params, &p).unwrap();
        let back = load_checkpoint(&p, Some(&cfg)).unwrap();
        assert_eq!(back.weights, params.weights);

        let other = ModelConfig { hidden: 6, ..cfg };
        assert!(load_checkpoint(&p, Some(&other)).is_err());

        let mut bytes = fs::read(&p).unwrap();
        bytes.pop();
        fs::write(&p, &bytes).unwrap();
        assert!(load_checkpoint(&p, None).is_err());
    }
}
