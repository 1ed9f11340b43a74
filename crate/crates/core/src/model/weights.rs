//! Binary weight persistence.
//!
//! Layout: magic `PFRZ1`, format version (u32 LE), the eight config fields
//! (u64 LE each), every tensor as f64 little-endian in declared order, and a
//! trailing FNV-1a 64-bit checksum of all preceding bytes.

use std::path::Path;

use super::params::Parameters;
use super::transformer::{Fnv64, FrozenSeq2Seq};
use super::ModelConfig;
use crate::error::{Error, Result};

const MAGIC: &[u8; 5] = b"PFRZ1";
const VERSION: u32 = 1;

pub fn save_weights(model: &FrozenSeq2Seq, path: &Path) -> Result<()> {
    let cfg = model.config();
    let mut bytes: Vec<u8> = Vec::new();
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&VERSION.to_le_bytes());
    for field in config_fields(cfg) {
        bytes.extend_from_slice(&field.to_le_bytes());
    }
    for t in model.parameters().tensors() {
        for v in t.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut h = Fnv64::new();
    h.update(&bytes);
    bytes.extend_from_slice(&h.finish().to_le_bytes());
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn load_weights(path: &Path) -> Result<FrozenSeq2Seq> {
    let bytes = std::fs::read(path)?;
    let header_len = MAGIC.len() + 4 + 8 * 8;
    if bytes.len() < header_len {
        return Err(Error::WeightTruncated {
            expected: header_len as u64,
            found: bytes.len() as u64,
        });
    }
    if &bytes[..5] != MAGIC {
        return Err(Error::WeightFormat("bad magic".into()));
    }
    let version = u32::from_le_bytes(bytes[5..9].try_into().unwrap());
    if version != VERSION {
        return Err(Error::WeightFormat(format!(
            "unsupported version {version}, expected {VERSION}"
        )));
    }
    let mut fields = [0u64; 8];
    for (i, f) in fields.iter_mut().enumerate() {
        let start = 9 + i * 8;
        *f = u64::from_le_bytes(bytes[start..start + 8].try_into().unwrap());
    }
    let config = config_from_fields(&fields)?;
    config.validate()?;

    let mut params = Parameters::zeros(&config);
    let value_count: usize = params.tensors().iter().map(|t| t.data().len()).sum();
    let expected = header_len + value_count * 8 + 8;
    if bytes.len() < expected {
        return Err(Error::WeightTruncated {
            expected: expected as u64,
            found: bytes.len() as u64,
        });
    }
    if bytes.len() > expected {
        return Err(Error::WeightFormat(format!(
            "{} trailing bytes after checksum",
            bytes.len() - expected
        )));
    }

    let mut h = Fnv64::new();
    h.update(&bytes[..expected - 8]);
    let stored = u64::from_le_bytes(bytes[expected - 8..].try_into().unwrap());
    if h.finish() != stored {
        return Err(Error::WeightFormat("checksum mismatch".into()));
    }

    let mut offset = header_len;
    for t in params.tensors_mut() {
        for v in t.data_mut() {
            *v = f64::from_le_bytes(bytes[offset..offset + 8].try_into().unwrap());
            offset += 8;
        }
    }
    FrozenSeq2Seq::from_parameters(config, params)
}

fn config_fields(cfg: &ModelConfig) -> [u64; 8] {
    [
        cfg.vocab_size as u64,
        cfg.embed_dim as u64,
        cfg.num_encoder_layers as u64,
        cfg.num_decoder_layers as u64,
        cfg.num_heads as u64,
        cfg.feedforward_dim as u64,
        cfg.max_seq_len as u64,
        cfg.seed,
    ]
}

fn config_from_fields(f: &[u64; 8]) -> Result<ModelConfig> {
    let to_usize = |v: u64, name: &str| -> Result<usize> {
        usize::try_from(v)
            .map_err(|_| Error::WeightFormat(format!("config field {name} out of range")))
    };
    Ok(ModelConfig {
        vocab_size: to_usize(f[0], "vocab_size")?,
        embed_dim: to_usize(f[1], "embed_dim")?,
        num_encoder_layers: to_usize(f[2], "num_encoder_layers")?,
        num_decoder_layers: to_usize(f[3], "num_decoder_layers")?,
        num_heads: to_usize(f[4], "num_heads")?,
        feedforward_dim: to_usize(f[5], "feedforward_dim")?,
        max_seq_len: to_usize(f[6], "max_seq_len")?,
        seed: f[7],
    })
}
