//! On-disk model directory: `config`, `vocab.txt`, `weights.bin`.

use std::fs;
use std::path::Path;

use super::config::ModelConfig;
use super::weights::ModelWeights;
use super::Model;
use crate::error::{Error, Result};

pub const CONFIG_FILE: &str = "config";
pub const VOCAB_FILE: &str = "vocab.txt";
pub const WEIGHTS_FILE: &str = "weights.bin";

fn read(path: &Path) -> Result<Vec<u8>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Decode a little-endian f32 blob laid out in manifest order, upcasting to f64.
pub fn decode_weights(cfg: &ModelConfig, bytes: &[u8]) -> Result<ModelWeights> {
    let manifest = cfg.manifest();
    let mut offset = 0usize;
    let mut tensors = Vec::with_capacity(manifest.len());
    for spec in &manifest {
        let need = spec.numel() * 4;
        let available = bytes.len().saturating_sub(offset);
        if available < need {
            return Err(Error::ShapeMismatch {
                tensor: spec.name.clone(),
                expected: need,
                found: available,
            });
        }
        let data: Vec<f64> = bytes[offset..offset + need]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        if let Some(index) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteWeight {
                tensor: spec.name.clone(),
                index,
            });
        }
        tensors.push(data);
        offset += need;
    }
    if offset != bytes.len() {
        return Err(Error::ShapeMismatch {
            tensor: "<end of blob>".into(),
            expected: offset,
            found: bytes.len(),
        });
    }
    ModelWeights::from_tensors(cfg, tensors)
}

pub fn encode_weights(weights: &ModelWeights) -> Vec<u8> {
    let mut out = Vec::new();
    for t in weights.tensors() {
        for &x in t {
            out.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    out
}

/// Load `config` and `weights.bin` from a model directory.
pub fn load_model(dir: &Path) -> Result<(ModelConfig, ModelWeights)> {
    let cfg_path = dir.join(CONFIG_FILE);
    let text = String::from_utf8(read(&cfg_path)?)
        .map_err(|_| Error::Config("config is not UTF-8".into()))?;
    let cfg = ModelConfig::parse(&text)?;
    let weights = decode_weights(&cfg, &read(&dir.join(WEIGHTS_FILE))?)?;
    weights.validate(&cfg)?;
    Ok((cfg, weights))
}

/// Write a model directory. `vocab` is written one token per line when given.
pub fn save_model(dir: &Path, model: &Model, vocab: Option<&[String]>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let p = dir.join(CONFIG_FILE);
    fs::write(&p, model.config.to_config_string()).map_err(|e| Error::io(&p, e))?;
    let p = dir.join(WEIGHTS_FILE);
    fs::write(&p, encode_weights(&model.weights)).map_err(|e| Error::io(&p, e))?;
    if let Some(vocab) = vocab {
        let p = dir.join(VOCAB_FILE);
        let mut text = vocab.join("\n");
        text.push('\n');
        fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
    }
    Ok(())
}
