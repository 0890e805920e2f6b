//! Decoder-only micro transformer with fully traced forward passes.

mod config;
mod forward;
mod io;
mod weights;

#[cfg(test)]
mod tests;

pub use config::{ActivationKind, ModelConfig, NormKind, TensorSpec};
pub use forward::{ActivationTrace, FfTrace, LayerTrace};
pub use io::{decode_weights, encode_weights, load_model, save_model, CONFIG_FILE, VOCAB_FILE, WEIGHTS_FILE};
pub use weights::{FeedForward, LayerWeights, ModelWeights, NormParams};

pub(crate) use forward::softmax;

/// Config and weights, immutable after construction and shareable across threads.
#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub weights: ModelWeights,
}

impl Model {
    pub fn new(config: ModelConfig, weights: ModelWeights) -> crate::Result<Self> {
        config.validate()?;
        weights.validate(&config)?;
        Ok(Model { config, weights })
    }

    pub fn load(dir: &std::path::Path) -> crate::Result<Self> {
        let (config, weights) = load_model(dir)?;
        Ok(Model { config, weights })
    }
}
