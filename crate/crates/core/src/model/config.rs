use crate::error::{Error, Result};

/// Shape and seed of the backbone. `seed` drives weight initialization, so a
/// config fully determines a freshly constructed model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub num_encoder_layers: usize,
    pub num_decoder_layers: usize,
    pub num_heads: usize,
    pub feedforward_dim: usize,
    pub max_seq_len: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            vocab_size: 2000,
            embed_dim: 32,
            num_encoder_layers: 2,
            num_decoder_layers: 2,
            num_heads: 4,
            feedforward_dim: 64,
            max_seq_len: 160,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < 5 {
            return Err(Error::InvalidConfig(format!(
                "vocab_size {} cannot cover the special tokens",
                self.vocab_size
            )));
        }
        if self.embed_dim == 0 || self.num_heads == 0 || self.feedforward_dim == 0 {
            return Err(Error::InvalidConfig("dimensions must be positive".into()));
        }
        if !self.embed_dim.is_multiple_of(self.num_heads) {
            return Err(Error::InvalidConfig(format!(
                "embed_dim {} is not divisible by num_heads {}",
                self.embed_dim, self.num_heads
            )));
        }
        if self.num_encoder_layers == 0 || self.num_decoder_layers == 0 {
            return Err(Error::InvalidConfig("layer counts must be positive".into()));
        }
        if self.max_seq_len < 2 {
            return Err(Error::InvalidConfig("max_seq_len must be at least 2".into()));
        }
        Ok(())
    }
}
