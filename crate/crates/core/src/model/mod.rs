//! Frozen encoder-decoder backbone.
//!
//! A small transformer in double precision with a shared input embedding
//! table, deterministic seeded initialization, teacher-forced loss, exact
//! input-embedding gradients via hand-written backpropagation, beam-search
//! decoding, and a binary weight format.

mod beam;
mod config;
mod params;
mod train;
mod transformer;
mod weights;

pub use beam::{beam_search, BeamHypothesis};
pub use config::ModelConfig;
pub use params::{
    AttnParams, DecoderLayerParams, EncoderLayerParams, FfParams, Parameters,
};
pub use train::{train_backbone, TrainReport};
pub use transformer::FrozenSeq2Seq;
pub use weights::{load_weights, save_weights};

use crate::error::{Error, Result};
use crate::vocab::TokenId;

/// A rendered prompt: token ids plus bookkeeping for where the trigger slots
/// and the optional user slot landed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<TokenId>,
    /// Positions of the task trigger slots, in slot order.
    pub trigger_positions: Vec<usize>,
    /// Position of the per-user trigger slot, if the template has one.
    pub user_position: Option<usize>,
}

impl TokenSequence {
    /// A sequence with no trigger bookkeeping.
    pub fn plain(ids: Vec<TokenId>) -> Self {
        TokenSequence { ids, trigger_positions: Vec::new(), user_position: None }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.ids.len();
        for w in self.trigger_positions.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidArgument(
                    "trigger positions must be strictly increasing".into(),
                ));
            }
        }
        for &p in &self.trigger_positions {
            if p >= n {
                return Err(Error::InvalidArgument(format!(
                    "trigger position {p} is outside a sequence of length {n}"
                )));
            }
        }
        if let Some(u) = self.user_position {
            if u >= n {
                return Err(Error::InvalidArgument(format!(
                    "user position {u} is outside a sequence of length {n}"
                )));
            }
            if self.trigger_positions.contains(&u) {
                return Err(Error::InvalidArgument(
                    "user position collides with a trigger position".into(),
                ));
            }
        }
        Ok(())
    }
}
