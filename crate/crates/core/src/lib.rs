//! Gradient-guided discrete prompt search over a frozen toy seq2seq backbone.
//!
//! The crate is organised around the search loop's data flow: `vocab` and
//! `data` define tokens and interaction corpora, `model` holds the frozen
//! backbone (forward, manual backprop, beam decoding, training, weight I/O),
//! `prompt` renders token-level prompt templates, `eval` scores generated
//! output, and `search` runs the alternating token-replacement procedure.

pub mod data;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod model;
pub mod prompt;
pub mod search;
pub mod vocab;

pub use error::{Error, Result};
pub use eval::{
    bleu4, decode_explanations, decode_ranked, default_alpha, evaluate_prompt, hit_rate_at_k,
    ndcg_at_k, rouge, surrogate_score, MetricName, MetricsReport, RankedOutputs, RougeVariant,
};
pub use model::{
    beam_search, load_weights, save_weights, train_backbone, AttnParams, BeamHypothesis,
    DecoderLayerParams, EncoderLayerParams, FfParams, FrozenSeq2Seq, ModelConfig, Parameters,
    TokenSequence, TrainReport,
};
pub use search::{
    accumulate_task_gradient, approx_loss_change, candidate_tokens, evaluate_criterion,
    mean_instance_loss, run_search, update_task_token, update_user_tokens, BestPromptCheckpoint,
    CandidateSet, EpochKind, EpochLog, SearchConfig, SelectionCriterion, SlotRef,
};
pub use vocab::{TokenId, Vocab, DEFAULT_TRIGGER, EOS, PAD, SEP, WORDS};
