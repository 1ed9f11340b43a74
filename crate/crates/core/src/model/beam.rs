//! Length-capped beam search over the decoder.

use super::transformer::FrozenSeq2Seq;
use super::TokenSequence;
use crate::error::{Error, Result};
use crate::vocab::{TokenId, EOS};

/// One decoded hypothesis. `ids` ends at the end-of-sequence token or at the
/// length cap; `log_prob` is the sum of per-token log-probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamHypothesis {
    pub ids: Vec<TokenId>,
    pub log_prob: f64,
}

/// Standard beam search: at every step all active hypotheses are expanded
/// over the full vocabulary, the best `beam_size` continuations survive, and
/// continuations ending in end-of-sequence retire to the finished pool.
/// Results are sorted by log-probability descending, ties broken by
/// lexicographic id order; at most `num_outputs` are returned.
pub fn beam_search(
    model: &FrozenSeq2Seq,
    input: &TokenSequence,
    beam_size: usize,
    max_len: usize,
    num_outputs: usize,
) -> Result<Vec<BeamHypothesis>> {
    if beam_size == 0 {
        return Err(Error::InvalidArgument("beam_size must be positive".into()));
    }
    if num_outputs == 0 || num_outputs > beam_size {
        return Err(Error::InvalidArgument(format!(
            "num_outputs {num_outputs} must be in 1..=beam_size ({beam_size})"
        )));
    }
    if max_len == 0 {
        return Err(Error::InvalidArgument("max_len must be positive".into()));
    }
    if max_len > model.config().max_seq_len {
        return Err(Error::SequenceTooLong { len: max_len, max: model.config().max_seq_len });
    }

    let session = model.decode_session(input)?;
    let vocab_size = model.config().vocab_size as u32;

    let mut active = vec![BeamHypothesis { ids: Vec::new(), log_prob: 0.0 }];
    let mut finished: Vec<BeamHypothesis> = Vec::new();

    for _ in 0..max_len {
        if active.is_empty() {
            break;
        }
        let mut expansions: Vec<BeamHypothesis> = Vec::with_capacity(active.len() * vocab_size as usize);
        for hyp in &active {
            let log_probs = session.next_log_probs(&hyp.ids)?;
            for t in 0..vocab_size {
                let mut ids = Vec::with_capacity(hyp.ids.len() + 1);
                ids.extend_from_slice(&hyp.ids);
                ids.push(TokenId(t));
                expansions.push(BeamHypothesis {
                    ids,
                    log_prob: hyp.log_prob + log_probs[t as usize],
                });
            }
        }
        sort_hypotheses(&mut expansions);
        expansions.truncate(beam_size);
        active.clear();
        for e in expansions {
            if *e.ids.last().expect("non-empty expansion") == EOS {
                finished.push(e);
            } else {
                active.push(e);
            }
        }
    }
    finished.extend(active);
    sort_hypotheses(&mut finished);
    finished.dedup_by(|a, b| a.ids == b.ids);
    finished.truncate(num_outputs);
    Ok(finished)
}

fn sort_hypotheses(hyps: &mut [BeamHypothesis]) {
    hyps.sort_by(|a, b| b.log_prob.total_cmp(&a.log_prob).then_with(|| a.ids.cmp(&b.ids)));
}
