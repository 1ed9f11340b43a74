//! Interaction data: ingestion, synthesis, splitting, and per-user views.

mod log;
mod split;
mod synth;

pub use log::{build_vocab, load_interactions, save_interactions, Interaction, InteractionLog};
pub use split::{
    build_explanation_instances, build_matching_instances, leave_one_out_split,
    partition_by_user, SkipReport, SplitDataset, SplitOptions, TaskInstance, UserPartition,
    UserSlices,
};
pub use synth::{
    item_name, manual_prompt_words, synth_generate, title_for_item, user_name, SynthConfig,
    NUM_CLUSTERS,
};

use crate::error::Result;
use crate::prompt::{PromptTemplate, TaskKind, TriggerAssignment};
use crate::vocab::{TokenId, Vocab, EOS};

/// The hand-written bootstrap prompt as a template plus fixed assignment:
/// `l` suffix slots holding the manual words, no user slot.
pub fn manual_prompt(task: TaskKind, vocab: &Vocab) -> Result<(PromptTemplate, TriggerAssignment)> {
    let words = manual_prompt_words(task);
    let template = PromptTemplate::new(task, words.len(), false);
    let mut assignment = crate::prompt::default_assignment(&template, vocab, &[])?;
    assignment.task_tokens = words
        .iter()
        .map(|w| {
            vocab.lookup(w).ok_or_else(|| {
                crate::error::Error::InvalidArgument(format!(
                    "manual prompt word {w:?} is not in the vocabulary"
                ))
            })
        })
        .collect::<Result<_>>()?;
    Ok((template, assignment))
}

/// Teacher-forcing pairs for backbone training: every train instance rendered
/// with the manual prompt, targets terminated with the end token.
pub fn training_pairs(
    split: &SplitDataset,
    vocab: &Vocab,
) -> Result<Vec<(Vec<TokenId>, Vec<TokenId>)>> {
    let (template, assignment) = manual_prompt(split.task_kind, vocab)?;
    let mut pairs = Vec::with_capacity(split.train.len());
    for inst in &split.train {
        let seq = crate::prompt::render(&template, &inst.args, &assignment, inst.user)?;
        let mut target = inst.target.clone();
        target.push(EOS);
        pairs.push((seq.ids, target));
    }
    Ok(pairs)
}
