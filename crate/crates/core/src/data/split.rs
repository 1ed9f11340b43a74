//! Leave-one-out splitting and task-instance construction.
//!
//! Per user: the last interaction is the test target with everything before
//! it as history, the second-to-last is the validation target, and training
//! instances roll over every next-item step of the prefix that excludes the
//! test target. A user's final rolling step and their validation instance
//! coincide by construction; the leakage guarantee concerns test targets
//! only and is absolute.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::log::{Interaction, InteractionLog};
use super::synth::title_for_item;
use crate::error::{Error, Result};
use crate::prompt::{TaskArgs, TaskKind};
use crate::vocab::{TokenId, Vocab};

/// One evaluation or training example: rendered later by the prompt module.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskInstance {
    pub user: TokenId,
    pub args: TaskArgs,
    /// Item token for the ranking tasks, explanation tokens for the text
    /// task.
    pub target: Vec<TokenId>,
}

/// Users and records dropped by the split, by reason.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SkipReport {
    /// Users with fewer than three interactions.
    pub too_short: usize,
    /// Users whose test target already appears in their earlier history;
    /// keeping them would break the leakage guarantee.
    pub leaky_target: usize,
    /// Explanation-task records without explanation text.
    pub missing_explanation: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitDataset {
    pub task_kind: TaskKind,
    pub train: Vec<TaskInstance>,
    pub val: Vec<TaskInstance>,
    pub test: Vec<TaskInstance>,
    pub skips: SkipReport,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitOptions {
    /// Matching negatives sampled per instance ("at most" this many).
    pub num_negatives: usize,
    /// Seed for negative sampling and candidate shuffling.
    pub seed: u64,
}

impl Default for SplitOptions {
    fn default() -> Self {
        SplitOptions { num_negatives: 99, seed: 0 }
    }
}

fn token_of(vocab: &Vocab, s: &str) -> Result<TokenId> {
    vocab
        .lookup(s)
        .ok_or_else(|| Error::InvalidArgument(format!("{s:?} is not in the vocabulary")))
}

pub fn leave_one_out_split(
    log: &InteractionLog,
    task_kind: TaskKind,
    vocab: &Vocab,
    options: &SplitOptions,
) -> Result<SplitDataset> {
    let mut split = SplitDataset {
        task_kind,
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
        skips: SkipReport::default(),
    };
    let mut rng = ChaCha20Rng::seed_from_u64(options.seed);
    let all_items: Vec<TokenId> = vocab.items().collect();

    for (user_str, recs) in log.per_user() {
        let user = token_of(vocab, user_str)?;
        let n = recs.len();
        if n < 3 {
            split.skips.too_short += 1;
            continue;
        }
        let items: Vec<TokenId> =
            recs.iter().map(|r| token_of(vocab, &r.item)).collect::<Result<_>>()?;
        if items[..n - 1].contains(&items[n - 1]) {
            split.skips.leaky_target += 1;
            continue;
        }

        match task_kind {
            TaskKind::Sequential => {
                for j in 1..n - 1 {
                    split.train.push(TaskInstance {
                        user,
                        args: TaskArgs::for_items(user, items[..j].to_vec()),
                        target: vec![items[j]],
                    });
                }
                split.val.push(TaskInstance {
                    user,
                    args: TaskArgs::for_items(user, items[..n - 2].to_vec()),
                    target: vec![items[n - 2]],
                });
                split.test.push(TaskInstance {
                    user,
                    args: TaskArgs::for_items(user, items[..n - 1].to_vec()),
                    target: vec![items[n - 1]],
                });
            }
            TaskKind::Matching => {
                let history: BTreeSet<TokenId> = items.iter().copied().collect();
                let build = |target: TokenId, rng: &mut ChaCha20Rng| {
                    build_matching_instance(
                        user,
                        target,
                        &history,
                        &all_items,
                        options.num_negatives,
                        rng,
                    )
                };
                for &target in &items[1..n - 1] {
                    let inst = build(target, &mut rng);
                    split.train.push(inst);
                }
                let val = build(items[n - 2], &mut rng);
                split.val.push(val);
                let test = build(items[n - 1], &mut rng);
                split.test.push(test);
            }
            TaskKind::Explanation => {
                let push = |rec: &Interaction,
                                out: &mut Vec<TaskInstance>,
                                skips: &mut SkipReport|
                 -> Result<()> {
                    match explanation_instance(user, rec, vocab)? {
                        Some(inst) => out.push(inst),
                        None => skips.missing_explanation += 1,
                    }
                    Ok(())
                };
                for rec in &recs[..n - 2] {
                    push(rec, &mut split.train, &mut split.skips)?;
                }
                push(&recs[n - 2], &mut split.val, &mut split.skips)?;
                push(&recs[n - 1], &mut split.test, &mut split.skips)?;
            }
        }
    }
    Ok(split)
}

/// Candidate set for one matching instance: the target plus up to
/// `num_negatives` items the user never interacted with, shuffled.
fn build_matching_instance(
    user: TokenId,
    target: TokenId,
    history: &BTreeSet<TokenId>,
    all_items: &[TokenId],
    num_negatives: usize,
    rng: &mut ChaCha20Rng,
) -> TaskInstance {
    let pool: Vec<TokenId> =
        all_items.iter().copied().filter(|t| !history.contains(t)).collect();
    let take = num_negatives.min(pool.len());
    let mut candidates: Vec<TokenId> = Vec::with_capacity(take + 1);
    candidates.push(target);
    candidates.extend(pool.choose_multiple(rng, take).copied());
    candidates.shuffle(rng);
    TaskInstance { user, args: TaskArgs::for_items(user, candidates), target: vec![target] }
}

/// Explanation instance for one record, or None when the record has no
/// explanation text. The title comes from the item's cluster naming, with
/// the bare item token as fallback.
fn explanation_instance(
    user: TokenId,
    rec: &Interaction,
    vocab: &Vocab,
) -> Result<Option<TaskInstance>> {
    let Some(words) = &rec.explanation else {
        return Ok(None);
    };
    let target: Vec<TokenId> =
        words.iter().map(|w| token_of(vocab, w)).collect::<Result<_>>()?;
    let title: Vec<TokenId> = match title_for_item(&rec.item) {
        Some(pair) => pair.iter().map(|w| token_of(vocab, w)).collect::<Result<_>>()?,
        None => vec![token_of(vocab, &rec.item)?],
    };
    let mut args = TaskArgs::for_title(user, title);
    args.rating = rec.rating;
    Ok(Some(TaskInstance { user, args, target }))
}

/// Standalone matching-instance construction over a whole log, mirroring the
/// split's sampling but callable on its own.
pub fn build_matching_instances(
    log: &InteractionLog,
    vocab: &Vocab,
    num_negatives: usize,
    seed: u64,
) -> Result<Vec<TaskInstance>> {
    let split = leave_one_out_split(
        log,
        TaskKind::Matching,
        vocab,
        &SplitOptions { num_negatives, seed },
    )?;
    let mut out = split.train;
    out.extend(split.val);
    out.extend(split.test);
    Ok(out)
}

/// Standalone explanation-instance construction, with the skip count.
pub fn build_explanation_instances(
    log: &InteractionLog,
    vocab: &Vocab,
) -> Result<(Vec<TaskInstance>, usize)> {
    let mut out = Vec::new();
    let mut skipped = 0usize;
    for (user_str, recs) in log.per_user() {
        let user = token_of(vocab, user_str)?;
        for rec in recs {
            match explanation_instance(user, rec, vocab)? {
                Some(inst) => out.push(inst),
                None => skipped += 1,
            }
        }
    }
    Ok((out, skipped))
}

/// Per-user views of a split: index lists into `split.train` and
/// `split.val`. Every index belongs to exactly one user, so the slices are
/// pairwise disjoint and their union is the whole split.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct UserPartition {
    pub users: BTreeMap<TokenId, UserSlices>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct UserSlices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

pub fn partition_by_user(split: &SplitDataset) -> UserPartition {
    let mut users: BTreeMap<TokenId, UserSlices> = BTreeMap::new();
    for (i, inst) in split.train.iter().enumerate() {
        users.entry(inst.user).or_default().train.push(i);
    }
    for (i, inst) in split.val.iter().enumerate() {
        users.entry(inst.user).or_default().val.push(i);
    }
    UserPartition { users }
}
