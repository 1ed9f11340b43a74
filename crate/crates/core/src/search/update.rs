//! Criterion evaluation and the per-epoch token replacement operations.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::data::TaskInstance;
use crate::error::{Error, Result};
use crate::eval::{evaluate_prompt, surrogate_score, MetricsReport};
use crate::model::FrozenSeq2Seq;
use crate::prompt::{render, PromptTemplate, TriggerAssignment};
use crate::vocab::{TokenId, Vocab};

use super::candidates::{candidate_tokens, SlotRef};
use super::{EpochKind, EpochLog, SearchConfig, SelectionCriterion};

/// Sums the loss gradient w.r.t. the embedding fed into task slot `slot`
/// over the rendered training instances. `subsample` draws that many
/// instances with the given seed; the sum is not normalized, matching the
/// convention that doubling the data doubles the gradient.
pub fn accumulate_task_gradient(
    model: &FrozenSeq2Seq,
    instances: &[TaskInstance],
    template: &PromptTemplate,
    assignment: &TriggerAssignment,
    slot: usize,
    subsample: Option<usize>,
    seed: u64,
) -> Result<Vec<f64>> {
    if slot >= template.num_task_slots {
        return Err(Error::InvalidArgument(format!(
            "slot {slot} out of range for {} task slots",
            template.num_task_slots
        )));
    }
    accumulate_gradient(model, instances, template, assignment, subsample, seed, |seq| {
        Ok(seq.trigger_positions[slot])
    })
}

/// Same accumulation at the rendered user slot. User-token gradients are
/// always taken over the full per-user training data, unbatched.
fn accumulate_user_gradient(
    model: &FrozenSeq2Seq,
    instances: &[TaskInstance],
    template: &PromptTemplate,
    assignment: &TriggerAssignment,
) -> Result<Vec<f64>> {
    accumulate_gradient(model, instances, template, assignment, None, 0, |seq| {
        seq.user_position
            .ok_or_else(|| Error::InvalidArgument("template has no user slot".into()))
    })
}

fn accumulate_gradient(
    model: &FrozenSeq2Seq,
    instances: &[TaskInstance],
    template: &PromptTemplate,
    assignment: &TriggerAssignment,
    subsample: Option<usize>,
    seed: u64,
    position: impl Fn(&crate::model::TokenSequence) -> Result<usize>,
) -> Result<Vec<f64>> {
    if instances.is_empty() {
        return Err(Error::InvalidArgument("cannot accumulate a gradient over no instances".into()));
    }
    let mut indices: Vec<usize> = match subsample {
        Some(m) if m < instances.len() => {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rand::seq::index::sample(&mut rng, instances.len(), m).into_vec()
        }
        _ => (0..instances.len()).collect(),
    };
    indices.sort_unstable();

    let mut acc = vec![0.0; model.config().embed_dim];
    for i in indices {
        let inst = &instances[i];
        let seq = render(template, &inst.args, assignment, inst.user)?;
        let pos = position(&seq)?;
        let rows = model.input_embedding_gradients(&seq, &inst.target, &[pos])?;
        for (a, g) in acc.iter_mut().zip(&rows[0]) {
            *a += g;
        }
    }
    Ok(acc)
}

/// Mean per-instance generation loss of the rendered prompts.
pub fn mean_instance_loss(
    model: &FrozenSeq2Seq,
    instances: &[TaskInstance],
    template: &PromptTemplate,
    assignment: &TriggerAssignment,
) -> Result<f64> {
    if instances.is_empty() {
        return Err(Error::InvalidArgument("cannot average a loss over no instances".into()));
    }
    let mut total = 0.0;
    for inst in instances {
        let seq = render(template, &inst.args, assignment, inst.user)?;
        total += model.forward_loss(&seq, &inst.target)?;
    }
    Ok(total / instances.len() as f64)
}

/// Scalar quality of an assignment on `instances`; higher is better for
/// every criterion. TrainLoss negates the mean loss; the metric criteria
/// scalarize an evaluation pass at their respective beam widths.
pub fn evaluate_criterion(
    criterion: SelectionCriterion,
    model: &FrozenSeq2Seq,
    instances: &[TaskInstance],
    template: &PromptTemplate,
    assignment: &TriggerAssignment,
    vocab: &Vocab,
    config: &SearchConfig,
) -> Result<f64> {
    let beam = match criterion {
        SelectionCriterion::TrainLoss => {
            return Ok(-mean_instance_loss(model, instances, template, assignment)?)
        }
        SelectionCriterion::SurrogateMetric => config.surrogate_beam,
        SelectionCriterion::FullMetric => config.test_beam,
    };
    let report =
        evaluate_prompt(model, instances, template, assignment, vocab, beam, 1, config.seed)?;
    Ok(surrogate_score(&report.values, template.task_kind, config.alpha))
}

/// Validation metrics with the surrogate recomputed under the configured
/// balance coefficient.
pub(super) fn val_report(
    model: &FrozenSeq2Seq,
    instances: &[TaskInstance],
    template: &PromptTemplate,
    assignment: &TriggerAssignment,
    vocab: &Vocab,
    config: &SearchConfig,
) -> Result<MetricsReport> {
    let mut report = evaluate_prompt(
        model,
        instances,
        template,
        assignment,
        vocab,
        config.surrogate_beam,
        1,
        config.seed,
    )?;
    report.surrogate = surrogate_score(&report.values, template.task_kind, config.alpha);
    Ok(report)
}

/// Picks the criterion argmax among `tokens`, ties broken by ascending
/// token id. Each token is tried in `slot` of a scratch assignment.
fn select_token(
    tokens: &[TokenId],
    set_token: &mut impl FnMut(TokenId) -> TriggerAssignment,
    criterion_data: &[TaskInstance],
    model: &FrozenSeq2Seq,
    template: &PromptTemplate,
    vocab: &Vocab,
    config: &SearchConfig,
) -> Result<(TokenId, f64)> {
    let mut best: Option<(TokenId, f64)> = None;
    for &tok in tokens {
        let trial = set_token(tok);
        let score = evaluate_criterion(
            config.criterion,
            model,
            criterion_data,
            template,
            &trial,
            vocab,
            config,
        )?;
        let replace = match best {
            None => true,
            Some((bt, bs)) => score > bs || (score == bs && tok < bt),
        };
        if replace {
            best = Some((tok, score));
        }
    }
    best.ok_or_else(|| Error::InvalidArgument("no tokens to select from".into()))
}

/// One task-token round: pick a random slot, build its candidate set from
/// the training gradient, install the criterion argmax (incumbent included
/// when configured). At most one slot changes.
#[allow(clippy::too_many_arguments)]
pub fn update_task_token(
    model: &FrozenSeq2Seq,
    train: &[TaskInstance],
    val: &[TaskInstance],
    template: &PromptTemplate,
    assignment: &TriggerAssignment,
    vocab: &Vocab,
    config: &SearchConfig,
    epoch: usize,
    rng: &mut ChaCha20Rng,
) -> Result<(TriggerAssignment, EpochLog)> {
    template.validate()?;
    let slot = rng.gen_range(0..template.num_task_slots);
    let subsample_seed = rng.gen::<u64>();
    let grad = accumulate_task_gradient(
        model,
        train,
        template,
        assignment,
        slot,
        config.train_subsample,
        subsample_seed,
    )?;
    let set = candidate_tokens(
        SlotRef::Task(slot),
        &grad,
        &model.parameters().embedding,
        config.k,
        &BTreeSet::new(),
    )?;

    let incumbent = assignment.task_tokens[slot];
    let mut tokens: Vec<TokenId> = set.tokens().collect();
    if config.include_current_token && !tokens.contains(&incumbent) {
        tokens.push(incumbent);
    }
    let criterion_data =
        if config.criterion == SelectionCriterion::TrainLoss { train } else { val };
    let mut scratch = assignment.clone();
    let (chosen, criterion_score) = select_token(
        &tokens,
        &mut |tok| {
            scratch.task_tokens[slot] = tok;
            scratch.clone()
        },
        criterion_data,
        model,
        template,
        vocab,
        config,
    )?;

    let mut next = assignment.clone();
    next.task_tokens[slot] = chosen;
    let val_metrics = val_report(model, val, template, &next, vocab, config)?;
    let log = EpochLog {
        epoch,
        kind: EpochKind::TaskToken,
        position: SlotRef::Task(slot),
        previous_token: incumbent,
        chosen_token: chosen,
        criterion_score,
        val_metrics,
    };
    Ok((next, log))
}

/// One user-token round: every user with training and validation data gets
/// an independent candidate set from their own gradient and the criterion
/// argmax on their own validation slice. Users without data keep their
/// token and produce no log entry.
#[allow(clippy::too_many_arguments)]
pub fn update_user_tokens(
    model: &FrozenSeq2Seq,
    train: &[TaskInstance],
    val: &[TaskInstance],
    template: &PromptTemplate,
    assignment: &TriggerAssignment,
    vocab: &Vocab,
    config: &SearchConfig,
    epoch: usize,
) -> Result<(TriggerAssignment, Vec<EpochLog>)> {
    if !template.has_user_slot {
        return Err(Error::InvalidArgument("template has no user slot to update".into()));
    }

    let mut by_user: BTreeMap<TokenId, (Vec<TaskInstance>, Vec<TaskInstance>)> = BTreeMap::new();
    for inst in train {
        by_user.entry(inst.user).or_default().0.push(inst.clone());
    }
    for inst in val {
        by_user.entry(inst.user).or_default().1.push(inst.clone());
    }

    let mut next = assignment.clone();
    let mut logs = Vec::new();
    for (user, (d_train, d_val)) in &by_user {
        if d_train.is_empty() || d_val.is_empty() {
            continue;
        }
        let grad = accumulate_user_gradient(model, d_train, template, &next)?;
        let set = candidate_tokens(
            SlotRef::User(*user),
            &grad,
            &model.parameters().embedding,
            config.k,
            &BTreeSet::new(),
        )?;
        let incumbent = next.user_token(*user);
        let mut tokens: Vec<TokenId> = set.tokens().collect();
        if config.include_current_token && !tokens.contains(&incumbent) {
            tokens.push(incumbent);
        }
        let criterion_data: &[TaskInstance] =
            if config.criterion == SelectionCriterion::TrainLoss { d_train } else { d_val };
        let mut scratch = next.clone();
        let (chosen, criterion_score) = select_token(
            &tokens,
            &mut |tok| {
                scratch.user_tokens.insert(*user, tok);
                scratch.clone()
            },
            criterion_data,
            model,
            template,
            vocab,
            config,
        )?;
        next.user_tokens.insert(*user, chosen);
        let val_metrics = val_report(model, d_val, template, &next, vocab, config)?;
        logs.push(EpochLog {
            epoch,
            kind: EpochKind::UserToken,
            position: SlotRef::User(*user),
            previous_token: incumbent,
            chosen_token: chosen,
            criterion_score,
            val_metrics,
        });
    }
    Ok((next, logs))
}
