//! Gradient-guided discrete prompt search.
//!
//! Every epoch replaces at most one trigger token per slot owner: task
//! epochs pick one shared slot at random, user epochs sweep all users with
//! data. Candidates come from a first-order loss approximation at the
//! slot's rendered position; the installed token is whichever candidate
//! (plus the incumbent, by default) scores best under the selection
//! criterion. A checkpoint tracks the best validation surrogate seen.

mod candidates;
mod update;

pub use candidates::{approx_loss_change, candidate_tokens, CandidateSet, SlotRef};
pub use update::{
    accumulate_task_gradient, evaluate_criterion, mean_instance_loss, update_task_token,
    update_user_tokens,
};

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::data::SplitDataset;
use crate::error::{Error, Result};
use crate::eval::{default_alpha, MetricsReport};
use crate::model::FrozenSeq2Seq;
use crate::prompt::{PromptTemplate, TaskKind, TriggerAssignment};
use crate::vocab::{TokenId, Vocab};

/// How replacement candidates are ranked against each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionCriterion {
    /// Negative mean generation loss on the training slice.
    TrainLoss,
    /// Validation surrogate metric at the narrow search beam.
    SurrogateMetric,
    /// Validation surrogate at the full test beam (ablation use).
    FullMetric,
}

impl SelectionCriterion {
    pub const ALL: [SelectionCriterion; 3] = [
        SelectionCriterion::TrainLoss,
        SelectionCriterion::SurrogateMetric,
        SelectionCriterion::FullMetric,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SelectionCriterion::TrainLoss => "train_loss",
            SelectionCriterion::SurrogateMetric => "surrogate_metric",
            SelectionCriterion::FullMetric => "full_metric",
        }
    }
}

impl fmt::Display for SelectionCriterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SelectionCriterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<SelectionCriterion> {
        SelectionCriterion::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown selection criterion {s:?}")))
    }
}

/// Knobs for one search run. `alpha` balances the secondary metric inside
/// the surrogate; `train_subsample` caps how many training instances feed
/// each task-gradient accumulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub k: usize,
    pub max_epochs: usize,
    pub criterion: SelectionCriterion,
    pub surrogate_beam: usize,
    pub test_beam: usize,
    pub alpha: f64,
    pub include_current_token: bool,
    pub train_subsample: Option<usize>,
    pub seed: u64,
}

impl SearchConfig {
    /// Defaults: top-5 candidates, 50 epochs, surrogate selection, beams
    /// 5/20, task-appropriate alpha, incumbent always considered.
    pub fn for_task(task: TaskKind) -> SearchConfig {
        SearchConfig {
            k: 5,
            max_epochs: 50,
            criterion: SelectionCriterion::SurrogateMetric,
            surrogate_beam: 5,
            test_beam: 20,
            alpha: default_alpha(task),
            include_current_token: true,
            train_subsample: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidArgument("candidate count k must be at least 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidArgument("max_epochs must be at least 1".into()));
        }
        if self.surrogate_beam > self.test_beam {
            return Err(Error::InvalidArgument(format!(
                "surrogate beam {} exceeds test beam {}",
                self.surrogate_beam, self.test_beam
            )));
        }
        if !self.alpha.is_finite() {
            return Err(Error::InvalidArgument("alpha must be finite".into()));
        }
        if self.train_subsample == Some(0) {
            return Err(Error::InvalidArgument("train_subsample cannot be zero".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpochKind {
    TaskToken,
    UserToken,
}

impl fmt::Display for EpochKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EpochKind::TaskToken => "task",
            EpochKind::UserToken => "user",
        })
    }
}

/// One logged token-replacement event. Task epochs produce one entry; user
/// epochs produce one per user that had data. `val_metrics` covers the full
/// validation set for task entries and the user's own slice for user
/// entries; its surrogate uses the configured alpha.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub kind: EpochKind,
    pub position: SlotRef,
    pub previous_token: TokenId,
    pub chosen_token: TokenId,
    pub criterion_score: f64,
    pub val_metrics: MetricsReport,
}

/// The best assignment seen so far, by full-validation surrogate. Epoch 0
/// is the untouched initial assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct BestPromptCheckpoint {
    pub assignment: TriggerAssignment,
    pub val_score: f64,
    pub epoch: usize,
}

/// Runs the full search: task epochs only for non-personalized templates,
/// strict task/user alternation (task first) for personalized ones. After
/// every epoch the full-validation surrogate is compared against the best
/// checkpoint, replacing it only on strict improvement. The backbone must
/// come out bit-identical.
pub fn run_search(
    model: &FrozenSeq2Seq,
    splits: &SplitDataset,
    template: &PromptTemplate,
    initial: TriggerAssignment,
    vocab: &Vocab,
    config: &SearchConfig,
) -> Result<(BestPromptCheckpoint, Vec<EpochLog>)> {
    config.validate()?;
    template.validate()?;
    initial.validate_for(template, vocab)?;
    if splits.task_kind != template.task_kind {
        return Err(Error::InvalidArgument(format!(
            "split is for the {} task but the template is for {}",
            splits.task_kind, template.task_kind
        )));
    }
    if splits.train.is_empty() || splits.val.is_empty() {
        return Err(Error::InvalidArgument("search needs non-empty train and val splits".into()));
    }

    let checksum_before = model.parameter_checksum();
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut current = initial;

    let init_report = update::val_report(model, &splits.val, template, &current, vocab, config)?;
    let mut best = BestPromptCheckpoint {
        assignment: current.clone(),
        val_score: init_report.surrogate,
        epoch: 0,
    };
    let mut logs: Vec<EpochLog> = Vec::new();

    for epoch in 1..=config.max_epochs {
        let user_epoch = template.has_user_slot && epoch % 2 == 0;
        let epoch_score = if user_epoch {
            let (next, user_logs) = update_user_tokens(
                model,
                &splits.train,
                &splits.val,
                template,
                &current,
                vocab,
                config,
                epoch,
            )?;
            current = next;
            logs.extend(user_logs);
            // Per-user logs carry per-user metrics; checkpointing always
            // compares on the full validation set.
            update::val_report(model, &splits.val, template, &current, vocab, config)?.surrogate
        } else {
            let (next, log) = update_task_token(
                model,
                &splits.train,
                &splits.val,
                template,
                &current,
                vocab,
                config,
                epoch,
                &mut rng,
            )?;
            current = next;
            let score = log.val_metrics.surrogate;
            logs.push(log);
            score
        };
        if epoch_score > best.val_score {
            best = BestPromptCheckpoint {
                assignment: current.clone(),
                val_score: epoch_score,
                epoch,
            };
        }
    }

    assert_eq!(
        model.parameter_checksum(),
        checksum_before,
        "backbone weights changed during prompt search"
    );
    Ok((best, logs))
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use crate::data::{SkipReport, TaskInstance};
    use crate::model::ModelConfig;
    use crate::prompt::TaskArgs;

    pub fn vocab() -> Vocab {
        let users: Vec<String> = ["ua", "ub"].iter().map(|s| s.to_string()).collect();
        let items: Vec<String> = (0..8).map(|i| format!("i{i}")).collect();
        let words: Vec<&str> = vec!["w0", "w1", "w2", "w3", "w4", "w5"];
        Vocab::build(&users, &items, &words).unwrap()
    }

    pub fn model(vocab: &Vocab, seed: u64) -> FrozenSeq2Seq {
        FrozenSeq2Seq::new(ModelConfig {
            vocab_size: vocab.len(),
            embed_dim: 8,
            num_encoder_layers: 1,
            num_decoder_layers: 1,
            num_heads: 2,
            feedforward_dim: 16,
            max_seq_len: 24,
            seed,
        })
        .unwrap()
    }

    /// Two users, three rolling train instances and one val instance each.
    pub fn splits(vocab: &Vocab) -> SplitDataset {
        let users: Vec<TokenId> = vocab.users().collect();
        let items: Vec<TokenId> = vocab.items().collect();
        let mut train = Vec::new();
        let mut val = Vec::new();
        let mut test = Vec::new();
        for (u, &user) in users.iter().enumerate() {
            let seq: Vec<TokenId> = (0..6).map(|j| items[(u * 2 + j) % items.len()]).collect();
            for j in 1..4 {
                train.push(TaskInstance {
                    user,
                    args: TaskArgs::for_items(user, seq[..j].to_vec()),
                    target: vec![seq[j]],
                });
            }
            val.push(TaskInstance {
                user,
                args: TaskArgs::for_items(user, seq[..4].to_vec()),
                target: vec![seq[4]],
            });
            test.push(TaskInstance {
                user,
                args: TaskArgs::for_items(user, seq[..5].to_vec()),
                target: vec![seq[5]],
            });
        }
        SplitDataset {
            task_kind: TaskKind::Sequential,
            train,
            val,
            test,
            skips: SkipReport::default(),
        }
    }

    pub fn quick_config(criterion: SelectionCriterion, max_epochs: usize) -> SearchConfig {
        SearchConfig {
            k: 3,
            max_epochs,
            criterion,
            surrogate_beam: 5,
            test_beam: 8,
            alpha: 1.0,
            include_current_token: true,
            train_subsample: None,
            seed: 11,
        }
    }
}
