//! First-order loss approximation and gradient-guided candidate sets.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::vocab::{TokenId, NUM_SPECIALS};

/// Which trigger slot a candidate set or update refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotRef {
    /// Task slot index into the template's trigger positions.
    Task(usize),
    /// The user slot, keyed by the user whose token is being replaced.
    User(TokenId),
}

impl std::fmt::Display for SlotRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SlotRef::Task(i) => write!(f, "task[{i}]"),
            SlotRef::User(u) => write!(f, "user[{}]", u.0),
        }
    }
}

/// Replacement candidates for one slot: tokens with their scores -e'.g,
/// sorted descending, ties broken by ascending token id. Higher score means
/// a larger predicted loss decrease.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub slot: SlotRef,
    pub entries: Vec<(TokenId, f64)>,
}

impl CandidateSet {
    pub fn tokens(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.entries.iter().map(|&(t, _)| t)
    }
}

/// First-order estimate of the loss change from swapping one input
/// embedding: (e_new - e_old) . grad.
pub fn approx_loss_change(grad: &[f64], e_old: &[f64], e_new: &[f64]) -> Result<f64> {
    if grad.len() != e_old.len() || grad.len() != e_new.len() {
        return Err(Error::InvalidArgument(format!(
            "dimension mismatch: grad {}, old {}, new {}",
            grad.len(),
            e_old.len(),
            e_new.len()
        )));
    }
    Ok(grad.iter().zip(e_old).zip(e_new).map(|((g, o), n)| (n - o) * g).sum())
}

/// Top-k replacement tokens by -e'.g over the vocabulary, skipping special
/// tokens and everything in `exclude`.
pub fn candidate_tokens(
    slot: SlotRef,
    grad: &[f64],
    embedding: &Matrix,
    k: usize,
    exclude: &BTreeSet<TokenId>,
) -> Result<CandidateSet> {
    if k == 0 {
        return Err(Error::InvalidArgument("candidate count k must be at least 1".into()));
    }
    if grad.len() != embedding.cols() {
        return Err(Error::InvalidArgument(format!(
            "gradient has {} coordinates but embeddings have {}",
            grad.len(),
            embedding.cols()
        )));
    }
    let mut entries: Vec<(TokenId, f64)> = Vec::with_capacity(embedding.rows());
    for row in 0..embedding.rows() {
        let id = TokenId(row as u32);
        if id.0 < NUM_SPECIALS || exclude.contains(&id) {
            continue;
        }
        let mut score: f64 = -embedding.row(row).iter().zip(grad).map(|(e, g)| e * g).sum::<f64>();
        if score == 0.0 {
            // Normalize -0.0 so exact-zero scores tie by id instead of
            // splitting on sign bit.
            score = 0.0;
        }
        if !score.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "candidate score for token {} is not finite",
                id.0
            )));
        }
        entries.push((id, score));
    }
    if entries.len() < k {
        return Err(Error::InvalidArgument(format!(
            "only {} eligible tokens for k = {k}",
            entries.len()
        )));
    }
    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    entries.truncate(k);
    Ok(CandidateSet { slot, entries })
}
