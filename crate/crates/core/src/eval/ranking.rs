//! Hit ratio and NDCG over ranked item predictions.

use crate::error::{Error, Result};
use crate::vocab::TokenId;

/// Ordered item predictions, one list per instance. Lists are already
/// deduplicated and ordered by decode log-probability.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RankedOutputs {
    pub lists: Vec<Vec<TokenId>>,
}

fn check_paired(ranked: &RankedOutputs, targets: &[TokenId], k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if ranked.lists.len() != targets.len() {
        return Err(Error::InvalidArgument(format!(
            "{} ranked lists paired with {} targets",
            ranked.lists.len(),
            targets.len()
        )));
    }
    Ok(())
}

/// Fraction of instances whose target appears in the top `k` predictions.
/// An empty corpus scores zero.
pub fn hit_rate_at_k(ranked: &RankedOutputs, targets: &[TokenId], k: usize) -> Result<f64> {
    check_paired(ranked, targets, k)?;
    let hits = ranked
        .lists
        .iter()
        .zip(targets)
        .filter(|(list, target)| list.iter().take(k).any(|x| x == *target))
        .count();
    Ok(hits as f64 / targets.len().max(1) as f64)
}

/// Single-relevant NDCG: an instance scores 1/log2(rank+1) when its target
/// sits at 1-based rank <= k, zero otherwise; the corpus value is the mean.
pub fn ndcg_at_k(ranked: &RankedOutputs, targets: &[TokenId], k: usize) -> Result<f64> {
    check_paired(ranked, targets, k)?;
    let total: f64 = ranked
        .lists
        .iter()
        .zip(targets)
        .map(|(list, target)| match list.iter().take(k).position(|x| x == target) {
            Some(i) => 1.0 / ((i + 2) as f64).log2(),
            None => 0.0,
        })
        .sum();
    Ok(total / targets.len().max(1) as f64)
}
