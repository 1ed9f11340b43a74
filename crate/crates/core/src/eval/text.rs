//! Corpus BLEU and per-pair ROUGE over token sequences.
//!
//! Both metrics are generic over the token type so they apply equally to
//! vocabulary ids and to plain string fixtures in tests.

use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RougeVariant {
    R1,
    R2,
    RL,
}

fn check_corpus<T>(hyps: &[Vec<T>], refs: &[Vec<T>]) -> Result<()> {
    if hyps.len() != refs.len() {
        return Err(Error::InvalidArgument(format!(
            "{} hypotheses paired with {} references",
            hyps.len(),
            refs.len()
        )));
    }
    if hyps.is_empty() {
        return Err(Error::InvalidArgument("empty text corpus".into()));
    }
    Ok(())
}

fn ngram_counts<T: Eq + Hash>(seq: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    if seq.len() >= n {
        for window in seq.windows(n) {
            *counts.entry(window).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus-level BLEU over n-gram orders 1..=4: the geometric mean of the
/// modified (reference-clipped) precisions times the brevity penalty. No
/// smoothing, so an order with zero matches anywhere zeroes the score.
pub fn bleu4<T: Eq + Hash>(hyps: &[Vec<T>], refs: &[Vec<T>]) -> Result<f64> {
    check_corpus(hyps, refs)?;
    let hyp_len: usize = hyps.iter().map(Vec::len).sum();
    let ref_len: usize = refs.iter().map(Vec::len).sum();
    if hyp_len == 0 {
        return Ok(0.0);
    }

    let mut log_precision_sum = 0.0;
    for n in 1..=4 {
        let mut clipped = 0usize;
        let mut total = 0usize;
        for (hyp, reference) in hyps.iter().zip(refs) {
            let ref_counts = ngram_counts(reference, n);
            for (gram, count) in ngram_counts(hyp, n) {
                clipped += count.min(ref_counts.get(gram).copied().unwrap_or(0));
                total += count;
            }
        }
        if clipped == 0 || total == 0 {
            return Ok(0.0);
        }
        log_precision_sum += (clipped as f64 / total as f64).ln();
    }

    let brevity = if hyp_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    Ok(brevity * (log_precision_sum / 4.0).exp())
}

/// Mean per-pair ROUGE F1 over the corpus. A pair where neither side has an
/// n-gram (or token, for RL) scores 1; one-sided emptiness scores 0.
pub fn rouge<T: Eq + Hash>(hyps: &[Vec<T>], refs: &[Vec<T>], variant: RougeVariant) -> Result<f64> {
    check_corpus(hyps, refs)?;
    let total: f64 = hyps
        .iter()
        .zip(refs)
        .map(|(h, r)| match variant {
            RougeVariant::R1 => ngram_f1(h, r, 1),
            RougeVariant::R2 => ngram_f1(h, r, 2),
            RougeVariant::RL => f1(lcs_len(h, r), h.len(), r.len()),
        })
        .sum();
    Ok(total / hyps.len() as f64)
}

fn f1(matches: usize, hyp_total: usize, ref_total: usize) -> f64 {
    if hyp_total == 0 && ref_total == 0 {
        return 1.0;
    }
    if matches == 0 {
        return 0.0;
    }
    let p = matches as f64 / hyp_total as f64;
    let r = matches as f64 / ref_total as f64;
    2.0 * p * r / (p + r)
}

fn ngram_f1<T: Eq + Hash>(hyp: &[T], reference: &[T], n: usize) -> f64 {
    let hyp_counts = ngram_counts(hyp, n);
    let ref_counts = ngram_counts(reference, n);
    let hyp_total: usize = hyp_counts.values().sum();
    let ref_total: usize = ref_counts.values().sum();
    let matches: usize = hyp_counts
        .iter()
        .map(|(gram, count)| (*count).min(ref_counts.get(gram).copied().unwrap_or(0)))
        .sum();
    f1(matches, hyp_total, ref_total)
}

/// Longest common subsequence length, rolling-row dynamic program.
fn lcs_len<T: Eq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}
