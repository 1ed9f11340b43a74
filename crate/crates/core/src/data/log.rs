//! Interaction records and their line-oriented file format.

use std::collections::BTreeSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::vocab::{Vocab, WORDS};

/// One user-item interaction. Ids are strings here; they become vocabulary
/// tokens only after [`build_vocab`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interaction {
    pub user: String,
    pub item: String,
    /// Integer epoch seconds; per-user order ties break by file order.
    pub timestamp: i64,
    pub rating: Option<i64>,
    pub explanation: Option<Vec<String>>,
}

/// All interactions, grouped by user and sorted by timestamp within each
/// user (stable, so equal timestamps keep file order).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct InteractionLog {
    records: Vec<Interaction>,
}

impl InteractionLog {
    /// Sorts records into the canonical order: users ascending, then
    /// per-user timestamps ascending with input order breaking ties.
    pub fn new(mut records: Vec<Interaction>) -> InteractionLog {
        let mut keyed: Vec<(usize, Interaction)> = records.drain(..).enumerate().collect();
        keyed.sort_by(|(ai, a), (bi, b)| {
            a.user
                .cmp(&b.user)
                .then(a.timestamp.cmp(&b.timestamp))
                .then(ai.cmp(bi))
        });
        InteractionLog { records: keyed.into_iter().map(|(_, r)| r).collect() }
    }

    pub fn records(&self) -> &[Interaction] {
        &self.records
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    /// Distinct user ids in ascending order.
    pub fn user_ids(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.records {
            if out.last() != Some(&r.user.as_str()) {
                out.push(&r.user);
            }
        }
        out
    }

    /// Per-user interaction runs, in user order. Each run is a contiguous
    /// slice of the canonical record order.
    pub fn per_user(&self) -> Vec<(&str, &[Interaction])> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.records.len() {
            if i == self.records.len() || self.records[i].user != self.records[start].user {
                out.push((self.records[start].user.as_str(), &self.records[start..i]));
                start = i;
            }
        }
        out
    }
}

/// Vocabulary covering the log: its users and items, the built-in word list,
/// and any explanation words the log uses beyond it. User and item ids win
/// collisions with the word list: a word spelled like an id is dropped from
/// the word section and tokenizes to the id.
pub fn build_vocab(log: &InteractionLog) -> Result<Vocab> {
    let mut users: Vec<String> = log.records().iter().map(|r| r.user.clone()).collect();
    users.sort();
    users.dedup();
    let mut items: Vec<String> = log.records().iter().map(|r| r.item.clone()).collect();
    items.sort();
    items.dedup();
    let ids: BTreeSet<&str> =
        users.iter().chain(items.iter()).map(String::as_str).collect();

    let known: BTreeSet<&str> = WORDS.iter().copied().collect();
    let mut extra: BTreeSet<&str> = BTreeSet::new();
    for r in log.records() {
        if let Some(words) = &r.explanation {
            for w in words {
                if !known.contains(w.as_str()) && !ids.contains(w.as_str()) {
                    extra.insert(w);
                }
            }
        }
    }
    let mut words: Vec<&str> =
        WORDS.iter().copied().filter(|w| !ids.contains(w)).collect();
    words.extend(extra);
    Vocab::build(&users, &items, &words)
}

/// Loads tab-separated interactions: `user  item  timestamp  [rating]
/// [explanation words…]`. A numeric fourth field is a rating; otherwise the
/// explanation starts there. `#` lines are comments. `min_timestamp` drops
/// older records at load time.
pub fn load_interactions(path: &Path, min_timestamp: Option<i64>) -> Result<InteractionLog> {
    let text = std::fs::read_to_string(path)?;
    let mut seen: BTreeSet<(String, String, i64)> = BTreeSet::new();
    let mut records = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end();
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected at least 3 tab-separated fields, got {}", fields.len()),
            });
        }
        let user = fields[0].trim().to_string();
        let item = fields[1].trim().to_string();
        if user.is_empty() || item.is_empty() {
            return Err(Error::Parse { line: line_no, message: "empty user or item id".into() });
        }
        let timestamp: i64 = fields[2].trim().parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("timestamp {:?} is not an integer", fields[2]),
        })?;

        let mut rating = None;
        let mut expl_start = 3;
        if fields.len() > 3 {
            if let Ok(r) = fields[3].trim().parse::<i64>() {
                rating = Some(r);
                expl_start = 4;
            }
        }
        let explanation = if fields.len() > expl_start {
            let words: Vec<String> = fields[expl_start..]
                .iter()
                .flat_map(|f| f.split_whitespace())
                .map(str::to_string)
                .collect();
            if words.is_empty() { None } else { Some(words) }
        } else {
            None
        };

        if !seen.insert((user.clone(), item.clone(), timestamp)) {
            return Err(Error::Parse {
                line: line_no,
                message: format!("duplicate interaction ({user}, {item}, {timestamp})"),
            });
        }
        if min_timestamp.is_some_and(|cut| timestamp < cut) {
            continue;
        }
        records.push(Interaction { user, item, timestamp, rating, explanation });
    }
    Ok(InteractionLog::new(records))
}

/// Writes the canonical record order in the [`load_interactions`] format.
/// Identical logs produce byte-identical files.
pub fn save_interactions(log: &InteractionLog, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("# user\titem\ttimestamp\t[rating]\t[explanation]\n");
    for r in log.records() {
        out.push_str(&format!("{}\t{}\t{}", r.user, r.item, r.timestamp));
        if let Some(rating) = r.rating {
            out.push_str(&format!("\t{rating}"));
        }
        if let Some(words) = &r.explanation {
            out.push('\t');
            out.push_str(&words.join(" "));
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}
