//! Seeded synthetic interaction generator.
//!
//! Items fall into ten latent clusters (item index mod 10). Each user walks
//! the clusters with a fixed stride, usually stepping to the next cluster on
//! schedule, so the next item is predictable from the history and the user.
//! Every user sequence is repeat-free, which keeps the leave-one-out split
//! leakage-free by construction.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::log::{Interaction, InteractionLog};
use crate::error::{Error, Result};
use crate::prompt::TaskKind;

pub const NUM_CLUSTERS: usize = 10;
/// Chance of following the user's stride to the scheduled next cluster.
const FOLLOW_PROB: f64 = 0.9;

/// Per-cluster title adjectives, title nouns, and explanation adjectives.
const STYLE: [&str; NUM_CLUSTERS] = [
    "epic", "dark", "gentle", "practical", "witty", "ancient", "cryptic", "loud", "quiet",
    "strange",
];
const KIND: [&str; NUM_CLUSTERS] = [
    "saga", "thriller", "ballad", "manual", "comedy", "chronicle", "mystery", "anthem", "memoir",
    "fable",
];
const FEEL: [&str; NUM_CLUSTERS] = [
    "thrilling", "haunting", "soothing", "useful", "hilarious", "sweeping", "puzzling", "rousing",
    "tender", "odd",
];
const STRENGTH: [&str; 5] = ["really", "truly", "quite", "deeply", "mostly"];
const OPINION: [&str; 4] = ["love", "enjoy", "like", "admire"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthConfig {
    pub num_users: usize,
    pub num_items: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { num_users: 200, num_items: 100, min_len: 5, max_len: 12, seed: 17 }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.min_len < 3 {
            return Err(Error::InvalidArgument(
                "min_len must be at least 3 so every user survives the split".into(),
            ));
        }
        if self.max_len < self.min_len {
            return Err(Error::InvalidArgument("max_len must be at least min_len".into()));
        }
        if self.num_users == 0 {
            return Err(Error::InvalidArgument("num_users must be positive".into()));
        }
        // Repeat-free sequences need at least max_len items, and the cluster
        // structure needs at least one item per cluster.
        if self.num_items < self.max_len.max(NUM_CLUSTERS) {
            return Err(Error::InvalidArgument(format!(
                "num_items {} is below max({}, {})",
                self.num_items,
                self.max_len,
                NUM_CLUSTERS
            )));
        }
        Ok(())
    }
}

fn id_width(n: usize) -> usize {
    n.saturating_sub(1).to_string().len().max(2)
}

pub fn user_name(idx: usize, num_users: usize) -> String {
    format!("user_{idx:0width$}", width = id_width(num_users))
}

pub fn item_name(idx: usize, num_items: usize) -> String {
    format!("item_{idx:0width$}", width = id_width(num_items))
}

/// The two-word title of an item, derived from the trailing digits of its id
/// (cluster = index mod 10). Ids without trailing digits have no title.
pub fn title_for_item(item_id: &str) -> Option<[&'static str; 2]> {
    let digits: String =
        item_id.chars().rev().take_while(char::is_ascii_digit).collect::<String>();
    if digits.is_empty() {
        return None;
    }
    let idx: usize = digits.chars().rev().collect::<String>().parse().ok()?;
    let c = idx % NUM_CLUSTERS;
    Some([STYLE[c], KIND[c]])
}

/// Hand-written bootstrap prompt suffix for each task. The backbone is
/// trained with these words; they double as the manual baseline in
/// evaluation reports.
pub fn manual_prompt_words(task: TaskKind) -> &'static [&'static str] {
    match task {
        TaskKind::Sequential => &["recommend", "the", "next", "item"],
        TaskKind::Matching => &["select", "the", "best", "candidate"],
        TaskKind::Explanation => &["explain", "the", "reason"],
    }
}

/// Generates the interaction log. Identical configs give identical logs.
pub fn synth_generate(config: &SynthConfig) -> Result<InteractionLog> {
    config.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut records = Vec::new();

    // Items of each cluster, by item index.
    let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); NUM_CLUSTERS];
    for i in 0..config.num_items {
        clusters[i % NUM_CLUSTERS].push(i);
    }

    for u in 0..config.num_users {
        let stride = rng.gen_range(1..=3usize);
        let mut cluster = rng.gen_range(0..NUM_CLUSTERS);
        let opinion = OPINION[rng.gen_range(0..OPINION.len())];
        let len = rng.gen_range(config.min_len..=config.max_len);

        let mut used = vec![false; config.num_items];
        for step in 0..len {
            if step > 0 {
                cluster = if rng.gen_bool(FOLLOW_PROB) {
                    (cluster + stride) % NUM_CLUSTERS
                } else {
                    rng.gen_range(0..NUM_CLUSTERS)
                };
            }
            let free: Vec<usize> =
                clusters[cluster].iter().copied().filter(|&i| !used[i]).collect();
            let item = match free.choose(&mut rng) {
                Some(&i) => i,
                // Cluster exhausted: any unused item keeps the walk going.
                None => {
                    let any: Vec<usize> = (0..config.num_items).filter(|&i| !used[i]).collect();
                    *any.choose(&mut rng).expect("num_items >= max_len leaves an unused item")
                }
            };
            used[item] = true;

            let c = item % NUM_CLUSTERS;
            let explanation = vec![
                STRENGTH[(u + item) % STRENGTH.len()].to_string(),
                opinion.to_string(),
                "the".to_string(),
                FEEL[c].to_string(),
                KIND[c].to_string(),
            ];
            records.push(Interaction {
                user: user_name(u, config.num_users),
                item: item_name(item, config.num_items),
                timestamp: 1_000 + step as i64,
                rating: Some(3 + ((u + item) % 3) as i64),
                explanation: Some(explanation),
            });
        }
    }
    Ok(InteractionLog::new(records))
}
