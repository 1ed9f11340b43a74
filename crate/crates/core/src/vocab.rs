//! Token vocabulary shared by the backbone, the prompt renderer, and the
//! data pipeline.
//!
//! Layout is fixed: the four special tokens first, then the ten digits, then
//! user tokens, then item tokens, then the built-in word list. Construction
//! is deterministic, so any two builds from the same user/item sets agree on
//! every id.

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;

use crate::error::{Error, Result};

/// Index into a [`Vocab`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TokenId(pub u32);

impl TokenId {
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub const PAD: TokenId = TokenId(0);
pub const EOS: TokenId = TokenId(1);
pub const SEP: TokenId = TokenId(2);
/// The placeholder token every trigger slot starts from.
pub const DEFAULT_TRIGGER: TokenId = TokenId(3);

const SPECIAL_STRS: [&str; 4] = ["<pad>", "<eos>", ":", "?"];
/// Token ids below this are special and never eligible as trigger candidates.
pub const NUM_SPECIALS: u32 = 4;
const NUM_DIGITS: u32 = 10;

#[derive(Debug, Clone)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
    user_range: Range<u32>,
    item_range: Range<u32>,
}

impl Vocab {
    /// Builds a vocabulary from sorted-deduplicated user and item id strings
    /// plus a word list. Duplicate strings across any section are an error.
    pub fn build(user_ids: &[String], item_ids: &[String], words: &[&str]) -> Result<Vocab> {
        let mut tokens: Vec<String> = Vec::new();
        let mut index: HashMap<String, TokenId> = HashMap::new();
        let push = |s: &str, tokens: &mut Vec<String>, index: &mut HashMap<String, TokenId>| -> Result<()> {
            if s.is_empty() || s.chars().any(char::is_whitespace) {
                return Err(Error::InvalidArgument(format!(
                    "token {s:?} is empty or contains whitespace"
                )));
            }
            let id = TokenId(tokens.len() as u32);
            if index.insert(s.to_string(), id).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate token {s:?}")));
            }
            tokens.push(s.to_string());
            Ok(())
        };

        for s in SPECIAL_STRS {
            push(s, &mut tokens, &mut index)?;
        }
        for d in 0..NUM_DIGITS {
            push(&d.to_string(), &mut tokens, &mut index)?;
        }

        let mut users: Vec<&String> = user_ids.iter().collect();
        users.sort();
        users.dedup();
        let user_start = tokens.len() as u32;
        for u in users {
            push(u, &mut tokens, &mut index)?;
        }
        let user_end = tokens.len() as u32;

        let mut items: Vec<&String> = item_ids.iter().collect();
        items.sort();
        items.dedup();
        for i in items {
            push(i, &mut tokens, &mut index)?;
        }
        let item_end = tokens.len() as u32;

        for w in words {
            push(w, &mut tokens, &mut index)?;
        }

        Ok(Vocab {
            tokens,
            index,
            user_range: user_start..user_end,
            item_range: user_end..item_end,
        })
    }

    /// Builds a plain-token vocabulary (specials, digits, then `t0..tn`).
    /// Intended for tests and benches that need a vocabulary of a given size.
    pub fn with_plain_tokens(total_size: usize) -> Result<Vocab> {
        let base = (NUM_SPECIALS + NUM_DIGITS) as usize;
        if total_size < base {
            return Err(Error::InvalidArgument(format!(
                "vocabulary size {total_size} is below the {base} built-in tokens"
            )));
        }
        let words: Vec<String> = (0..total_size - base).map(|i| format!("t{i}")).collect();
        let refs: Vec<&str> = words.iter().map(String::as_str).collect();
        Vocab::build(&[], &[], &refs)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token_str(&self, id: TokenId) -> &str {
        &self.tokens[id.idx()]
    }

    pub fn lookup(&self, s: &str) -> Option<TokenId> {
        self.index.get(s).copied()
    }

    pub fn contains(&self, id: TokenId) -> bool {
        id.idx() < self.tokens.len()
    }

    pub fn is_special(&self, id: TokenId) -> bool {
        id.0 < NUM_SPECIALS
    }

    pub fn is_user(&self, id: TokenId) -> bool {
        self.user_range.contains(&id.0)
    }

    pub fn is_item(&self, id: TokenId) -> bool {
        self.item_range.contains(&id.0)
    }

    pub fn users(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.user_range.clone().map(TokenId)
    }

    pub fn items(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.item_range.clone().map(TokenId)
    }

    pub fn num_items(&self) -> usize {
        self.item_range.len()
    }

    /// The built-in word list appended after user and item tokens.
    pub fn word_list() -> &'static [&'static str] {
        WORDS
    }
}

/// Built-in word list. Synthetic explanations, item titles, and the manual
/// baseline prompts draw from these words, and the prompt search treats every
/// entry as a candidate trigger token.
pub const WORDS: &[&str] = &[
    // function words
    "the", "a", "an", "and", "or", "but", "to", "of", "in", "on", "at", "for", "with", "from",
    "by", "as", "is", "are", "was", "be", "this", "that", "these", "those", "it", "its", "not",
    "no", "yes", "all", "any", "each", "more", "most", "less", "few", "very", "so", "too", "who",
    "what", "when", "where", "why", "how", "which", "because",
    // verbs
    "recommend", "select", "choose", "pick", "generate", "explain", "describe", "predict",
    "suggest", "rank", "match", "prefer", "love", "like", "enjoy", "admire", "adore", "want",
    "need", "buy", "watch", "read", "listen", "play", "wear", "use", "try", "keep", "return",
    "share", "rate", "review", "browse", "search", "find", "discover", "explore", "follow",
    "skip", "repeat", "consider", "compare", "collect", "order", "ship", "deliver", "open",
    "close", "start", "finish", "continue", "stop", "think", "feel", "know", "see", "hear",
    "make", "take", "give", "get", "fits",
    // adverbs
    "really", "truly", "quite", "deeply", "mostly", "often", "always", "never", "sometimes",
    "rarely", "again", "soon", "later", "still", "almost", "nearly", "just", "only", "even",
    // adjectives
    "next", "best", "good", "great", "fine", "nice", "new", "old", "young", "fresh", "epic",
    "dark", "gentle", "practical", "witty", "ancient", "cryptic", "loud", "quiet", "strange",
    "thrilling", "haunting", "soothing", "useful", "hilarious", "sweeping", "puzzling",
    "rousing", "tender", "odd", "bright", "dim", "warm", "cold", "hot", "cool", "soft", "hard",
    "smooth", "rough", "light", "heavy", "cheap", "costly", "rare", "common", "simple",
    "complex", "plain", "fancy", "bold", "shy", "calm", "wild", "tidy", "messy", "clean",
    "dirty", "strong", "weak", "fast", "slow", "long", "short", "tall", "deep", "wide",
    "narrow", "big", "small", "tiny", "huge", "grand", "modest", "vivid", "pale", "crisp",
    "mellow", "sharp", "blunt", "sweet", "bitter", "sour", "salty", "spicy", "mild", "rich",
    "poor", "full", "empty", "silent", "noisy", "famous", "obscure", "modern", "retro",
    "classic", "novel", "usual", "unusual", "lucky", "solid", "hollow", "dense", "sparse",
    "eager", "weary", "proud", "humble",
    // nouns
    "item", "user", "candidate", "explanation", "reason", "rating", "history", "sequence",
    "list", "story", "saga", "thriller", "ballad", "manual", "comedy", "chronicle", "mystery",
    "anthem", "memoir", "fable", "book", "film", "song", "album", "game", "tool", "kit", "set",
    "box", "bag", "shirt", "shoe", "hat", "coat", "lamp", "desk", "chair", "table", "phone",
    "camera", "screen", "speaker", "record", "tape", "disc", "poem", "essay", "guide", "atlas",
    "map", "chart", "plan", "recipe", "meal", "snack", "drink", "coffee", "tea", "juice",
    "bread", "cheese", "fruit", "apple", "berry", "melon", "spice", "sauce", "soup", "salad",
    "brand", "model", "series", "season", "episode", "chapter", "verse", "line", "page",
    "cover", "title", "author", "artist", "band", "studio", "label", "genre", "style", "theme",
    "mood", "scene", "plot", "twist", "hero", "villain", "quest", "journey", "trip", "visit",
    "stay", "home", "room", "hall", "door", "window", "wall", "floor", "roof", "garden",
    "park", "road", "path", "bridge", "river", "lake", "hill", "stone", "sand", "wave",
    "cloud", "storm", "rain", "snow", "wind", "fire", "shadow", "color", "sound", "voice",
    "word", "name", "number", "price", "value", "gift", "prize", "deal", "offer", "stock",
    "store", "shop", "market", "account", "profile", "session", "basket", "cart", "wishlist",
    "inventory", "catalog", "vendor", "seller", "buyer", "shopper", "member", "guest",
    "crowd", "group", "pair", "trio", "dozen",
];
