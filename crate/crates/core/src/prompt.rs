//! Prompt templates and their rendering to token sequences.
//!
//! A prompt is an argument block (user id, separator, item or title tokens)
//! plus `l` searchable task trigger slots and an optional per-user trigger
//! slot. Rendering is pure: templates and assignments are plain values, and
//! the search loop is the only writer of assignments.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::TokenSequence;
use crate::vocab::{TokenId, Vocab};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TaskKind {
    Sequential,
    Matching,
    Explanation,
}

impl TaskKind {
    pub const ALL: [TaskKind; 3] = [TaskKind::Sequential, TaskKind::Matching, TaskKind::Explanation];
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TaskKind::Sequential => "sequential",
            TaskKind::Matching => "matching",
            TaskKind::Explanation => "explanation",
        };
        f.write_str(s)
    }
}

impl FromStr for TaskKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sequential" => Ok(TaskKind::Sequential),
            "matching" => Ok(TaskKind::Matching),
            "explanation" => Ok(TaskKind::Explanation),
            other => Err(Error::InvalidArgument(format!("unknown task kind {other:?}"))),
        }
    }
}

/// Where the task trigger slots sit relative to the argument block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TriggerPlacement {
    #[default]
    SuffixOnly,
    PrefixOnly,
    PrefixAndSuffix,
}

impl fmt::Display for TriggerPlacement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TriggerPlacement::SuffixOnly => "suffix_only",
            TriggerPlacement::PrefixOnly => "prefix_only",
            TriggerPlacement::PrefixAndSuffix => "prefix_and_suffix",
        };
        f.write_str(s)
    }
}

impl FromStr for TriggerPlacement {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "suffix_only" => Ok(TriggerPlacement::SuffixOnly),
            "prefix_only" => Ok(TriggerPlacement::PrefixOnly),
            "prefix_and_suffix" => Ok(TriggerPlacement::PrefixAndSuffix),
            other => Err(Error::InvalidArgument(format!("unknown trigger placement {other:?}"))),
        }
    }
}

/// Where the user trigger slot sits. Placements are relative to the argument
/// block and the suffix trigger run, so they compose with any
/// [`TriggerPlacement`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UserSlotPlacement {
    BeforeArgs,
    BetweenArgsAndTriggers,
    #[default]
    AfterTriggers,
}

impl fmt::Display for UserSlotPlacement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            UserSlotPlacement::BeforeArgs => "before_args",
            UserSlotPlacement::BetweenArgsAndTriggers => "between_args_and_triggers",
            UserSlotPlacement::AfterTriggers => "after_triggers",
        };
        f.write_str(s)
    }
}

impl FromStr for UserSlotPlacement {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "before_args" => Ok(UserSlotPlacement::BeforeArgs),
            "between_args_and_triggers" => Ok(UserSlotPlacement::BetweenArgsAndTriggers),
            "after_triggers" => Ok(UserSlotPlacement::AfterTriggers),
            other => Err(Error::InvalidArgument(format!("unknown user slot placement {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptTemplate {
    pub task_kind: TaskKind,
    /// Number of task trigger slots, `l`.
    pub num_task_slots: usize,
    pub has_user_slot: bool,
    pub placement: TriggerPlacement,
    pub user_slot_placement: UserSlotPlacement,
}

impl PromptTemplate {
    /// The default shape: `l` suffix slots and a trailing user slot.
    pub fn new(task_kind: TaskKind, num_task_slots: usize, has_user_slot: bool) -> PromptTemplate {
        PromptTemplate {
            task_kind,
            num_task_slots,
            has_user_slot,
            placement: TriggerPlacement::default(),
            user_slot_placement: UserSlotPlacement::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_task_slots == 0 {
            return Err(Error::InvalidArgument("a template needs at least one task slot".into()));
        }
        Ok(())
    }

    /// How many of the `l` task slots precede the argument block.
    pub fn prefix_slots(&self) -> usize {
        match self.placement {
            TriggerPlacement::SuffixOnly => 0,
            TriggerPlacement::PrefixOnly => self.num_task_slots,
            TriggerPlacement::PrefixAndSuffix => self.num_task_slots.div_ceil(2),
        }
    }
}

/// Task arguments for one instance. `items` is the interaction history for
/// the sequential task and the candidate set for the matching task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskArgs {
    pub user: TokenId,
    pub items: Vec<TokenId>,
    pub item_title: Option<Vec<TokenId>>,
    /// Reserved for rating-conditioned explanation prompts; nothing renders
    /// it yet.
    pub rating: Option<i64>,
}

impl TaskArgs {
    pub fn for_items(user: TokenId, items: Vec<TokenId>) -> TaskArgs {
        TaskArgs { user, items, item_title: None, rating: None }
    }

    pub fn for_title(user: TokenId, item_title: Vec<TokenId>) -> TaskArgs {
        TaskArgs { user, items: Vec::new(), item_title: Some(item_title), rating: None }
    }

    /// The argument block as rendered: `user : items` or `user : title`.
    fn encode(&self, kind: TaskKind) -> Result<Vec<TokenId>> {
        let mut out = vec![self.user, crate::vocab::SEP];
        match kind {
            TaskKind::Sequential | TaskKind::Matching => {
                if self.items.is_empty() {
                    return Err(Error::InvalidArgument(format!(
                        "{kind} arguments need a non-empty item list"
                    )));
                }
                out.extend_from_slice(&self.items);
            }
            TaskKind::Explanation => {
                let title = self
                    .item_title
                    .as_ref()
                    .filter(|t| !t.is_empty())
                    .ok_or_else(|| {
                        Error::InvalidArgument("explanation arguments need an item title".into())
                    })?;
                out.extend_from_slice(title);
            }
        }
        Ok(out)
    }
}

/// Current trigger token values: one per task slot, plus one per user when
/// the template has a user slot. Users missing from the map render as
/// `fallback_user_token`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriggerAssignment {
    pub task_tokens: Vec<TokenId>,
    pub user_tokens: BTreeMap<TokenId, TokenId>,
    pub fallback_user_token: TokenId,
}

impl TriggerAssignment {
    pub fn user_token(&self, user: TokenId) -> TokenId {
        self.user_tokens.get(&user).copied().unwrap_or(self.fallback_user_token)
    }

    /// Checks slot count against the template and every token against the
    /// vocabulary.
    pub fn validate_for(&self, template: &PromptTemplate, vocab: &Vocab) -> Result<()> {
        if self.task_tokens.len() != template.num_task_slots {
            return Err(Error::InvalidArgument(format!(
                "{} task tokens for a template with {} slots",
                self.task_tokens.len(),
                template.num_task_slots
            )));
        }
        let check = |t: TokenId| -> Result<()> {
            if t.idx() >= vocab.len() {
                return Err(Error::UnknownToken(t.0, vocab.len()));
            }
            Ok(())
        };
        for &t in &self.task_tokens {
            check(t)?;
        }
        for (&u, &t) in &self.user_tokens {
            check(u)?;
            check(t)?;
        }
        check(self.fallback_user_token)
    }
}

/// Every slot starts as "?", the default trigger token.
pub fn default_assignment(
    template: &PromptTemplate,
    vocab: &Vocab,
    users: &[TokenId],
) -> Result<TriggerAssignment> {
    template.validate()?;
    let q = vocab
        .lookup("?")
        .ok_or_else(|| Error::InvalidArgument("vocabulary has no \"?\" token".into()))?;
    let user_tokens = if template.has_user_slot {
        users.iter().map(|&u| (u, q)).collect()
    } else {
        BTreeMap::new()
    };
    Ok(TriggerAssignment {
        task_tokens: vec![q; template.num_task_slots],
        user_tokens,
        fallback_user_token: q,
    })
}

/// Renders the prompt for one task instance.
///
/// Layout: prefix trigger slots, the argument block, suffix trigger slots,
/// with the user slot inserted per its placement. `trigger_positions` lists
/// the task slots in slot order and `user_position` is present iff the
/// template has a user slot.
pub fn render(
    template: &PromptTemplate,
    args: &TaskArgs,
    assignment: &TriggerAssignment,
    user: TokenId,
) -> Result<TokenSequence> {
    template.validate()?;
    if assignment.task_tokens.len() != template.num_task_slots {
        return Err(Error::InvalidArgument(format!(
            "{} task tokens for a template with {} slots",
            assignment.task_tokens.len(),
            template.num_task_slots
        )));
    }
    let arg_block = args.encode(template.task_kind)?;
    let prefix = template.prefix_slots();

    let mut ids = Vec::new();
    let mut trigger_positions = Vec::with_capacity(template.num_task_slots);
    let mut user_position = None;
    let push_user = |ids: &mut Vec<TokenId>, user_position: &mut Option<usize>| {
        if template.has_user_slot {
            *user_position = Some(ids.len());
            ids.push(assignment.user_token(user));
        }
    };

    if template.user_slot_placement == UserSlotPlacement::BeforeArgs {
        push_user(&mut ids, &mut user_position);
    }
    for &t in &assignment.task_tokens[..prefix] {
        trigger_positions.push(ids.len());
        ids.push(t);
    }
    ids.extend_from_slice(&arg_block);
    if template.user_slot_placement == UserSlotPlacement::BetweenArgsAndTriggers {
        push_user(&mut ids, &mut user_position);
    }
    for &t in &assignment.task_tokens[prefix..] {
        trigger_positions.push(ids.len());
        ids.push(t);
    }
    if template.user_slot_placement == UserSlotPlacement::AfterTriggers {
        push_user(&mut ids, &mut user_position);
    }

    let seq = TokenSequence { ids, trigger_positions, user_position };
    seq.validate()?;
    Ok(seq)
}

/// Writes a template and its assignment as a line-oriented checkpoint:
/// `key = value` header, one `task:` line, then one `user` line per entry.
/// Tokens are written as vocabulary strings so files survive vocabulary id
/// changes only if the strings still exist; loading validates every token.
pub fn save_assignment(
    path: &Path,
    template: &PromptTemplate,
    assignment: &TriggerAssignment,
    vocab: &Vocab,
) -> Result<()> {
    assignment.validate_for(template, vocab)?;
    let mut out = String::new();
    out.push_str("# prompt checkpoint\n");
    out.push_str(&format!("task_kind = {}\n", template.task_kind));
    out.push_str(&format!("l = {}\n", template.num_task_slots));
    out.push_str(&format!("placement = {}\n", template.placement));
    out.push_str(&format!("has_user_slot = {}\n", template.has_user_slot));
    out.push_str(&format!("user_slot_placement = {}\n", template.user_slot_placement));
    out.push_str(&format!("fallback = {}\n", vocab.token_str(assignment.fallback_user_token)));
    let task_strs: Vec<&str> =
        assignment.task_tokens.iter().map(|&t| vocab.token_str(t)).collect();
    out.push_str(&format!("task: {}\n", task_strs.join(" ")));
    for (&u, &t) in &assignment.user_tokens {
        out.push_str(&format!("user {}: {}\n", vocab.token_str(u), vocab.token_str(t)));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load_assignment(
    path: &Path,
    vocab: &Vocab,
) -> Result<(PromptTemplate, TriggerAssignment)> {
    let text = std::fs::read_to_string(path)?;
    let mut header: BTreeMap<String, String> = BTreeMap::new();
    let mut task_tokens: Option<Vec<TokenId>> = None;
    let mut user_tokens = BTreeMap::new();

    let parse_err = |line: usize, message: String| Error::Parse { line, message };
    let lookup = |s: &str, line: usize| -> Result<TokenId> {
        vocab
            .lookup(s)
            .ok_or_else(|| parse_err(line, format!("token {s:?} is not in the vocabulary")))
    };

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("task:") {
            let mut toks = Vec::new();
            for s in rest.split_whitespace() {
                toks.push(lookup(s, line_no)?);
            }
            if task_tokens.replace(toks).is_some() {
                return Err(parse_err(line_no, "duplicate task line".into()));
            }
        } else if let Some(rest) = line.strip_prefix("user ") {
            let (user_str, tok_str) = rest
                .split_once(':')
                .ok_or_else(|| parse_err(line_no, "user line needs \"user <id>: <token>\"".into()))?;
            let u = lookup(user_str.trim(), line_no)?;
            let t = lookup(tok_str.trim(), line_no)?;
            if user_tokens.insert(u, t).is_some() {
                return Err(parse_err(line_no, format!("duplicate user {:?}", user_str.trim())));
            }
        } else if let Some((k, v)) = line.split_once('=') {
            header.insert(k.trim().to_string(), v.trim().to_string());
        } else {
            return Err(parse_err(line_no, format!("unrecognized line {line:?}")));
        }
    }

    let field = |k: &str| -> Result<&str> {
        header
            .get(k)
            .map(String::as_str)
            .ok_or_else(|| parse_err(0, format!("missing header field {k:?}")))
    };
    let template = PromptTemplate {
        task_kind: field("task_kind")?.parse()?,
        num_task_slots: field("l")?
            .parse()
            .map_err(|_| parse_err(0, "l is not a number".into()))?,
        placement: field("placement")?.parse()?,
        has_user_slot: field("has_user_slot")?
            .parse()
            .map_err(|_| parse_err(0, "has_user_slot is not a boolean".into()))?,
        user_slot_placement: field("user_slot_placement")?.parse()?,
    };
    let fallback = vocab.lookup(field("fallback")?).ok_or_else(|| {
        parse_err(0, format!("fallback token {:?} is not in the vocabulary", field("fallback").unwrap()))
    })?;
    let assignment = TriggerAssignment {
        task_tokens: task_tokens.ok_or_else(|| parse_err(0, "missing task line".into()))?,
        user_tokens,
        fallback_user_token: fallback,
    };
    assignment.validate_for(&template, vocab)?;
    Ok((template, assignment))
}
