//! Run configuration: a line-oriented `key = value` file with `[section]`
//! headers. Every field has a default, so an empty file is a valid config.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use promptforge_core::data::{SplitOptions, SynthConfig};
use promptforge_core::prompt::{TaskKind, TriggerPlacement, UserSlotPlacement};
use promptforge_core::{default_alpha, Error, ModelConfig, Result, SearchConfig};

/// Backbone architecture settings; `vocab_size` is always derived from the
/// data, so it is absent here.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSettings {
    pub embed_dim: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub heads: usize,
    pub feedforward_dim: usize,
    pub max_seq_len: usize,
    pub seed: u64,
}

impl ModelSettings {
    /// The matching task renders the full candidate list into the input, so
    /// its default positional table is sized for ~100 candidates.
    fn default_for(task: TaskKind) -> ModelSettings {
        let max_seq_len = match task {
            TaskKind::Matching => 128,
            TaskKind::Sequential | TaskKind::Explanation => 32,
        };
        ModelSettings {
            embed_dim: 16,
            encoder_layers: 2,
            decoder_layers: 2,
            heads: 4,
            feedforward_dim: 32,
            max_seq_len,
            seed: 7,
        }
    }

    pub fn to_model_config(&self, vocab_size: usize) -> ModelConfig {
        ModelConfig {
            vocab_size,
            embed_dim: self.embed_dim,
            num_encoder_layers: self.encoder_layers,
            num_decoder_layers: self.decoder_layers,
            num_heads: self.heads,
            feedforward_dim: self.feedforward_dim,
            max_seq_len: self.max_seq_len,
            seed: self.seed,
        }
    }
}

/// Backbone training schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct BackboneConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for BackboneConfig {
    /// Adam-scale learning rate; 25 epochs reach a useful loss on the
    /// default synthetic corpus without memorizing the training sequences.
    fn default() -> Self {
        BackboneConfig { epochs: 25, learning_rate: 0.002, seed: 3 }
    }
}

/// Prompt template settings. `l = None` means the default length policy:
/// 5 for personalized templates, a {5, 6} sweep otherwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateConfig {
    pub l: Option<usize>,
    pub placement: TriggerPlacement,
    pub personalized: bool,
    pub user_slot_placement: UserSlotPlacement,
}

impl Default for TemplateConfig {
    fn default() -> Self {
        TemplateConfig {
            l: None,
            placement: TriggerPlacement::SuffixOnly,
            personalized: true,
            user_slot_placement: UserSlotPlacement::AfterTriggers,
        }
    }
}

impl TemplateConfig {
    /// Lengths a search run sweeps: an explicit `l` wins, otherwise the
    /// default policy above.
    pub fn effective_lengths(&self) -> Vec<usize> {
        match (self.l, self.personalized) {
            (Some(l), _) => vec![l],
            (None, true) => vec![5],
            (None, false) => vec![5, 6],
        }
    }
}

/// Input and output locations. `data` and `weights` default to the
/// run-stamped outputs of `synth` and `train-backbone`, so the pipeline
/// composes without any explicit paths.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PathsConfig {
    pub data: Option<PathBuf>,
    pub weights: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

/// Everything a command needs, assembled from the config file plus defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub task: TaskKind,
    /// Test evaluations are run this many times and averaged.
    pub repeats: usize,
    /// Ingestion cutoff: records strictly older are dropped.
    pub min_timestamp: Option<i64>,
    pub paths: PathsConfig,
    pub synth: SynthConfig,
    pub model: ModelSettings,
    pub backbone: BackboneConfig,
    pub template: TemplateConfig,
    pub search: SearchConfig,
    pub split: SplitOptions,
}

impl RunConfig {
    pub fn defaults_for(task: TaskKind) -> RunConfig {
        RunConfig {
            task,
            repeats: 5,
            min_timestamp: None,
            paths: PathsConfig::default(),
            synth: SynthConfig::default(),
            model: ModelSettings::default_for(task),
            backbone: BackboneConfig::default(),
            template: TemplateConfig::default(),
            search: SearchConfig::for_task(task),
            split: SplitOptions::default(),
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.paths.out.clone().unwrap_or_else(|| PathBuf::from("runs"))
    }

    pub fn synth_dir(&self) -> PathBuf {
        self.out_dir().join(format!("synth-seed{}", self.synth.seed))
    }

    pub fn train_dir(&self) -> PathBuf {
        self.out_dir().join(format!("train-seed{}", self.backbone.seed))
    }

    pub fn search_dir(&self) -> PathBuf {
        self.out_dir().join(format!("search-seed{}", self.search.seed))
    }

    pub fn eval_dir(&self) -> PathBuf {
        self.out_dir().join(format!("eval-seed{}", self.search.seed))
    }

    pub fn ablate_dir(&self, variant: &str) -> PathBuf {
        self.out_dir().join(format!("ablate-{variant}-seed{}", self.search.seed))
    }

    pub fn data_path(&self) -> PathBuf {
        self.paths
            .data
            .clone()
            .unwrap_or_else(|| self.synth_dir().join("interactions.tsv"))
    }

    pub fn weights_path(&self) -> PathBuf {
        self.paths
            .weights
            .clone()
            .unwrap_or_else(|| self.train_dir().join("backbone.pfrz"))
    }

    fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::InvalidArgument("repeats must be at least 1".into()));
        }
        if let Some(l) = self.template.l {
            if l == 0 {
                return Err(Error::InvalidArgument(
                    "template l must be at least 1".into(),
                ));
            }
        }
        self.search.validate()
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

/// One `key = value` line, tagged with its section and source line number.
struct Entry<'a> {
    line: usize,
    section: &'a str,
    key: &'a str,
    value: &'a str,
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut entries: Vec<Entry> = Vec::new();
    let mut section = "";
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if let Some(name) = trimmed.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or(Error::Parse {
                line,
                message: "section header must look like [name]".into(),
            })?;
            section = match name.trim() {
                s @ ("paths" | "synth" | "model" | "backbone" | "template" | "search"
                | "split") => s,
                other => {
                    return Err(Error::Parse {
                        line,
                        message: format!("unknown section [{other}]"),
                    })
                }
            };
            continue;
        }
        let (key, value) = trimmed.split_once('=').ok_or(Error::Parse {
            line,
            message: "expected `key = value` or a [section] header".into(),
        })?;
        entries.push(Entry { line, section, key: key.trim(), value: value.trim() });
    }

    // The task decides several defaults (alpha, positional table size), so it
    // is resolved before any other key is applied.
    let mut task = TaskKind::Sequential;
    for e in &entries {
        if e.section.is_empty() && e.key == "task" {
            task = parse_value(e)?;
        }
    }

    let mut cfg = RunConfig::defaults_for(task);
    let mut alpha_set = false;
    for e in &entries {
        apply_entry(&mut cfg, e, &mut alpha_set)?;
    }
    if !alpha_set {
        cfg.search.alpha = default_alpha(cfg.task);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_value<T: FromStr>(e: &Entry) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    e.value.parse().map_err(|err| Error::Parse {
        line: e.line,
        message: format!("bad value {:?} for {}: {err}", e.value, e.key),
    })
}

/// `none` (or an empty value) clears an optional field.
fn parse_optional<T: FromStr>(e: &Entry) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    if e.value.is_empty() || e.value.eq_ignore_ascii_case("none") {
        return Ok(None);
    }
    parse_value(e).map(Some)
}

fn apply_entry(cfg: &mut RunConfig, e: &Entry, alpha_set: &mut bool) -> Result<()> {
    let unknown = || Error::Parse {
        line: e.line,
        message: if e.section.is_empty() {
            format!("unknown key {:?}", e.key)
        } else {
            format!("unknown key {:?} in [{}]", e.key, e.section)
        },
    };
    match (e.section, e.key) {
        ("", "task") => cfg.task = parse_value(e)?,
        ("", "repeats") => cfg.repeats = parse_value(e)?,
        ("", "min_timestamp") => cfg.min_timestamp = parse_optional(e)?,
        ("paths", "data") => cfg.paths.data = Some(PathBuf::from(e.value)),
        ("paths", "weights") => cfg.paths.weights = Some(PathBuf::from(e.value)),
        ("paths", "out") => cfg.paths.out = Some(PathBuf::from(e.value)),
        ("synth", "users") => cfg.synth.num_users = parse_value(e)?,
        ("synth", "items") => cfg.synth.num_items = parse_value(e)?,
        ("synth", "min_len") => cfg.synth.min_len = parse_value(e)?,
        ("synth", "max_len") => cfg.synth.max_len = parse_value(e)?,
        ("synth", "seed") => cfg.synth.seed = parse_value(e)?,
        ("model", "embed_dim") => cfg.model.embed_dim = parse_value(e)?,
        ("model", "encoder_layers") => cfg.model.encoder_layers = parse_value(e)?,
        ("model", "decoder_layers") => cfg.model.decoder_layers = parse_value(e)?,
        ("model", "heads") => cfg.model.heads = parse_value(e)?,
        ("model", "feedforward_dim") => cfg.model.feedforward_dim = parse_value(e)?,
        ("model", "max_seq_len") => cfg.model.max_seq_len = parse_value(e)?,
        ("model", "seed") => cfg.model.seed = parse_value(e)?,
        ("backbone", "epochs") => cfg.backbone.epochs = parse_value(e)?,
        ("backbone", "learning_rate") => cfg.backbone.learning_rate = parse_value(e)?,
        ("backbone", "seed") => cfg.backbone.seed = parse_value(e)?,
        ("template", "l") => cfg.template.l = parse_optional(e)?,
        ("template", "placement") => cfg.template.placement = parse_value(e)?,
        ("template", "personalized") => cfg.template.personalized = parse_value(e)?,
        ("template", "user_slot_placement") => {
            cfg.template.user_slot_placement = parse_value(e)?
        }
        ("search", "k") => cfg.search.k = parse_value(e)?,
        ("search", "max_epochs") => cfg.search.max_epochs = parse_value(e)?,
        ("search", "criterion") => cfg.search.criterion = parse_value(e)?,
        ("search", "surrogate_beam") => cfg.search.surrogate_beam = parse_value(e)?,
        ("search", "test_beam") => cfg.search.test_beam = parse_value(e)?,
        ("search", "alpha") => {
            cfg.search.alpha = parse_value(e)?;
            *alpha_set = true;
        }
        ("search", "include_current_token") => {
            cfg.search.include_current_token = parse_value(e)?
        }
        ("search", "train_subsample") => cfg.search.train_subsample = parse_optional(e)?,
        ("search", "seed") => cfg.search.seed = parse_value(e)?,
        ("split", "num_negatives") => cfg.split.num_negatives = parse_value(e)?,
        ("split", "seed") => cfg.split.seed = parse_value(e)?,
        _ => return Err(unknown()),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use promptforge_core::SelectionCriterion;

    #[test]
    fn empty_config_is_all_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg.task, TaskKind::Sequential);
        assert_eq!(cfg.repeats, 5);
        assert_eq!(cfg.search.k, 5);
        assert_eq!(cfg.search.max_epochs, 50);
        assert_eq!(cfg.search.surrogate_beam, 5);
        assert_eq!(cfg.search.test_beam, 20);
        assert_eq!(cfg.search.alpha, 1.0);
        assert_eq!(cfg.search.criterion, SelectionCriterion::SurrogateMetric);
        assert!(cfg.search.include_current_token);
        assert_eq!(cfg.template.effective_lengths(), vec![5]);
        assert_eq!(cfg.synth.num_users, 200);
        assert_eq!(cfg.split.num_negatives, 99);
        assert_eq!(cfg.data_path(), PathBuf::from("runs/synth-seed17/interactions.tsv"));
        assert_eq!(cfg.weights_path(), PathBuf::from("runs/train-seed3/backbone.pfrz"));
    }

    #[test]
    fn task_sets_alpha_and_length_defaults() {
        let cfg = parse_config("task = explanation\n").unwrap();
        assert_eq!(cfg.search.alpha, 0.1);
        // Matching defaults to a wider positional table for its candidates.
        let cfg = parse_config("task = matching\n").unwrap();
        assert_eq!(cfg.model.max_seq_len, 128);
        assert_eq!(cfg.search.alpha, 1.0);
        // An explicit alpha wins regardless of key order relative to task.
        let cfg = parse_config("[search]\nalpha = 0.25\n").unwrap();
        assert_eq!(cfg.search.alpha, 0.25);
    }

    #[test]
    fn non_personalized_defaults_to_length_sweep() {
        let cfg = parse_config("[template]\npersonalized = false\n").unwrap();
        assert_eq!(cfg.template.effective_lengths(), vec![5, 6]);
        let cfg = parse_config("[template]\npersonalized = false\nl = 4\n").unwrap();
        assert_eq!(cfg.template.effective_lengths(), vec![4]);
    }

    #[test]
    fn sections_route_keys_and_comments_are_skipped() {
        let text = "\
# pipeline config
task = matching
repeats = 3

[paths]
out = /tmp/x

[search]
k = 7
train_subsample = 64

[split]
num_negatives = 9
";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.task, TaskKind::Matching);
        assert_eq!(cfg.repeats, 3);
        assert_eq!(cfg.search.k, 7);
        assert_eq!(cfg.search.train_subsample, Some(64));
        assert_eq!(cfg.split.num_negatives, 9);
        assert_eq!(cfg.data_path(), PathBuf::from("/tmp/x/synth-seed17/interactions.tsv"));
    }

    #[test]
    fn optional_keys_accept_none() {
        let cfg = parse_config("min_timestamp = 42\n").unwrap();
        assert_eq!(cfg.min_timestamp, Some(42));
        let cfg = parse_config("min_timestamp = none\n[search]\ntrain_subsample = none\n")
            .unwrap();
        assert_eq!(cfg.min_timestamp, None);
        assert_eq!(cfg.search.train_subsample, None);
    }

    #[test]
    fn bad_lines_report_their_line_number() {
        let err = parse_config("task = sequential\nbogus_key = 1\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        let err = parse_config("[nonsense]\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse_config("[search]\nk = five\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse_config("just words\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn validation_rejects_degenerate_values() {
        assert!(parse_config("repeats = 0\n").is_err());
        assert!(parse_config("[template]\nl = 0\n").is_err());
        assert!(parse_config("[search]\nmax_epochs = 0\n").is_err());
        assert!(parse_config("[search]\nsurrogate_beam = 30\n").is_err());
    }
}
