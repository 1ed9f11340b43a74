//! The five pipeline commands. Each writes its outputs to a seed-stamped
//! directory under the configured output root and never mutates its inputs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use promptforge_core::data::{
    build_vocab, leave_one_out_split, load_interactions, manual_prompt, save_interactions,
    synth_generate, training_pairs, SplitDataset,
};
use promptforge_core::prompt::{
    default_assignment, load_assignment, save_assignment, PromptTemplate, TaskKind,
    TriggerAssignment, TriggerPlacement, UserSlotPlacement,
};
use promptforge_core::{
    evaluate_prompt, load_weights, run_search, save_weights, surrogate_score, train_backbone,
    BestPromptCheckpoint, EpochLog, Error, FrozenSeq2Seq, MetricName, MetricsReport, Result,
    SearchConfig, SelectionCriterion, SlotRef, TokenId, Vocab,
};

use crate::config::RunConfig;

/// Loaded data artifacts shared by every command past `synth`.
struct Workspace {
    vocab: Vocab,
    split: SplitDataset,
}

fn load_workspace(cfg: &RunConfig) -> Result<Workspace> {
    let log = load_interactions(&cfg.data_path(), cfg.min_timestamp)?;
    let vocab = build_vocab(&log)?;
    let split = leave_one_out_split(&log, cfg.task, &vocab, &cfg.split)?;
    Ok(Workspace { vocab, split })
}

fn load_model(cfg: &RunConfig, vocab: &Vocab) -> Result<FrozenSeq2Seq> {
    let model = load_weights(&cfg.weights_path())?;
    if model.config().vocab_size != vocab.len() {
        return Err(Error::InvalidConfig(format!(
            "weight file was trained with vocabulary size {}, data has {}",
            model.config().vocab_size,
            vocab.len()
        )));
    }
    Ok(model)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

pub fn cmd_synth(cfg: &RunConfig) -> Result<()> {
    let dir = cfg.synth_dir();
    ensure_dir(&dir)?;
    let log = synth_generate(&cfg.synth)?;
    let path = dir.join("interactions.tsv");
    save_interactions(&log, &path)?;
    let users = log.per_user().len();
    println!("wrote {} interactions for {} users to {}", log.len(), users, path.display());
    Ok(())
}

pub fn cmd_train_backbone(cfg: &RunConfig) -> Result<()> {
    let ws = load_workspace(cfg)?;
    let pairs = training_pairs(&ws.split, &ws.vocab)?;
    let model_cfg = cfg.model.to_model_config(ws.vocab.len());
    let (model, report) = train_backbone(
        &pairs,
        &model_cfg,
        cfg.backbone.epochs,
        cfg.backbone.learning_rate,
        cfg.backbone.seed,
    )?;

    let dir = cfg.train_dir();
    ensure_dir(&dir)?;
    let path = dir.join("backbone.pfrz");
    save_weights(&model, &path)?;

    let mut curve = String::new();
    for (i, loss) in report.epoch_losses.iter().enumerate() {
        let line = format!("epoch {} loss = {loss}", i + 1);
        println!("{line}");
        curve.push_str(&line);
        curve.push('\n');
    }
    std::fs::write(dir.join("losses.txt"), curve)?;
    println!(
        "trained on {} pairs for {} epochs, weights at {}",
        pairs.len(),
        cfg.backbone.epochs,
        path.display()
    );
    Ok(())
}

/// Renders one epoch log line. Tokens appear as vocabulary strings; floats
/// use the shortest round-tripping form so reports can be cross-checked
/// bit-exactly.
fn epoch_line(log: &EpochLog, vocab: &Vocab) -> String {
    let slot = match log.position {
        SlotRef::Task(i) => format!("task[{i}]"),
        SlotRef::User(u) => format!("user[{}]", vocab.token_str(u)),
    };
    format!(
        "epoch={} kind={} slot={} prev={} chosen={} criterion={} val_surrogate={}",
        log.epoch,
        log.kind,
        slot,
        vocab.token_str(log.previous_token),
        vocab.token_str(log.chosen_token),
        log.criterion_score,
        log.val_metrics.surrogate
    )
}

/// The search surrogate of an assignment on the validation split, computed
/// exactly as the search loop computes it (surrogate beam, one repeat).
fn val_surrogate(
    model: &FrozenSeq2Seq,
    split: &SplitDataset,
    template: &PromptTemplate,
    assignment: &TriggerAssignment,
    vocab: &Vocab,
    search: &SearchConfig,
) -> Result<f64> {
    let report = evaluate_prompt(
        model,
        &split.val,
        template,
        assignment,
        vocab,
        search.surrogate_beam,
        1,
        search.seed,
    )?;
    Ok(surrogate_score(&report.values, template.task_kind, search.alpha))
}

/// One completed search run: the template it used and what it found.
struct SearchRun {
    template: PromptTemplate,
    checkpoint: BestPromptCheckpoint,
    epoch0_score: f64,
}

fn run_one_search(
    model: &FrozenSeq2Seq,
    ws: &Workspace,
    cfg: &RunConfig,
    template: PromptTemplate,
    dir: &Path,
) -> Result<SearchRun> {
    let l = template.num_task_slots;
    let users: Vec<TokenId> = if template.has_user_slot {
        ws.vocab.users().collect()
    } else {
        Vec::new()
    };
    let initial = default_assignment(&template, &ws.vocab, &users)?;
    save_assignment(&dir.join(format!("initial-l{l}.prompt")), &template, &initial, &ws.vocab)?;

    let epoch0_score = val_surrogate(model, &ws.split, &template, &initial, &ws.vocab, &cfg.search)?;
    let (checkpoint, logs) = run_search(model, &ws.split, &template, initial, &ws.vocab, &cfg.search)?;

    let mut report = String::new();
    writeln!(report, "# search report").unwrap();
    writeln!(report, "task = {}", cfg.task).unwrap();
    writeln!(report, "l = {l}").unwrap();
    writeln!(report, "criterion = {}", cfg.search.criterion).unwrap();
    writeln!(report, "seed = {}", cfg.search.seed).unwrap();
    writeln!(report, "epoch0 val_surrogate = {epoch0_score}").unwrap();
    for log in &logs {
        writeln!(report, "{}", epoch_line(log, &ws.vocab)).unwrap();
    }
    writeln!(report, "best epoch = {}", checkpoint.epoch).unwrap();
    writeln!(report, "best val_surrogate = {}", checkpoint.val_score).unwrap();
    std::fs::write(dir.join(format!("report-l{l}.txt")), report)?;

    Ok(SearchRun { template, checkpoint, epoch0_score })
}

pub fn cmd_search(cfg: &RunConfig) -> Result<()> {
    let ws = load_workspace(cfg)?;
    let model = load_model(cfg, &ws.vocab)?;
    let dir = cfg.search_dir();
    ensure_dir(&dir)?;

    let mut best: Option<SearchRun> = None;
    for l in cfg.template.effective_lengths() {
        let template = PromptTemplate {
            task_kind: cfg.task,
            num_task_slots: l,
            has_user_slot: cfg.template.personalized,
            placement: cfg.template.placement,
            user_slot_placement: cfg.template.user_slot_placement,
        };
        let run = run_one_search(&model, &ws, cfg, template, &dir)?;
        println!(
            "l={l}: best val_surrogate {} at epoch {}",
            run.checkpoint.val_score, run.checkpoint.epoch
        );
        let better = match &best {
            None => true,
            Some(b) => run.checkpoint.val_score > b.checkpoint.val_score,
        };
        if better {
            best = Some(run);
        }
    }
    // effective_lengths is never empty, so a best run always exists.
    let best = best.expect("at least one search run");
    save_assignment(
        &dir.join("checkpoint.prompt"),
        &best.template,
        &best.checkpoint.assignment,
        &ws.vocab,
    )?;

    let mut summary = String::new();
    writeln!(summary, "# search summary").unwrap();
    writeln!(summary, "task = {}", cfg.task).unwrap();
    writeln!(summary, "l = {}", best.template.num_task_slots).unwrap();
    writeln!(summary, "best_epoch = {}", best.checkpoint.epoch).unwrap();
    writeln!(summary, "best_val_score = {}", best.checkpoint.val_score).unwrap();
    writeln!(summary, "epoch0_val_score = {}", best.epoch0_score).unwrap();
    std::fs::write(dir.join("summary.txt"), &summary)?;
    print!("{summary}");
    println!("checkpoint at {}", dir.join("checkpoint.prompt").display());
    Ok(())
}

/// Formats one metric value for a report table. Text-overlap metrics are
/// conventionally reported x100; ranking metrics are raw fractions.
fn table_value(name: MetricName, value: f64) -> String {
    if name.reported_as_percentage() {
        format!("{:.4}", value * 100.0)
    } else {
        format!("{value:.4}")
    }
}

fn metric_table(searched: &MetricsReport, manual: &MetricsReport) -> String {
    let mut out = String::new();
    writeln!(out, "{:<12} {:>12} {:>12}", "metric", "prompt", "manual").unwrap();
    for (&name, &value) in &searched.values {
        let base = manual.get(name);
        writeln!(
            out,
            "{:<12} {:>12} {:>12}",
            name.to_string(),
            table_value(name, value),
            table_value(name, base)
        )
        .unwrap();
    }
    out
}

pub fn cmd_eval(
    cfg: &RunConfig,
    checkpoint: Option<PathBuf>,
    split_name: &str,
) -> Result<()> {
    let ws = load_workspace(cfg)?;
    let model = load_model(cfg, &ws.vocab)?;
    let ckpt_path = checkpoint.unwrap_or_else(|| cfg.search_dir().join("checkpoint.prompt"));
    let (template, assignment) = load_assignment(&ckpt_path, &ws.vocab)?;
    if template.task_kind != cfg.task {
        return Err(Error::InvalidArgument(format!(
            "checkpoint task {} does not match configured task {}",
            template.task_kind, cfg.task
        )));
    }
    let instances = match split_name {
        "val" => &ws.split.val,
        "test" => &ws.split.test,
        other => {
            return Err(Error::InvalidArgument(format!(
                "split must be val or test, got {other:?}"
            )))
        }
    };
    let ranked = matches!(cfg.task, TaskKind::Sequential | TaskKind::Matching);
    if ranked && cfg.search.test_beam < 10 {
        return Err(Error::InvalidArgument(format!(
            "test beam {} cannot produce the HR@10 and NDCG@10 columns; use a beam of at least 10",
            cfg.search.test_beam
        )));
    }

    let searched = evaluate_prompt(
        &model,
        instances,
        &template,
        &assignment,
        &ws.vocab,
        cfg.search.test_beam,
        cfg.repeats,
        cfg.search.seed,
    )?;
    let (manual_template, manual_assignment) = manual_prompt(cfg.task, &ws.vocab)?;
    let manual = evaluate_prompt(
        &model,
        instances,
        &manual_template,
        &manual_assignment,
        &ws.vocab,
        cfg.search.test_beam,
        cfg.repeats,
        cfg.search.seed,
    )?;
    let cross = val_surrogate(&model, &ws.split, &template, &assignment, &ws.vocab, &cfg.search)?;

    let mut report = String::new();
    writeln!(report, "# evaluation report").unwrap();
    writeln!(report, "task = {}", cfg.task).unwrap();
    writeln!(report, "split = {split_name}").unwrap();
    writeln!(report, "beam = {}", cfg.search.test_beam).unwrap();
    writeln!(report, "repeats = {}", cfg.repeats).unwrap();
    writeln!(report, "checkpoint = {}", ckpt_path.display()).unwrap();
    if cfg.task == TaskKind::Explanation {
        writeln!(report, "# text metrics shown x100").unwrap();
    }
    writeln!(report).unwrap();
    report.push_str(&metric_table(&searched, &manual));
    writeln!(report).unwrap();
    writeln!(
        report,
        "val surrogate (beam={}, repeats=1, alpha={}) = {cross}",
        cfg.search.surrogate_beam, cfg.search.alpha
    )
    .unwrap();

    let dir = cfg.eval_dir();
    ensure_dir(&dir)?;
    std::fs::write(dir.join("report.txt"), &report)?;
    print!("{report}");
    Ok(())
}

/// One axis of the design swept while everything else stays at the config.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationVariant {
    TriggerPosition,
    UserTokenPosition,
    PromptLength,
    SelectionCriterion,
}

impl AblationVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            AblationVariant::TriggerPosition => "trigger_position",
            AblationVariant::UserTokenPosition => "user_token_position",
            AblationVariant::PromptLength => "prompt_length",
            AblationVariant::SelectionCriterion => "selection_criterion",
        }
    }
}

impl FromStr for AblationVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<AblationVariant> {
        match s {
            "trigger_position" => Ok(AblationVariant::TriggerPosition),
            "user_token_position" => Ok(AblationVariant::UserTokenPosition),
            "prompt_length" => Ok(AblationVariant::PromptLength),
            "selection_criterion" => Ok(AblationVariant::SelectionCriterion),
            other => Err(Error::InvalidArgument(format!(
                "unknown ablation variant {other:?}; expected trigger_position, \
                 user_token_position, prompt_length, or selection_criterion"
            ))),
        }
    }
}

/// A single sweep value: what changes relative to the base config.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationSetting {
    Placement(TriggerPlacement),
    UserSlot(UserSlotPlacement),
    Length(usize),
    Criterion(SelectionCriterion),
}

impl AblationSetting {
    fn label(self) -> String {
        match self {
            AblationSetting::Placement(p) => p.to_string(),
            AblationSetting::UserSlot(u) => u.to_string(),
            AblationSetting::Length(l) => format!("l={l}"),
            AblationSetting::Criterion(c) => c.to_string(),
        }
    }

    /// Directory-safe name for the setting's own artifacts.
    fn slug(self) -> String {
        self.label().replace('=', "")
    }
}

/// A variant plus the values it sweeps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AblationSpec {
    pub variant: AblationVariant,
    pub settings: Vec<AblationSetting>,
}

impl AblationSpec {
    pub fn for_variant(variant: AblationVariant) -> AblationSpec {
        let settings = match variant {
            AblationVariant::TriggerPosition => vec![
                AblationSetting::Placement(TriggerPlacement::PrefixOnly),
                AblationSetting::Placement(TriggerPlacement::PrefixAndSuffix),
                AblationSetting::Placement(TriggerPlacement::SuffixOnly),
            ],
            AblationVariant::UserTokenPosition => vec![
                AblationSetting::UserSlot(UserSlotPlacement::BeforeArgs),
                AblationSetting::UserSlot(UserSlotPlacement::BetweenArgsAndTriggers),
                AblationSetting::UserSlot(UserSlotPlacement::AfterTriggers),
            ],
            AblationVariant::PromptLength => vec![
                AblationSetting::Length(3),
                AblationSetting::Length(4),
                AblationSetting::Length(5),
                AblationSetting::Length(6),
                AblationSetting::Length(7),
            ],
            AblationVariant::SelectionCriterion => vec![
                AblationSetting::Criterion(SelectionCriterion::TrainLoss),
                AblationSetting::Criterion(SelectionCriterion::SurrogateMetric),
            ],
        };
        AblationSpec { variant, settings }
    }
}

/// The four columns of an ablation table, by task family.
fn table_columns(task: TaskKind) -> [MetricName; 4] {
    match task {
        TaskKind::Sequential | TaskKind::Matching => {
            [MetricName::Hr5, MetricName::Ndcg5, MetricName::Hr10, MetricName::Ndcg10]
        }
        TaskKind::Explanation => [
            MetricName::Bleu4,
            MetricName::Rouge1,
            MetricName::Rouge2,
            MetricName::RougeL,
        ],
    }
}

pub fn cmd_ablate(cfg: &RunConfig, spec: &AblationSpec) -> Result<()> {
    if spec.variant == AblationVariant::UserTokenPosition && !cfg.template.personalized {
        return Err(Error::InvalidArgument(
            "the user_token_position sweep needs a personalized template".into(),
        ));
    }
    let ranked = matches!(cfg.task, TaskKind::Sequential | TaskKind::Matching);
    if ranked && cfg.search.test_beam < 10 {
        return Err(Error::InvalidArgument(format!(
            "test beam {} cannot produce the HR@10 and NDCG@10 columns; use a beam of at least 10",
            cfg.search.test_beam
        )));
    }
    let ws = load_workspace(cfg)?;
    let model = load_model(cfg, &ws.vocab)?;
    let dir = cfg.ablate_dir(spec.variant.as_str());
    ensure_dir(&dir)?;

    let columns = table_columns(cfg.task);
    let mut rows: Vec<(String, MetricsReport)> = Vec::new();
    for &setting in &spec.settings {
        let mut run_cfg = cfg.clone();
        match setting {
            AblationSetting::Placement(p) => run_cfg.template.placement = p,
            AblationSetting::UserSlot(u) => run_cfg.template.user_slot_placement = u,
            AblationSetting::Length(l) => run_cfg.template.l = Some(l),
            AblationSetting::Criterion(c) => run_cfg.search.criterion = c,
        }
        let template = PromptTemplate {
            task_kind: run_cfg.task,
            num_task_slots: run_cfg.template.l.unwrap_or(5),
            has_user_slot: run_cfg.template.personalized,
            placement: run_cfg.template.placement,
            user_slot_placement: run_cfg.template.user_slot_placement,
        };
        let sub = dir.join(setting.slug());
        ensure_dir(&sub)?;
        let run = run_one_search(&model, &ws, &run_cfg, template, &sub)?;
        save_assignment(
            &sub.join("checkpoint.prompt"),
            &run.template,
            &run.checkpoint.assignment,
            &ws.vocab,
        )?;
        let report = evaluate_prompt(
            &model,
            &ws.split.test,
            &run.template,
            &run.checkpoint.assignment,
            &ws.vocab,
            run_cfg.search.test_beam,
            run_cfg.repeats,
            run_cfg.search.seed,
        )?;
        println!("{}: test surrogate {}", setting.label(), report.surrogate);
        rows.push((setting.label(), report));
    }

    let mut table = String::new();
    writeln!(table, "# ablation: {}", spec.variant.as_str()).unwrap();
    writeln!(table, "task = {}", cfg.task).unwrap();
    writeln!(table, "seed = {}", cfg.search.seed).unwrap();
    if cfg.task == TaskKind::Explanation {
        writeln!(table, "# text metrics shown x100").unwrap();
    }
    writeln!(table).unwrap();
    write!(table, "{:<28}", "setting").unwrap();
    for c in columns {
        write!(table, " {:>10}", c.to_string()).unwrap();
    }
    writeln!(table).unwrap();
    for (label, report) in &rows {
        write!(table, "{label:<28}").unwrap();
        for c in columns {
            write!(table, " {:>10}", table_value(c, report.get(c))).unwrap();
        }
        writeln!(table).unwrap();
    }
    std::fs::write(dir.join("table.txt"), &table)?;
    print!("{table}");
    Ok(())
}
