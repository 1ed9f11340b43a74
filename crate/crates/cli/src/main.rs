//! `promptforge`: dataset synthesis, backbone training, prompt search,
//! evaluation, and ablation sweeps, driven by one config file.
//!
//! Exit codes: 0 success, 1 validation error (bad arguments, config, or
//! inputs), 2 runtime error (I/O, corrupt weights, diverged training).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use promptforge_core::Error;

use commands::{AblationSpec, AblationVariant};
use config::RunConfig;

#[derive(Parser)]
#[command(name = "promptforge", version, about = "Discrete prompt search pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration file (`key = value` lines with [section] headers).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the command's own seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory root.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic interaction log.
    Synth(CommonArgs),
    /// Train the frozen backbone on manual-prompt pairs and save weights.
    TrainBackbone(CommonArgs),
    /// Search for trigger tokens and write the best checkpoint.
    Search(CommonArgs),
    /// Evaluate a prompt checkpoint side by side with the manual prompt.
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        /// Prompt checkpoint file (default: the search run's checkpoint).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Data split to evaluate on: val or test.
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Sweep one design axis and tabulate test metrics per setting.
    Ablate {
        #[command(flatten)]
        common: CommonArgs,
        /// Axis to sweep: trigger_position, user_token_position,
        /// prompt_length, or selection_criterion.
        #[arg(long)]
        variant: String,
    },
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Synth(c) | Command::TrainBackbone(c) | Command::Search(c) => c,
            Command::Eval { common, .. } | Command::Ablate { common, .. } => common,
        }
    }
}

/// Applies `--seed` to the seed the command actually consumes and `--out`
/// to the output root.
fn apply_overrides(cfg: &mut RunConfig, command: &Command) {
    let common = command.common();
    if let Some(out) = &common.out {
        cfg.paths.out = Some(out.clone());
    }
    if let Some(seed) = common.seed {
        match command {
            Command::Synth(_) => cfg.synth.seed = seed,
            Command::TrainBackbone(_) => cfg.backbone.seed = seed,
            Command::Search(_) | Command::Eval { .. } | Command::Ablate { .. } => {
                cfg.search.seed = seed
            }
        }
    }
}

fn run(command: &Command) -> promptforge_core::Result<()> {
    let mut cfg = config::load_config(&command.common().config)?;
    apply_overrides(&mut cfg, command);
    match command {
        Command::Synth(_) => commands::cmd_synth(&cfg),
        Command::TrainBackbone(_) => commands::cmd_train_backbone(&cfg),
        Command::Search(_) => commands::cmd_search(&cfg),
        Command::Eval { checkpoint, split, .. } => {
            commands::cmd_eval(&cfg, checkpoint.clone(), split)
        }
        Command::Ablate { variant, .. } => {
            let variant: AblationVariant = variant.parse()?;
            commands::cmd_ablate(&cfg, &AblationSpec::for_variant(variant))
        }
    }
}

/// Validation failures exit 1; failures of the environment exit 2.
fn exit_for(err: &Error) -> ExitCode {
    match err {
        Error::InvalidArgument(_)
        | Error::InvalidConfig(_)
        | Error::Parse { .. }
        | Error::Eval(_)
        | Error::UnknownToken(..)
        | Error::SequenceTooLong { .. } => ExitCode::from(1),
        Error::Io(_)
        | Error::TrainingDiverged { .. }
        | Error::WeightFormat(_)
        | Error::WeightTruncated { .. } => ExitCode::from(2),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version land here with success-class kinds.
            let code = if e.exit_code() == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_for(&e)
        }
    }
}
