//! File formats and command-line driver for `rrg-core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod jsonl;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::Format;
use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "rrg", version, about = "Reward scoring, evaluation and toy GRPO training for structured report generation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug)]
pub struct Common {
    /// Output file, or output directory for `train`.
    #[arg(long)]
    pub out: PathBuf,
    /// Summary format on stdout.
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic study corpus.
    GenCorpus {
        /// Corpus spec JSON; built-in defaults when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the corpus spec seed (default 0).
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Parse raw emissions into structured outputs.
    Parse {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Label findings text with the rule-based labeler.
    Label {
        input: PathBuf,
        /// Lexicon JSON; the built-in lexicon when absent.
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Score predictions against reference studies.
    Reward {
        predictions: PathBuf,
        references: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Compute the metric suite for predictions.
    Eval {
        predictions: PathBuf,
        references: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Warm start and GRPO training of the toy policy.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the training (and generated corpus) seed (default 0).
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
}

/// Runs a parsed command and returns its stdout text.
pub fn execute(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::GenCorpus { config, seed, common } => {
            commands::cmd_gen_corpus(config.as_deref(), &common.out, seed, common.format)
        }
        Command::Parse { input, common } => commands::cmd_parse(&input, &common.out, common.format),
        Command::Label { input, lexicon, common } => {
            commands::cmd_label(&input, lexicon.as_deref(), &common.out, common.format)
        }
        Command::Reward { predictions, references, config, common } => {
            commands::cmd_reward(&predictions, &references, config.as_deref(), &common.out, common.format)
        }
        Command::Eval { predictions, references, config, common } => {
            commands::cmd_eval(&predictions, &references, config.as_deref(), &common.out, common.format)
        }
        Command::Train { config, seed, common } => commands::cmd_train(config.as_deref(), &common.out, seed, common.format),
    }
}

/// Parses arguments and runs. Returns the exit code, stdout and stderr text.
pub fn run<I, T>(args: I) -> (i32, String, String)
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => (0, e.to_string(), String::new()),
                _ => (1, String::new(), CliError::usage(e.to_string().trim_end()).to_json() + "\n"),
            };
        }
    };
    match execute(cli) {
        Ok(stdout) => (0, stdout, String::new()),
        Err(e) => (e.exit_code(), String::new(), e.to_json() + "\n"),
    }
}
