//! `numdenorm`: grammar queries, corpus generation, alignment, training,
//! inference and evaluation for spoken-to-written numeric denormalization.

mod commands;
mod config;
mod records;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use numdenorm::asrsim::ErrorModelError;
use numdenorm::corrector::CorrectorError;
use numdenorm::datasynth::DataError;
use numdenorm::evalkit::EvalError;
use numdenorm::numgrammar::GrammarError;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "numdenorm",
    version,
    about = "Spoken-to-written numeric denormalization toolkit"
)]
struct Cli {
    /// seed for every random choice; overrides the config file
    #[arg(long, global = true, env = "NUMDENORM_SEED")]
    seed: Option<u64>,
    /// JSON pipeline config; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the weighted spoken forms of a written value
    Verbalize(VerbalizeArgs),
    /// Generate train and test corpora from templates
    Gen(GenArgs),
    /// Simulate recognizer errors on a text field
    Corrupt(CorruptArgs),
    /// Tag and span-align two text fields
    Align(AlignArgs),
    /// Train a correction model on aligned examples
    Train(TrainArgs),
    /// Run a trained model over a text field
    Infer(InferArgs),
    /// Denormalize a text field with the rule grammar
    #[command(name = "denorm-rules")]
    DenormRules(DenormArgs),
    /// Score hypotheses against references
    Eval(EvalArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct VerbalizeArgs {
    /// written value, e.g. 4:15
    pub written: String,
    #[arg(long)]
    pub category: String,
    /// enable tail-only rules
    #[arg(long)]
    pub tail: bool,
    /// print one weighted draw instead of every candidate
    #[arg(long)]
    pub sample: bool,
    #[arg(long)]
    pub rules: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct GenArgs {
    /// output directory
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub per_template: Option<usize>,
    #[arg(long)]
    pub tail: bool,
    /// comma-separated categories; defaults to the sampled five
    #[arg(long)]
    pub categories: Option<String>,
    #[arg(long)]
    pub templates: Option<PathBuf>,
    #[arg(long)]
    pub rules: Option<PathBuf>,
    #[arg(long)]
    pub holdout_fraction: Option<f64>,
    #[arg(long)]
    pub holdout_salt: Option<u64>,
    #[arg(long)]
    pub short_max: Option<usize>,
    #[arg(long)]
    pub medium_max: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct CorruptArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// field holding the clean written text
    #[arg(long, default_value = "written")]
    pub field: String,
    /// JSON error model; the standard model when absent
    #[arg(long)]
    pub error_model: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct AlignArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "spoken")]
    pub from: String,
    #[arg(long, default_value = "written")]
    pub to: String,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// aligned examples
    #[arg(long)]
    pub input: PathBuf,
    /// model directory to write
    #[arg(long)]
    pub out: PathBuf,
    /// `toy` or `paper` layer sizes
    #[arg(long)]
    pub dims: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub loss_mix: Option<f64>,
    #[arg(long)]
    pub min_word_count: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct InferArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "spoken")]
    pub field: String,
}

#[derive(Debug, Args, Serialize)]
pub struct DenormArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "spoken")]
    pub field: String,
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// drop tail-only rules
    #[arg(long)]
    pub no_tail: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    /// reference set, `NAME=path`; repeatable
    #[arg(long = "ref", required = true)]
    pub refs: Vec<String>,
    /// hypothesis file, `SYSTEM:SET=path`; repeatable
    #[arg(long = "hyp", required = true)]
    pub hyps: Vec<String>,
    #[arg(long, default_value = "written")]
    pub ref_field: String,
    #[arg(long, default_value = "text")]
    pub hyp_field: String,
    /// also write the report as JSON
    #[arg(long)]
    pub json_out: Option<PathBuf>,
}

/// A command failure and its exit code class.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
    Internal(anyhow::Error),
}

impl Failure {
    fn kind(&self) -> &'static str {
        match self {
            Failure::Usage(_) => "usage",
            Failure::Data(_) => "data",
            Failure::Internal(_) => "internal",
        }
    }

    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) | Failure::Data(_) => 2,
            Failure::Internal(_) => 3,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Usage(e) | Failure::Data(e) | Failure::Internal(e) => format!("{e:#}"),
        }
    }
}

impl From<GrammarError> for Failure {
    fn from(e: GrammarError) -> Self {
        Failure::Data(e.into())
    }
}

impl From<DataError> for Failure {
    fn from(e: DataError) -> Self {
        Failure::Data(e.into())
    }
}

impl From<ErrorModelError> for Failure {
    fn from(e: ErrorModelError) -> Self {
        Failure::Data(e.into())
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        Failure::Data(e.into())
    }
}

impl From<CorrectorError> for Failure {
    fn from(e: CorrectorError) -> Self {
        match e {
            CorrectorError::Nn(_) => Failure::Internal(e.into()),
            _ => Failure::Data(e.into()),
        }
    }
}

fn report(kind: &str, message: &str) {
    let line = serde_json::json!({ "error": kind, "message": message });
    eprintln!("{line}");
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut cfg = config::PipelineConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    match cli.command {
        Command::Verbalize(a) => commands::verbalize(&cfg, &a),
        Command::Gen(a) => commands::gen(cfg, &a),
        Command::Corrupt(a) => commands::corrupt(cfg, &a),
        Command::Align(a) => commands::align(&cfg, &a),
        Command::Train(a) => commands::train(cfg, &a),
        Command::Infer(a) => commands::infer(&cfg, &a),
        Command::DenormRules(a) => commands::denorm_rules(cfg, &a),
        Command::Eval(a) => commands::eval(&cfg, &a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let message: Vec<&str> = text
                .lines()
                .map(str::trim)
                .take_while(|l| !l.starts_with("Usage:"))
                .filter(|l| !l.is_empty())
                .collect();
            report("usage", message.join(" ").trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    std::panic::set_hook(Box::new(|_| {}));
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(f)) => {
            report(f.kind(), &f.message());
            ExitCode::from(f.code())
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            report("internal", &msg);
            ExitCode::from(3)
        }
    }
}
