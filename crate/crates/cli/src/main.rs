//! `tweetmtl`: synthesize, filter, pre-train, train, evaluate and predict.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Bad flags, config files or inputs. Exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(
    name = "tweetmtl",
    version,
    about = "Cross-stitch multitask detector for blackmarket tweets"
)]
pub struct Cli {
    /// TOML file layered over the built-in defaults.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Seed for every random stream; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a labeled synthetic dataset.
    Synth(SynthArgs),
    /// Drop too-short and non-English records.
    Filter(FilterArgs),
    /// Pre-train the character encoder on hashtag prediction.
    PretrainEncoder(PretrainArgs),
    /// Write the twelve content features as TSV.
    Features(FeaturesArgs),
    /// Train one model on a whole dataset.
    Train(TrainArgs),
    /// Cross-validate the three competing models, or score a checkpoint.
    Eval(EvalArgs),
    /// Classify tweets with a trained model.
    Predict(PredictArgs),
    /// Run gradient checks and the other numerical self-tests.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub blackmarket: Option<usize>,
    #[arg(long)]
    pub genuine: Option<usize>,
    /// Fraction of boundary examples drawn from the other class's templates.
    #[arg(long)]
    pub difficulty: Option<f64>,
}

#[derive(Args, Debug)]
pub struct FilterArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// TSV of rejected ids and reasons.
    #[arg(long)]
    pub rejections: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PretrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub max_examples: Option<usize>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub char_dim: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub min_hashtag_count: Option<usize>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct LexiconArgs {
    /// Sentiment lexicon TSV (token, polarity in [-1, 1]).
    #[arg(long)]
    pub sentiment: Option<PathBuf>,
    /// Part-of-speech lexicon.
    #[arg(long)]
    pub pos: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FeaturesArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub lexicons: LexiconArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum ArchArg {
    Multitask,
    SingleTask,
    FeatureConcat,
}

#[derive(Args, Debug, Clone, Default)]
pub struct ModelFlags {
    #[arg(long, value_enum)]
    pub architecture: Option<ArchArg>,
    /// Weight of the engagement regression loss.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Comma-separated hidden widths, e.g. 128,64.
    #[arg(long, value_delimiter = ',')]
    pub widths: Option<Vec<usize>>,
    /// Start the cross-stitch units at the identity.
    #[arg(long)]
    pub identity_stitches: bool,
    /// Keep the cross-stitch units at their initial values.
    #[arg(long)]
    pub freeze_stitches: bool,
    #[arg(long)]
    pub no_batchnorm: bool,
    /// Regress raw counts instead of standardized log counts.
    #[arg(long)]
    pub raw_targets: bool,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub encoder: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelFlags,
    #[command(flatten)]
    pub lexicons: LexiconArgs,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub encoder: PathBuf,
    /// Report JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Cross-validation folds.
    #[arg(long)]
    pub k: Option<usize>,
    /// Score this checkpoint on the dataset instead of cross-validating.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub flags: ModelFlags,
    #[command(flatten)]
    pub lexicons: LexiconArgs,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["text", "input"]))]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub encoder: PathBuf,
    /// A single tweet text.
    #[arg(long)]
    pub text: Option<String>,
    /// Dataset of records to classify; labels are ignored.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// JSONL output; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub lexicons: LexiconArgs,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Perturb one analytic gradient so the suite must fail.
    #[arg(long)]
    pub inject_fault: bool,
    /// Also write the report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// 2 for usage and schema problems, 1 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    use tweetmtl::Error as E;
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Parse { .. }
                | E::DuplicateId { .. }
                | E::Config(_)
                | E::PolarityRange { .. }
                | E::LabelOutOfRange { .. }
                | E::ConfigMismatch(_)
                | E::Format(_)
                | E::Version { .. }
                | E::Truncated(_)
                | E::InvalidBatch(_) => 2,
                _ => 1,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
