//! The `synwalk` command-line tool. [`run`] parses arguments, applies an
//! optional `--config` file and returns the process exit code.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

mod commands;
pub mod config;
mod load;
pub mod output;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(synwalk::Error),
}

impl From<synwalk::Error> for CliError {
    fn from(e: synwalk::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(synwalk::Error::Diverged { .. }) => EXIT_DIVERGED,
            CliError::Core(_) => EXIT_DATA,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "synwalk", version, about = "Syntactic random-walk embeddings and composition tensors")]
#[command(after_help = "Any subcommand accepts --config FILE with `key = value` lines; flags on the command line win.")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a synthetic parsed corpus from a random ground-truth model
    #[command(args_override_self = true)]
    Generate(GenerateArgs),
    /// Build a vocabulary from a parsed corpus
    #[command(args_override_self = true)]
    Ingest(IngestArgs),
    /// Count window pairs and (pair, context) triples
    #[command(args_override_self = true)]
    Count(CountArgs),
    /// Fit word embeddings to pair counts
    #[command(args_override_self = true)]
    TrainEmbeddings(TrainEmbeddingsArgs),
    /// Fit a CP composition tensor to triple counts
    #[command(args_override_self = true)]
    TrainTensor(TrainTensorArgs),
    /// Partition-function concentration and slice boundedness reports
    #[command(args_override_self = true)]
    Verify(VerifyArgs),
    /// Correlate empirical PMI3 with T(v_a, v_b, v_w) / d
    #[command(name = "pmi3-check", args_override_self = true)]
    Pmi3Check(Pmi3CheckArgs),
    /// Compose a two-word phrase and list its nearest words
    #[command(args_override_self = true)]
    Compose(ComposeArgs),
    /// Nearest words to a word
    #[command(args_override_self = true)]
    Neighbors(NeighborsArgs),
    /// Phrase similarity evaluation with fold-rotated weight tuning
    #[command(args_override_self = true)]
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    /// Output corpus (CoNLL-U style)
    #[arg(long)]
    pub out: PathBuf,
    /// Gold root/dependent positions (TSV)
    #[arg(long)]
    pub gold: Option<PathBuf>,
    /// Vocabulary in ground-truth id order
    #[arg(long)]
    pub vocab_out: Option<PathBuf>,
    /// Ground-truth embeddings
    #[arg(long)]
    pub emb_out: Option<PathBuf>,
    /// Ground-truth tensor (SCT1)
    #[arg(long)]
    pub tensor_out: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    pub vocab_size: usize,
    #[arg(long, default_value_t = 10)]
    pub dim: usize,
    #[arg(long, default_value_t = 2)]
    pub rank: usize,
    /// Weight of every CP component of the ground-truth tensor
    #[arg(long, default_value_t = 1.0)]
    pub tensor_weight: f64,
    /// Probability that a step emits a syntactic pair
    #[arg(long, default_value_t = 0.3)]
    pub p_syn: f64,
    /// Random walk step bound, scaled by 1/sqrt(d)
    #[arg(long, default_value_t = 0.5)]
    pub eps_w: f64,
    /// Upper end of the embedding norm distribution
    #[arg(long, default_value_t = 2.0)]
    pub kappa: f64,
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    /// Random walk steps
    #[arg(long, default_value_t = 1_000_000)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Independent walk segments (the output depends on this, not on threads)
    #[arg(long, default_value_t = 1)]
    pub segments: usize,
}

#[derive(Debug, Clone, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Vocabulary TSV (word, id, count)
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = synwalk::DEFAULT_MIN_COUNT)]
    pub min_count: u64,
    /// One stopword per line
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CountArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long, default_value_t = synwalk::DEFAULT_WINDOW)]
    pub window: usize,
    /// Dependency label mapping, e.g. `amod=ADJ_NOUN,obj=VERB_OBJ`
    #[arg(long)]
    pub relations: Option<String>,
    /// Pair counts (SPC1)
    #[arg(long)]
    pub pairs_out: Option<PathBuf>,
    /// Triple counts (STC1)
    #[arg(long)]
    pub triples_out: Option<PathBuf>,
    /// Also write `<out>.tsv` with words
    #[arg(long)]
    pub tsv: bool,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Clone, Args)]
pub struct OptimArgs {
    #[arg(long, default_value_t = 5)]
    pub epochs: usize,
    #[arg(long = "lr", default_value_t = 1e-3)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 1024)]
    pub batch_size: usize,
    /// Loss weight cap: f(x) = min(x, cap)
    #[arg(long, default_value_t = synwalk::training::DEFAULT_CAP)]
    pub cap: f64,
    #[arg(long, default_value_t = 0.1)]
    pub init_scale: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// 1 is the deterministic mode
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Per-epoch loss (TSV)
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainEmbeddingsArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    /// Embeddings (word2vec text)
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 300)]
    pub dim: usize,
    #[command(flatten)]
    pub optim: OptimArgs,
}

#[derive(Debug, Clone, Args)]
pub struct TrainTensorArgs {
    #[arg(long)]
    pub triples: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long)]
    pub emb: PathBuf,
    /// Tensor (SCT1); metadata goes to `<out>.json`
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub rank: usize,
    /// Update the embeddings together with the tensor
    #[arg(long)]
    pub joint: bool,
    /// Where joint training writes the updated embeddings
    #[arg(long)]
    pub emb_out: Option<PathBuf>,
    #[command(flatten)]
    pub optim: OptimArgs,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub emb: PathBuf,
    #[arg(long)]
    pub tensor: Option<PathBuf>,
    /// Align embeddings to this vocabulary
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Take boundedness pairs from these triple counts
    #[arg(long)]
    pub triples: Option<PathBuf>,
    /// Root words for Z_{c,a}, comma separated
    #[arg(long)]
    pub roots: Option<String>,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    /// Pairs checked for boundedness (random when no triples are given)
    #[arg(long, default_value_t = 1000)]
    pub max_pairs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Report (JSON)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-pair slice norms (TSV)
    #[arg(long)]
    pub bounds_tsv: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct Pmi3CheckArgs {
    #[arg(long)]
    pub triples: PathBuf,
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long)]
    pub emb: PathBuf,
    #[arg(long)]
    pub tensor: PathBuf,
    /// Only triples seen at least this often
    #[arg(long, default_value_t = 50.0)]
    pub min_count: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Every (a, b, w, count, empirical, predicted) point (TSV)
    #[arg(long)]
    pub points: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum MethodName {
    Additive,
    Weighted,
    Tensor,
    Sif,
    SifTensor,
}

#[derive(Debug, Clone, Args)]
pub struct ComposeArgs {
    #[arg(long)]
    pub emb: PathBuf,
    #[arg(long)]
    pub tensor: Option<PathBuf>,
    /// Word counts for sif weights
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Root word (the noun of an adjective-noun phrase, the object of a verb-object phrase)
    #[arg(long, requires = "b", conflicts_with = "phrase")]
    pub a: Option<String>,
    /// Dependent word
    #[arg(long, requires = "a")]
    pub b: Option<String>,
    /// Two words in surface order; the second is the root
    #[arg(long)]
    pub phrase: Option<String>,
    /// Defaults to tensor when a tensor is given, additive otherwise
    #[arg(long, value_enum)]
    pub method: Option<MethodName>,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    /// Weight the dependent instead of the root
    #[arg(long)]
    pub swap: bool,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = synwalk::composition::DEFAULT_SIF_A)]
    pub sif_a: f64,
    #[arg(long, default_value_t = 10)]
    pub neighbors: usize,
    /// Allow the phrase's own words among the neighbours
    #[arg(long)]
    pub keep_constituents: bool,
}

#[derive(Debug, Clone, Args)]
pub struct NeighborsArgs {
    #[arg(long)]
    pub emb: PathBuf,
    #[arg(long)]
    pub word: String,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Ratings TSV: subject, w1, w2, w3, w4, rating, type
    #[arg(long, required_unless_present = "published", conflicts_with = "published")]
    pub dataset: Option<PathBuf>,
    /// Ratings in the whitespace layout of the published release
    #[arg(long)]
    pub published: Option<PathBuf>,
    /// Write the loaded ratings as TSV
    #[arg(long)]
    pub convert_out: Option<PathBuf>,
    #[arg(long)]
    pub emb: Option<PathBuf>,
    #[arg(long)]
    pub tensor: Option<PathBuf>,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// AN, VO or NN; all rows when omitted
    #[arg(long = "type")]
    pub phrase_type: Option<String>,
    /// Comma separated; defaults to additive,weighted plus tensor when a tensor is given
    #[arg(long, value_enum, value_delimiter = ',')]
    pub methods: Vec<MethodName>,
    #[arg(long, default_value_t = 3)]
    pub folds: usize,
    /// Pick weights on the test subjects (an upper bound, not a result)
    #[arg(long)]
    pub cheat: bool,
    #[arg(long)]
    pub average_ratings: bool,
    #[arg(long)]
    pub zscore: bool,
    /// Tune the dependent's weight in weighted additive
    #[arg(long)]
    pub swap: bool,
    #[arg(long, default_value_t = synwalk::composition::DEFAULT_SIF_A)]
    pub sif_a: f64,
    /// Results (JSON)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Inserts config-file arguments right after the subcommand name.
fn apply_config(mut args: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let Some(path) = config::extract_path(&mut args).map_err(CliError::Usage)? else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", PathBuf::from(&path).display())))?;
    let entries = config::parse(&text).map_err(CliError::Usage)?;
    let cmd = Cli::command();
    let Some(pos) = args.iter().skip(1).position(|a| {
        a.to_str().is_some_and(|s| cmd.get_subcommands().any(|c| c.get_name() == s))
    }) else {
        return Ok(args);
    };
    let pos = pos + 1;
    let name = args[pos].to_string_lossy().into_owned();
    let sub = cmd.find_subcommand(&name).expect("subcommand located above");
    let (extra, unused) = config::to_args(&entries, sub);
    for key in unused {
        eprintln!("config: `{key}` is not used by {name}");
    }
    args.splice(pos + 1..pos + 1, extra);
    Ok(args)
}

/// Runs the tool on `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args = match apply_config(argv.into_iter().map(Into::into).collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::command().try_get_matches_from(args).and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
