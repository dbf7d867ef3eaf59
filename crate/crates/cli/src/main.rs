//! `repal`: refine sentence embeddings by subtracting redundant components,
//! evaluate the effect on scored sentence pairs and inspect it.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use repal_core::eval::{DEFAULT_GRID1, DEFAULT_GRID2};

#[derive(Debug, Parser)]
#[command(name = "repal", version, about, long_about = None)]
struct Cli {
    /// Seed for every randomized step (sampling, synthetic data).
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct MaskArgs {
    /// Fraction of tokens treated as keywords (at least one).
    #[arg(long, default_value_t = 0.3)]
    mask_ratio: f64,

    /// Literal that replaces keywords in the masked sentence.
    #[arg(long, default_value = "[MASK]")]
    mask_token: String,

    /// Stopword list, one word per line (`#` starts a comment).
    #[arg(long)]
    stopwords: Option<PathBuf>,

    /// Input is already tokenized: one token per whitespace gap.
    #[arg(long)]
    pretokenized: bool,
}

#[derive(Debug, Clone, Args)]
struct EncoderArg {
    /// Encoder backend: `mock[:dim[:salt]]`, `file:<path>` or `http:<url>`.
    #[arg(long)]
    encoder: String,
}

#[derive(Debug, Clone, Args)]
struct WeightArgs {
    /// Sentence-level weight; overrides `--params`.
    #[arg(long)]
    lambda1: Option<f64>,

    /// Corpus-level weight; overrides `--params`.
    #[arg(long)]
    lambda2: Option<f64>,

    /// JSON report (from `tune` or `eval`) to read the weights from.
    #[arg(long)]
    params: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Replace the keywords of each input line with the mask literal.
    Mask {
        /// One sentence per line.
        #[arg(long)]
        input: PathBuf,
        /// Corpus for document frequencies (defaults to the input itself).
        #[arg(long)]
        tfidf_corpus: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        mask: MaskArgs,
    },

    /// Precompute embeddings into a JSONL store usable as `file:<path>`.
    EncodeCache {
        #[command(flatten)]
        encoder: EncoderArg,
        /// Sentence-per-line file (repeatable).
        #[arg(long)]
        input: Vec<PathBuf>,
        /// Scored-pair dataset (repeatable).
        #[arg(long)]
        dataset: Vec<PathBuf>,
        /// Also store the word-deleted variants used by `diagnose`.
        #[arg(long)]
        deletions: bool,
        /// Store to create or extend.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        mask: MaskArgs,
    },

    /// Grid-search the two weights on a dev set.
    Tune {
        /// Dev split (`a<TAB>b<TAB>gold`).
        #[arg(long)]
        dev: Option<PathBuf>,
        /// Test split; only used together with `--tune-on-test`.
        #[arg(long)]
        test: Option<PathBuf>,
        /// Tune directly on `--test` (parity experiments only).
        #[arg(long)]
        tune_on_test: bool,
        /// `start:stop:step` or comma list for lambda1.
        #[arg(long, default_value = DEFAULT_GRID1)]
        grid1: String,
        /// `start:stop:step` or comma list for lambda2.
        #[arg(long, default_value = DEFAULT_GRID2)]
        grid2: String,
        #[command(flatten)]
        encoder: EncoderArg,
        /// JSON report including the full grid surface.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        mask: MaskArgs,
    },

    /// Score a dataset before and after refinement.
    Eval {
        #[arg(long, visible_alias = "dataset")]
        test: PathBuf,
        #[command(flatten)]
        weights: WeightArgs,
        /// Switch one redundancy term off: none, no-sen or no-cor.
        #[arg(long, default_value = "none")]
        ablation: String,
        #[command(flatten)]
        encoder: EncoderArg,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        mask: MaskArgs,
    },

    /// Diagnostics: word importance, overlap ratio, spectral sweep, whitening.
    Diagnose {
        #[command(subcommand)]
        command: DiagnoseCommand,
    },

    /// Generate the synthetic boilerplate benchmark.
    ///
    /// Every sentence is one of three fixed 8-word prefixes built from
    /// stopwords ("so it is that in all of the", "and it is that in some of
    /// these", "but it is that in most of those") followed by 1-3 content
    /// words from a fixed 50-word vocabulary. Sentence B shares a uniformly
    /// drawn number of A's content words and fills up with fresh ones. The
    /// gold score is the Jaccard overlap of the two content-word sets.
    GenSynthetic {
        #[arg(long, default_value_t = 200)]
        n_pairs: usize,
        /// Output TSV (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the first `--dev-pairs` pairs here and the rest to `--out`.
        #[arg(long, requires = "dev_pairs")]
        dev_out: Option<PathBuf>,
        #[arg(long, requires = "dev_out")]
        dev_pairs: Option<usize>,
    },
}

#[derive(Debug, Clone, Args)]
struct DiagnoseCommon {
    #[arg(long)]
    dataset: PathBuf,
    #[command(flatten)]
    encoder: EncoderArg,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    mask: MaskArgs,
}

#[derive(Debug, Subcommand)]
enum DiagnoseCommand {
    /// Mean importance of each word, with and without refinement (TSV).
    Importance {
        #[command(flatten)]
        common: DiagnoseCommon,
        #[command(flatten)]
        weights: WeightArgs,
    },
    /// Share of the most important words that are non-keywords.
    Overlap {
        #[command(flatten)]
        common: DiagnoseCommon,
        #[command(flatten)]
        weights: WeightArgs,
        #[arg(long, default_value_t = repal_core::diagnose::DEFAULT_TOP_K)]
        top_k: usize,
        /// Analyse this many pairs drawn with `--seed` instead of all.
        #[arg(long)]
        sample: Option<usize>,
    },
    /// Spearman and top eigenvalue along one weight axis (CSV).
    Sweep {
        #[command(flatten)]
        common: DiagnoseCommon,
        /// lambda1 or lambda2.
        #[arg(long, default_value = "lambda2")]
        axis: String,
        #[arg(long, default_value = "0:2:0.1")]
        values: String,
        /// Value of the other weight.
        #[arg(long, default_value_t = 0.0)]
        fixed: f64,
    },
    /// Whitening baseline on the raw encodings.
    Whitening {
        #[command(flatten)]
        common: DiagnoseCommon,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
