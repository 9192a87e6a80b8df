//! The `ttr` command-line tool.
//!
//! Settings resolve as: command-line flag, then `TTR_*` environment variable,
//! then the `--config` file (`key = value` lines, keys named like the long
//! flags), then the built-in default. Every output file is written through a
//! temporary file and renamed into place.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data errors.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dense::SimilarityMetric;
use crate::eval::MetricSource;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] crate::error::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "ttr",
    version,
    about = "Mixed text/table retrieval: BM25 and dense search, hard negatives, recall@k evaluation",
    max_term_width = 100
)]
pub struct Cli {
    /// Configuration file with `key = value` lines.
    #[arg(
        long,
        global = true,
        env = "TTR_CONFIG",
        hide_env_values = true,
        value_name = "FILE"
    )]
    pub config: Option<PathBuf>,

    /// Cap on worker threads (default: available cores).
    #[arg(
        long,
        global = true,
        env = "TTR_THREADS",
        hide_env_values = true,
        value_name = "N"
    )]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

/// Passage and table JSONL inputs; both flags may repeat.
#[derive(Debug, Clone, Args)]
pub struct CorpusArgs {
    /// Passage JSONL file ({"id","title","text"}).
    #[arg(long = "passages", value_name = "FILE")]
    pub passages: Vec<PathBuf>,

    /// Table JSONL file ({"id","page_title","section_title","caption","header","rows"}).
    #[arg(long = "tables", value_name = "FILE")]
    pub tables: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SearchMode {
    Sparse,
    Dense,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate one dataset file and write it back normalized (namespaced ids, padded rows).
    #[command(group = clap::ArgGroup::new("input").required(true).multiple(false))]
    Ingest {
        /// Passage JSONL to normalize.
        #[arg(long, group = "input", value_name = "FILE")]
        passages: Option<PathBuf>,
        /// Table JSONL to normalize.
        #[arg(long, group = "input", value_name = "FILE")]
        tables: Option<PathBuf>,
        /// Query JSONL to normalize.
        #[arg(long, group = "input", value_name = "FILE")]
        queries: Option<PathBuf>,
        /// Normalized output file.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },

    /// Write the linearized text of every document as {"id","modality","text"} JSONL.
    Linearize {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Output JSONL file.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },

    /// Build a BM25 index (BMI1 file) over the corpus.
    IndexSparse {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Term-frequency saturation [default: 1.2].
        #[arg(long, env = "TTR_K1", hide_env_values = true)]
        k1: Option<f64>,
        /// Length normalization in [0, 1] [default: 0.75].
        #[arg(long, env = "TTR_B", hide_env_values = true)]
        b: Option<f64>,
        /// Output index file.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },

    /// Feature-hash documents (or, with --queries, questions) into an EMB1 file.
    EmbedHash {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Embed the questions of this query JSONL instead of documents.
        #[arg(long, value_name = "FILE")]
        queries: Option<PathBuf>,
        /// Embedding dimension, at least 8 [default: 256].
        #[arg(long, env = "TTR_DIM", hide_env_values = true)]
        dim: Option<usize>,
        /// Hash seed [default: 0].
        #[arg(long, env = "TTR_SEED", hide_env_values = true)]
        seed: Option<u64>,
        /// Output EMB1 file.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },

    /// Validate an EMB1 embedding file and install it as a dense index.
    IndexDense {
        /// EMB1 document embeddings (from embed-hash or an external encoder).
        #[arg(long, value_name = "FILE")]
        embeddings: PathBuf,
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Metric the index will serve: dot or cosine [default: dot].
        #[arg(long, env = "TTR_METRIC", hide_env_values = true)]
        metric: Option<SimilarityMetric>,
        /// Output index file.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },

    /// Retrieve the top-k documents for one query or a query file.
    #[command(group = clap::ArgGroup::new("query-input").required(true).multiple(false))]
    Search {
        /// Retrieval mode [default: sparse].
        #[arg(long, value_enum, env = "TTR_MODE", hide_env_values = true)]
        mode: Option<SearchMode>,
        /// BMI1 index (sparse) or EMB1 index (dense).
        #[arg(long, value_name = "FILE")]
        index: PathBuf,
        /// Hits per query [default: 100].
        #[arg(long, env = "TTR_K", hide_env_values = true)]
        k: Option<usize>,
        /// Dense similarity: dot or cosine [default: dot].
        #[arg(long, env = "TTR_METRIC", hide_env_values = true)]
        metric: Option<SimilarityMetric>,
        /// A single query; output is one {"doc_id","score","rank"} line per hit.
        #[arg(long, group = "query-input", value_name = "TEXT")]
        query: Option<String>,
        /// Query JSONL; output is a run file with one line per query.
        #[arg(long, group = "query-input", value_name = "FILE")]
        queries: Option<PathBuf>,
        /// Dense mode: EMB1 query vectors keyed by query id (default: hash-embed the text).
        #[arg(long, value_name = "FILE")]
        query_embeddings: Option<PathBuf>,
        /// Dense mode: seed for hash-embedding query text [default: 0].
        #[arg(long, env = "TTR_SEED", hide_env_values = true)]
        seed: Option<u64>,
        /// Output JSONL file.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },

    /// Mine one BM25 hard negative per query and write training samples.
    MineNegatives {
        /// BMI1 index built over exactly this corpus.
        #[arg(long, value_name = "FILE")]
        index: PathBuf,
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Query JSONL.
        #[arg(long, value_name = "FILE")]
        queries: PathBuf,
        /// Ranked candidates inspected per query [default: 100].
        #[arg(long, env = "TTR_MAX_CANDIDATES", hide_env_values = true)]
        max_candidates: Option<usize>,
        /// Output training-sample JSONL.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },

    /// Sample passages (keeping every gold passage) and merge them with all tables.
    BuildMixed {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Query JSONL whose gold ids must be kept; may repeat.
        #[arg(long, value_name = "FILE")]
        queries: Vec<PathBuf>,
        /// Total passages to keep [default: 500000].
        #[arg(long, env = "TTR_SAMPLE_SIZE", hide_env_values = true)]
        sample_size: Option<usize>,
        /// Sampling seed [default: 0].
        #[arg(long, env = "TTR_SEED", hide_env_values = true)]
        seed: Option<u64>,
        /// Output passage JSONL.
        #[arg(long, value_name = "FILE")]
        out_passages: PathBuf,
        /// Output table JSONL.
        #[arg(long, value_name = "FILE")]
        out_tables: PathBuf,
    },

    /// Keep only queries labeled context_independent.
    FilterContext {
        /// Query JSONL.
        #[arg(long, value_name = "FILE")]
        queries: PathBuf,
        /// Label JSONL ({"id","label"}).
        #[arg(long, value_name = "FILE")]
        labels: PathBuf,
        /// Output query JSONL.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },

    /// Compute recall@k (per dataset and overall) for a run file.
    Eval {
        /// Run file ({"query_id","hits":[{"doc_id","score"}]}).
        #[arg(long, value_name = "FILE")]
        run: PathBuf,
        /// Query JSONL.
        #[arg(long, value_name = "FILE")]
        queries: PathBuf,
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Comma-separated cutoffs [default: 10,20,100].
        #[arg(long, value_delimiter = ',', env = "TTR_KS", hide_env_values = true)]
        ks: Option<Vec<usize>>,
        /// Questions sampled per dataset, or `all` [default: 1000].
        #[arg(long, env = "TTR_SAMPLE_N", hide_env_values = true)]
        sample_n: Option<SampleN>,
        /// Sampling seed [default: 0].
        #[arg(long, env = "TTR_SEED", hide_env_values = true)]
        seed: Option<u64>,
        /// Retrieval source recorded in the report [default: sparse].
        #[arg(long, env = "TTR_SOURCE", hide_env_values = true)]
        source: Option<MetricSource>,
        /// Also report recall@K by lexical-overlap bin.
        #[arg(long, env = "TTR_STRATIFY_K", hide_env_values = true, value_name = "K")]
        stratify_k: Option<usize>,
        /// Comma-separated overlap bin edges [default: 0,20,40,60,80,100].
        #[arg(long, value_delimiter = ',', env = "TTR_EDGES", hide_env_values = true)]
        edges: Option<Vec<f64>>,
        /// Output report JSON.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Tab-separated (bin, recall) data for plotting; needs --stratify-k.
        #[arg(long, value_name = "FILE")]
        plot_data: Option<PathBuf>,
    },

    /// Lexical overlap of each question with its gold document, binned.
    OverlapReport {
        /// Query JSONL.
        #[arg(long, value_name = "FILE")]
        queries: PathBuf,
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Comma-separated bin edges [default: 0,20,40,60,80,100].
        #[arg(long, value_delimiter = ',', env = "TTR_EDGES", hide_env_values = true)]
        edges: Option<Vec<f64>>,
        /// Output report JSON.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
}

/// `--sample-n` value: a count or `all`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleN(pub Option<usize>);

impl std::str::FromStr for SampleN {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(SampleN(None));
        }
        s.parse::<usize>()
            .map(|n| SampleN(Some(n)))
            .map_err(|e| format!("expected a count or `all`: {e}"))
    }
}

/// Parses `argv` (program name first) and runs the command, printing errors
/// to stderr. Returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(path) => config::ConfigFile::load(path)?,
        None => config::ConfigFile::default(),
    };
    let threads = config.resolve_opt(cli.threads, "threads")?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))?;
    pool.install(|| commands::dispatch(cli.command, &config))
}
