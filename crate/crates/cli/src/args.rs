use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "synwmd", version, about = "Syntax-aware word mover's distance: scoring and evaluation")]
pub struct Cli {
    /// Worker threads for pair scoring (default: logical cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score sentence pairs and write "pair_id<TAB>distance" lines.
    Score(ScoreArgs),
    /// Spearman correlation on an STS dataset.
    EvalSts(EvalStsArgs),
    /// Cross-validated kNN accuracy on a classification dataset.
    EvalCls(EvalClsArgs),
    /// Co-occurrence graph and PageRank summary for a corpus.
    GraphStats(GraphStatsArgs),
    /// Mean pairwise cosine distance between word vectors within sentences.
    CosineSpread(CosineSpreadArgs),
}

/// Method selection. Precedence: flags, then --config, then the preset.
#[derive(Debug, Default, Clone, Args)]
pub struct MethodArgs {
    /// Preset name (wmd-l2, wmd-cos, wmd-l2-idf, wmd-cos-idf, synwmd-swf, synwmd-full, synwmd-cls).
    #[arg(long)]
    pub method: Option<String>,
    /// TOML file with method keys (and optionally `method = "<preset>"`).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// uniform-count | idf | swf
    #[arg(long)]
    pub flow: Option<String>,
    /// none | subtree | ngram
    #[arg(long)]
    pub context: Option<String>,
    /// cosine | l2
    #[arg(long)]
    pub metric: Option<String>,
    /// Weight of the context term in the ground cost.
    #[arg(long)]
    pub a: Option<f64>,
    /// PageRank smoothing term.
    #[arg(long)]
    pub d: Option<f64>,
    /// Co-occurrence hop limit (tree) or window size (window).
    #[arg(long)]
    pub n: Option<usize>,
    /// Hop limit for subtree extraction.
    #[arg(long)]
    pub m: Option<usize>,
    /// tree | window
    #[arg(long)]
    pub graph_mode: Option<String>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub whiten: Option<bool>,
    /// skip | zero
    #[arg(long)]
    pub oov: Option<String>,
    /// uniform | flow
    #[arg(long)]
    pub subtree_weighting: Option<String>,
    /// centered | pair-mean
    #[arg(long)]
    pub aggregation: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Dependency-parsed corpus (CoNLL-U).
    #[arg(long)]
    pub corpus: PathBuf,
    /// Word vectors: text format, or JSONL with --contextual.
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Read per-token contextual vectors (JSONL) instead of a static table.
    #[arg(long)]
    pub contextual: bool,
    #[command(flatten)]
    pub filter: FilterArgs,
}

#[derive(Debug, Default, Clone, Args)]
pub struct FilterArgs {
    /// Replace the built-in stopword list (one word per line).
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    /// Keep stopwords.
    #[arg(long, conflicts_with = "stopwords")]
    pub no_stopwords: bool,
    /// Keep punctuation tokens.
    #[arg(long)]
    pub keep_punct: bool,
}

#[derive(Debug, Clone, Args)]
pub struct CacheArgs {
    /// Artifact cache root (default: $SYNWMD_CACHE_DIR, else no cache).
    #[arg(long, env = "SYNWMD_CACHE_DIR")]
    pub cache_dir: Option<PathBuf>,
    /// Disable the artifact cache.
    #[arg(long)]
    pub no_cache: bool,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Pairs: "pair_id<TAB>sent_a<TAB>sent_b" or STS "subset<TAB>gold<TAB>sent_a<TAB>sent_b".
    #[arg(long)]
    pub pairs: PathBuf,
    #[command(flatten)]
    pub method: MethodArgs,
    #[command(flatten)]
    pub cache: CacheArgs,
    /// Score dump (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run manifest (default: <out>.manifest.json when --out is given).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Write extracted subtrees as JSONL.
    #[arg(long)]
    pub dump_subtrees: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalStsArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// STS pairs "subset<TAB>gold<TAB>sent_a<TAB>sent_b".
    #[arg(long)]
    pub sts: PathBuf,
    /// Companion "sent_id<TAB>text" file; ids are checked against the corpus.
    #[arg(long)]
    pub sentences: Option<PathBuf>,
    #[command(flatten)]
    pub method: MethodArgs,
    #[command(flatten)]
    pub cache: CacheArgs,
    /// Report JSON (the text table goes to stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the score dump here.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub dump_subtrees: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalClsArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Classification examples "label<TAB>sent_id".
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    /// Inclusive k range, "lo..hi".
    #[arg(long, default_value = "1..30")]
    pub k_range: String,
    #[command(flatten)]
    pub method: MethodArgs,
    #[command(flatten)]
    pub cache: CacheArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GraphStatsArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Hop limit (tree mode) or window size (window mode).
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    /// tree | window
    #[arg(long, default_value = "tree")]
    pub mode: String,
    /// PageRank smoothing term.
    #[arg(long, default_value_t = 0.2)]
    pub d: f64,
    #[arg(long, default_value_t = 20)]
    pub top: usize,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    #[command(flatten)]
    pub filter: FilterArgs,
    /// Keep case distinctions between words.
    #[arg(long)]
    pub cased: bool,
    /// Write the weighted edge list as TSV.
    #[arg(long)]
    pub dump_edges: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CosineSpreadArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Also report the value after word-level whitening.
    #[arg(long)]
    pub whiten: bool,
    #[arg(long)]
    pub cased: bool,
}
