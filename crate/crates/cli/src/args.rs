use std::net::SocketAddr;
use std::path::PathBuf;

use bcaid_core::agents::DEFAULT_GO_K;
use bcaid_core::corpus::{DEFAULT_DEG_COUNT, MOUSE};
use bcaid_core::evaluation::{DEFAULT_N_RANDOM, DEFAULT_TRIALS};
use bcaid_core::retrieval::DEFAULT_TOP_PM;
use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "bcaid", version, about = "Annotate brain cell-type marker gene sets")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Append-only store journal.
    #[arg(long, global = true, env = "BCAID_STORE", default_value = "bcaid-store.jsonl")]
    pub store: PathBuf,
    /// Directory for reports and run manifests.
    #[arg(long, global = true, env = "BCAID_OUT", default_value = "bcaid-out")]
    pub out: PathBuf,
    /// tracing filter, e.g. `info` or `bcaid_core=debug`.
    #[arg(long, global = true, env = "BCAID_LOG", default_value = "warn")]
    pub log: String,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load the corpus and atlas and register clusters and abstracts in the store.
    Ingest(IngestArgs),
    /// Turn GO terms into prose and write the verbalization table.
    Verbalize(VerbalizeArgs),
    /// Run the annotation pipeline and persist its records.
    Annotate(AnnotateArgs),
    /// (Re)build cell-type summaries from stored annotations.
    Summarize(SummarizeArgs),
    /// Score predictions against truths: GO-topology hit rate and ROUGE.
    Evaluate(EvaluateArgs),
    /// Random Biological Process baseline with a one-sample t-test.
    Baseline(BaselineArgs),
    /// Over-representation analysis against a GMT library.
    Ora(OraArgs),
    /// Word frequencies of summaries, optionally for a keyword subset.
    Wordfreq(WordfreqArgs),
    /// Write the store as JSONL files.
    Export(ExportArgs),
    /// Serve the JSON API used by the portal.
    Serve(ServeArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::Verbalize(_) => "verbalize",
            Command::Annotate(_) => "annotate",
            Command::Summarize(_) => "summarize",
            Command::Evaluate(_) => "evaluate",
            Command::Baseline(_) => "baseline",
            Command::Ora(_) => "ora",
            Command::Wordfreq(_) => "wordfreq",
            Command::Export(_) => "export",
            Command::Serve(_) => "serve",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct OntologyArgs {
    /// Gene Ontology in OBO format.
    #[arg(long, env = "BCAID_OBO")]
    pub obo: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CorpusArgs {
    /// NCBI gene_info (TSV).
    #[arg(long, env = "BCAID_GENE_INFO")]
    pub gene_info: PathBuf,
    /// NCBI gene2pubmed (TSV).
    #[arg(long, env = "BCAID_GENE2PUBMED")]
    pub gene2pubmed: PathBuf,
    /// Abstracts, one JSON object per line.
    #[arg(long, env = "BCAID_ABSTRACTS")]
    pub abstracts: PathBuf,
    #[arg(long, env = "BCAID_TAX_ID", default_value_t = MOUSE)]
    pub tax_id: u32,
}

#[derive(Debug, Clone, Args)]
pub struct AtlasArgs {
    /// Cluster metadata and marker lists (CSV).
    #[arg(long, env = "BCAID_ATLAS")]
    pub atlas: PathBuf,
    /// Gene x cluster expression matrix; enables the Top-DEG marker sets.
    #[arg(long, env = "BCAID_EXPRESSION")]
    pub expression: Option<PathBuf>,
    #[arg(long, env = "BCAID_DEG_COUNT", default_value_t = DEFAULT_DEG_COUNT)]
    pub deg_count: usize,
}

#[derive(Debug, Clone, Args)]
pub struct GatewayArgs {
    /// `mock` (synthetic replies), `mock:<replay.jsonl>` (strict replay) or `http`.
    #[arg(long, env = "BCAID_GATEWAY", default_value = "mock")]
    pub gateway: String,
    /// Chat-completions URL for `--gateway http`.
    #[arg(long, env = "BCAID_LM_ENDPOINT")]
    pub lm_endpoint: Option<String>,
    #[arg(long, env = "BCAID_LM_MODEL", default_value = "gpt-4o")]
    pub lm_model: String,
    #[arg(long, env = "BCAID_API_KEY", hide_env_values = true)]
    pub api_key: Option<String>,
    /// Embeddings URL. Without it the hashed bag-of-words embedder is used.
    #[arg(long, env = "BCAID_EMBED_ENDPOINT")]
    pub embed_endpoint: Option<String>,
    #[arg(long, env = "BCAID_EMBED_MODEL", default_value = "text-embedding-3-small")]
    pub embed_model: String,
    /// Embedding width; defaults to 256 offline and 1536 over http.
    #[arg(long, env = "BCAID_EMBED_DIM")]
    pub embed_dim: Option<usize>,
    /// Write every language-model exchange of this run as a replay file.
    #[arg(long, env = "BCAID_RECORD")]
    pub record: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub atlas: AtlasArgs,
}

#[derive(Debug, Clone, Args)]
pub struct VerbalizeArgs {
    #[command(flatten)]
    pub ontology: OntologyArgs,
    #[command(flatten)]
    pub gateway: GatewayArgs,
    /// Ask the language model; otherwise the deterministic template is used.
    #[arg(long)]
    pub use_lm: bool,
    /// Defaults to `<out>/verbalized.jsonl`.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct AnnotateArgs {
    #[command(flatten)]
    pub ontology: OntologyArgs,
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub atlas: AtlasArgs,
    #[command(flatten)]
    pub gateway: GatewayArgs,
    /// Verbalization table from `bcaid verbalize`; templates when absent.
    #[arg(long, env = "BCAID_VERBALIZED")]
    pub verbalized: Option<PathBuf>,
    /// Only these cluster ids (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub clusters: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_TOP_PM)]
    pub n_top_pm: usize,
    #[arg(long, default_value_t = DEFAULT_GO_K)]
    pub go_k: usize,
    #[arg(long, short = 'j', env = "BCAID_JOBS", default_value_t = 1)]
    pub jobs: usize,
    /// Skip the per-cluster cell-type summary.
    #[arg(long)]
    pub no_summary: bool,
    /// Stamp every record with this instant instead of the wall clock.
    #[arg(long, env = "BCAID_FIXED_TIME")]
    pub fixed_time: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, Args)]
pub struct SummarizeArgs {
    #[command(flatten)]
    pub ontology: OntologyArgs,
    #[command(flatten)]
    pub gateway: GatewayArgs,
    #[arg(long, value_delimiter = ',')]
    pub clusters: Vec<String>,
    #[arg(long, env = "BCAID_FIXED_TIME")]
    pub fixed_time: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub ontology: OntologyArgs,
    /// JSONL rows `{"id", "go_terms": [...], "text"?}`.
    #[arg(long)]
    pub predictions: PathBuf,
    /// JSONL rows `{"id", "go_term", "text"?}`.
    #[arg(long)]
    pub truths: PathBuf,
    /// Defaults to `<out>/evaluation.json`.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub ontology: OntologyArgs,
    /// Predictions kept in every trial (same format as `evaluate`).
    #[arg(long)]
    pub base: PathBuf,
    #[arg(long)]
    pub truths: PathBuf,
    /// Observed accuracy to test; computed from `--predictions` when given,
    /// otherwise the base accuracy.
    #[arg(long, conflicts_with = "predictions")]
    pub observed: Option<f64>,
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_N_RANDOM)]
    pub n_random: usize,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    pub trials: usize,
    #[arg(long, env = "BCAID_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Defaults to `<out>/baseline.json`.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct OraArgs {
    /// Labelled gene-set library (GMT).
    #[arg(long)]
    pub library: PathBuf,
    /// Query sets (GMT). Without it and `--genes`, every stored marker set is a query.
    #[arg(long, conflicts_with = "genes")]
    pub queries: Option<PathBuf>,
    /// A single query set (comma separated symbols).
    #[arg(long, value_delimiter = ',')]
    pub genes: Vec<String>,
    /// One symbol per line; defaults to every gene in the library.
    #[arg(long)]
    pub background: Option<PathBuf>,
    /// Defaults to `<out>/ora.jsonl`.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct WordfreqArgs {
    /// JSONL texts; the stored cell-type summaries when absent.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Field holding the text in `--input` rows.
    #[arg(long, default_value = "text")]
    pub field: String,
    /// Also count the subset of texts mentioning this phrase.
    #[arg(long)]
    pub keyword: Option<String>,
    /// Extra stopwords (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub stopwords: Vec<String>,
    /// Keep only the most frequent N tokens.
    #[arg(long)]
    pub top: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ExportArgs {
    /// Defaults to `<out>/export`.
    #[arg(long)]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[arg(long, env = "BCAID_BIND", default_value = "127.0.0.1:8080")]
    pub bind: SocketAddr,
    /// Browser origin allowed by CORS; `*` for any.
    #[arg(long, env = "BCAID_CORS_ORIGIN")]
    pub cors_origin: Option<String>,
    /// Atlas viewer URL with a `{cluster_id}` placeholder.
    #[arg(long, env = "BCAID_ATLAS_LINK")]
    pub atlas_link: Option<String>,
}
