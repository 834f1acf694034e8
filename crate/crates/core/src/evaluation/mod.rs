//! ROUGE, GO-topology accuracy, the random-BP baseline, over-representation
//! analysis and word frequencies.

mod baseline;
mod enrichment;
mod rouge;
pub mod stats;
mod topo;
mod wordfreq;

pub use baseline::{
    one_sample_t_test, random_baseline, BaselineConfig, BaselineReport, DEFAULT_N_RANDOM,
    DEFAULT_TRIALS,
};
pub use enrichment::{
    best_term, contributing_gene_histogram, contributing_histogram, ora_enrich,
    ContributingHistogram, EnrichmentResult, CONTRIBUTING_THRESHOLDS,
};
pub use rouge::{rouge, RougeMode, RougeScore};
pub use topo::{topo_hit_rate, TopoEvalReport};
pub use wordfreq::{
    rank_of, word_frequencies, write_frequency_csv, WordCount, ENGLISH_STOPWORDS, MIN_TOKEN_LEN,
};
