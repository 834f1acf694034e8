//! Input corpora: gene registry, gene→PubMed links, abstracts, GMT gene-set
//! libraries, atlas clusters and expression-derived marker sets.

mod abstracts;
mod atlas;
mod deg;
mod genes;
mod gmt;

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use abstracts::{ingest_abstracts, AbstractRecord, AbstractStore};
pub use atlas::{ingest_atlas, CellCluster, ClusterRegistry, ScaleManifest, Taxonomy, ATLAS_SCALE};
pub use deg::{generate_top_deg_sets, top_k_degs, ExpressionMatrix, DEFAULT_DEG_COUNT};
pub use genes::{parse_gene2pubmed, parse_gene_info, GeneLinks, GeneRecord, GeneRegistry, TaxFilter};
pub use gmt::{parse_gmt, serialize_gmt, LabeledGeneSet};

pub const HUMAN: u32 = 9606;
pub const MOUSE: u32 = 10090;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkerType {
    ClusterCombo,
    Merfish,
    Tf,
    Top20Deg,
}

impl MarkerType {
    pub const ALL: [MarkerType; 4] = [
        MarkerType::ClusterCombo,
        MarkerType::Merfish,
        MarkerType::Tf,
        MarkerType::Top20Deg,
    ];

    /// Identifier used in file headers, URLs and JSON.
    pub fn key(self) -> &'static str {
        match self {
            MarkerType::ClusterCombo => "cluster_combo",
            MarkerType::Merfish => "merfish",
            MarkerType::Tf => "tf",
            MarkerType::Top20Deg => "top20_deg",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            MarkerType::ClusterCombo => "Cluster_Combo",
            MarkerType::Merfish => "MERFISH",
            MarkerType::Tf => "TF",
            MarkerType::Top20Deg => "Top 20 DEG",
        }
    }
}

impl fmt::Display for MarkerType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for MarkerType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_alphanumeric())
            .collect::<String>()
            .to_lowercase();
        match norm.as_str() {
            "clustercombo" | "combo" | "combomarkers" => Ok(MarkerType::ClusterCombo),
            "merfish" => Ok(MarkerType::Merfish),
            "tf" => Ok(MarkerType::Tf),
            "top20deg" | "top20" => Ok(MarkerType::Top20Deg),
            _ => Err(Error::Validation(format!(
                "unknown marker type {s:?} (expected one of cluster_combo, merfish, tf, top20_deg)"
            ))),
        }
    }
}

/// One cluster's marker genes of one type. Genes are non-empty and
/// deduplicated case-insensitively, keeping the first spelling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkerGeneSet {
    pub cluster_id: String,
    pub marker_type: MarkerType,
    pub genes: Vec<String>,
}

impl MarkerGeneSet {
    pub fn new(
        cluster_id: impl Into<String>,
        marker_type: MarkerType,
        genes: impl IntoIterator<Item = impl Into<String>>,
    ) -> Result<Self> {
        let cluster_id = cluster_id.into();
        let genes = dedup_symbols(genes.into_iter().map(Into::into));
        if genes.is_empty() {
            return Err(Error::Validation(format!(
                "cluster {cluster_id}: empty {marker_type} gene set"
            )));
        }
        Ok(Self {
            cluster_id,
            marker_type,
            genes,
        })
    }
}

pub(crate) fn dedup_symbols(genes: impl Iterator<Item = String>) -> Vec<String> {
    let mut seen = BTreeSet::new();
    genes
        .map(|g| g.trim().to_string())
        .filter(|g| !g.is_empty() && seen.insert(g.to_lowercase()))
        .collect()
}

/// Orders cluster ids numerically when both are integers, lexically otherwise.
pub fn cluster_order(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        _ => a.cmp(b),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))
}

/// Reads an atlas CSV and, when an expression matrix is given, derives the
/// top-k DEG set of every cluster from it.
pub fn load_atlas(atlas: &Path, expression: Option<&Path>, deg_count: usize) -> Result<ClusterRegistry> {
    let mut registry = ingest_atlas(open(atlas)?)?;
    if let Some(path) = expression {
        let matrix = ExpressionMatrix::from_csv(open(path)?)?;
        generate_top_deg_sets(&mut registry, &matrix, deg_count)?;
    }
    Ok(registry)
}

/// Symbols of a gene set split by whether the registry knows them.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneResolution {
    pub resolved: Vec<(String, u64)>,
    pub unresolved: Vec<String>,
}

/// Everything the literature agent reads.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub genes: GeneRegistry,
    pub links: GeneLinks,
    pub abstracts: AbstractStore,
    pub tax_id: u32,
}

impl Corpus {
    /// Loads gene_info, gene2pubmed and an abstract JSONL file for one species.
    pub fn from_files(
        gene_info: &Path,
        gene2pubmed: &Path,
        abstracts: &Path,
        tax_id: u32,
    ) -> Result<Self> {
        let filter = TaxFilter::only([tax_id]);
        let genes = parse_gene_info(open(gene_info)?, &filter)?;
        let links = parse_gene2pubmed(open(gene2pubmed)?, &filter)?;
        let abstracts = ingest_abstracts(open(abstracts)?, &links)?;
        Ok(Self {
            genes,
            links,
            abstracts,
            tax_id,
        })
    }

    pub fn resolve(&self, symbols: &[String]) -> GeneResolution {
        let mut out = GeneResolution::default();
        for s in symbols {
            match self.genes.resolve(self.tax_id, s) {
                Some(g) => out.resolved.push((s.clone(), g.gene_id)),
                None => out.unresolved.push(s.clone()),
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn marker_type_parsing() {
        assert_eq!("Cluster_Combo".parse::<MarkerType>().unwrap(), MarkerType::ClusterCombo);
        assert_eq!("MERFISH".parse::<MarkerType>().unwrap(), MarkerType::Merfish);
        assert_eq!("top20_deg".parse::<MarkerType>().unwrap(), MarkerType::Top20Deg);
        assert_eq!("Top 20 DEG".parse::<MarkerType>().unwrap(), MarkerType::Top20Deg);
        assert!("summary".parse::<MarkerType>().is_err());
        for m in MarkerType::ALL {
            assert_eq!(m.key().parse::<MarkerType>().unwrap(), m);
        }
    }

    #[test]
    fn gene_sets_dedup_and_reject_empty() {
        let s = MarkerGeneSet::new("1", MarkerType::Tf, ["Drd1", "drd1", " Th ", ""]).unwrap();
        assert_eq!(s.genes, vec!["Drd1", "Th"]);
        assert!(MarkerGeneSet::new("1", MarkerType::Tf, Vec::<String>::new()).is_err());
    }

    #[test]
    fn cluster_ids_sort_naturally() {
        let mut ids = vec!["10", "9", "b", "a", "100"];
        ids.sort_by(|a, b| cluster_order(a, b));
        assert_eq!(ids, vec!["9", "10", "100", "a", "b"]);
    }
}
