//! Literature agent: candidate abstracts for a gene set, semantic ranking
//! and TopPM / TopGene evidence selection.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{AbstractRecord, Corpus, MarkerGeneSet};
use crate::error::{Error, Result};
use crate::gateway::{cosine, EmbeddingGateway};

pub const DEFAULT_TOP_PM: usize = 5;

/// Candidates are embedded in batches of this size; a failed batch is
/// reported by its pmids.
const RANK_BATCH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceVariant {
    TopPm,
    TopGene,
}

impl fmt::Display for EvidenceVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvidenceVariant::TopPm => "TopPM",
            EvidenceVariant::TopGene => "TopGene",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredAbstract {
    pub pmid: u64,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub via_gene: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceSet {
    pub top_pm: Vec<ScoredAbstract>,
    pub top_gene: Vec<ScoredAbstract>,
    pub query_digest: String,
    /// Size of the candidate pool before selection.
    pub candidate_count: usize,
    /// Set members with at least one linked abstract, in set order.
    pub literature_genes: Vec<String>,
    /// For each selected pmid, the set members it is linked to.
    pub supporting_genes: BTreeMap<u64, Vec<String>>,
}

impl EvidenceSet {
    pub fn variant(&self, variant: EvidenceVariant) -> &[ScoredAbstract] {
        match variant {
            EvidenceVariant::TopPm => &self.top_pm,
            EvidenceVariant::TopGene => &self.top_gene,
        }
    }

    pub fn pmids(&self, variant: EvidenceVariant) -> BTreeSet<u64> {
        self.variant(variant).iter().map(|s| s.pmid).collect()
    }

    pub fn all_pmids(&self) -> BTreeSet<u64> {
        self.top_pm.iter().chain(&self.top_gene).map(|s| s.pmid).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.top_pm.is_empty() && self.top_gene.is_empty()
    }
}

/// Candidate pool for one gene set.
#[derive(Debug, Clone)]
pub struct Candidates<'a> {
    /// Deduplicated, ascending by pmid.
    pub abstracts: Vec<&'a AbstractRecord>,
    /// Gene symbol → its ingested candidate pmids.
    pub per_gene: BTreeMap<String, Vec<u64>>,
    pub unresolved: Vec<String>,
}

impl Candidates<'_> {
    pub fn pmids(&self) -> Vec<u64> {
        self.abstracts.iter().map(|a| a.pmid).collect()
    }
}

/// Union of ingested abstracts linked to any resolvable gene of the set.
/// An empty pool is a valid outcome.
pub fn collect_candidates<'a>(gene_set: &MarkerGeneSet, corpus: &'a Corpus) -> Candidates<'a> {
    let resolution = corpus.resolve(&gene_set.genes);
    let mut per_gene = BTreeMap::new();
    let mut pool = BTreeMap::new();
    for (symbol, gene_id) in &resolution.resolved {
        let linked: Vec<u64> = corpus
            .links
            .pmids(*gene_id)
            .iter()
            .copied()
            .filter(|p| corpus.abstracts.contains(*p))
            .collect();
        for &p in &linked {
            pool.entry(p)
                .or_insert_with(|| corpus.abstracts.get(p).expect("filtered to ingested"));
        }
        if !linked.is_empty() {
            per_gene.insert(symbol.clone(), linked);
        }
    }
    Candidates {
        abstracts: pool.into_values().collect(),
        per_gene,
        unresolved: resolution.unresolved,
    }
}

/// Gene symbols and the initial narrative, space separated.
pub fn build_query(genes: &[String], narrative: &str) -> String {
    let mut q = genes.join(" ");
    if !narrative.is_empty() {
        q.push(' ');
        q.push_str(narrative);
    }
    q
}

pub fn query_digest(query: &str) -> String {
    hex::encode(Sha256::digest(query.as_bytes()))
}

/// Scores each candidate by cosine(embed(query), embed(title + " " + body)),
/// sorted by descending score with ascending pmid breaking ties.
pub fn rank_abstracts(
    query: &str,
    candidates: &[&AbstractRecord],
    gateway: &dyn EmbeddingGateway,
) -> Result<Vec<ScoredAbstract>> {
    if candidates.is_empty() {
        return Ok(Vec::new());
    }
    let query_vec = gateway
        .embed(&[query.to_string()])
        .map_err(|e| Error::Retrieval {
            pmids: Vec::new(),
            message: format!("query embedding: {e}"),
        })?
        .pop()
        .ok_or_else(|| Error::Retrieval {
            pmids: Vec::new(),
            message: "no query embedding returned".into(),
        })?;

    let mut scored = Vec::with_capacity(candidates.len());
    for batch in candidates.chunks(RANK_BATCH) {
        let texts: Vec<String> = batch.iter().map(|a| a.text()).collect();
        let fail = |message: String| Error::Retrieval {
            pmids: batch.iter().map(|a| a.pmid).collect(),
            message,
        };
        let vectors = gateway.embed(&texts).map_err(|e| fail(e.to_string()))?;
        if vectors.len() != batch.len() {
            return Err(fail(format!("{} vectors for {} texts", vectors.len(), batch.len())));
        }
        for (a, v) in batch.iter().zip(&vectors) {
            let score = cosine(&query_vec, v);
            if !score.is_finite() {
                return Err(fail(format!("non-finite score for pmid {}", a.pmid)));
            }
            scored.push(ScoredAbstract {
                pmid: a.pmid,
                score,
                via_gene: None,
            });
        }
    }
    sort_ranked(&mut scored);
    Ok(scored)
}

fn sort_ranked(list: &mut [ScoredAbstract]) {
    list.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.pmid.cmp(&b.pmid)));
}

/// TopPM is the first `n_top_pm` ranked abstracts. TopGene holds, for each
/// gene (in set order) with candidates, its best-scoring abstract; when two
/// genes share a best abstract only the first keeps it.
pub fn select_evidence(
    ranked: &[ScoredAbstract],
    gene_set: &MarkerGeneSet,
    per_gene: &BTreeMap<String, Vec<u64>>,
    n_top_pm: usize,
    query: &str,
) -> EvidenceSet {
    let score: HashMap<u64, f64> = ranked.iter().map(|s| (s.pmid, s.score)).collect();
    let top_pm: Vec<ScoredAbstract> = ranked.iter().take(n_top_pm).cloned().collect();

    let mut taken = BTreeSet::new();
    let mut top_gene = Vec::new();
    let mut literature_genes = Vec::new();
    for gene in &gene_set.genes {
        let Some(pmids) = per_gene.get(gene) else {
            continue;
        };
        literature_genes.push(gene.clone());
        let best = pmids
            .iter()
            .filter_map(|p| score.get(p).map(|s| (*p, *s)))
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        if let Some((pmid, s)) = best {
            if taken.insert(pmid) {
                top_gene.push(ScoredAbstract {
                    pmid,
                    score: s,
                    via_gene: Some(gene.clone()),
                });
            }
        }
    }
    sort_ranked(&mut top_gene);

    let selected: BTreeSet<u64> = top_pm.iter().chain(&top_gene).map(|s| s.pmid).collect();
    let mut supporting_genes: BTreeMap<u64, Vec<String>> = BTreeMap::new();
    for gene in &gene_set.genes {
        for p in per_gene.get(gene).into_iter().flatten() {
            if selected.contains(p) {
                supporting_genes.entry(*p).or_default().push(gene.clone());
            }
        }
    }

    EvidenceSet {
        top_pm,
        top_gene,
        query_digest: query_digest(query),
        candidate_count: ranked.len(),
        literature_genes,
        supporting_genes,
    }
}

/// Steps 1–3 end to end: collect, rank, select.
pub fn gather_evidence(
    gene_set: &MarkerGeneSet,
    narrative: &str,
    corpus: &Corpus,
    gateway: &dyn EmbeddingGateway,
    n_top_pm: usize,
) -> Result<EvidenceSet> {
    let candidates = collect_candidates(gene_set, corpus);
    let query = build_query(&gene_set.genes, narrative);
    let ranked = rank_abstracts(&query, &candidates.abstracts, gateway)?;
    Ok(select_evidence(&ranked, gene_set, &candidates.per_gene, n_top_pm, &query))
}
