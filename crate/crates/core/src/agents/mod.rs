//! Query, RAG and cell-summary agents over a pluggable language model.
//!
//! The workflow steps map onto the operations here as follows:
//!
//! | steps | operation |
//! |-------|-----------|
//! | initial annotation | [`generate_initial_annotation`], then [`GoMapper::map`] |
//! | 1–3 literature | [`crate::retrieval::gather_evidence`] |
//! | 4–7 refinement | [`refine_with_evidence`] for TopPM and TopGene, each mapped to GO |
//! | 8–11 cell type | [`summarize_cluster`] |

mod go_map;
mod grounding;
mod pipeline;

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::clock::iso_seconds;
use crate::corpus::{AbstractStore, CellCluster, MarkerGeneSet, MarkerType};
use crate::error::{Error, Result};
use crate::gateway::{EmbeddingGateway, LmExchange, LmGateway};
use crate::prompts;
use crate::retrieval::{EvidenceSet, EvidenceVariant};
use crate::text::{sentence_count, squash_whitespace, truncate_sentences};

pub use go_map::{map_to_go_terms, GoMapper, GoPrediction, DEFAULT_GO_K};
pub use grounding::{cited_pmids, ground_citations, Grounded};
pub use pipeline::{
    ClusterOutcome, FailureEntry, Pipeline, PipelineConfig, RunSummary, Stage,
};

/// Refined summaries are held to this many sentences.
pub const MAX_REFINED_SENTENCES: usize = 2;
pub const MAX_BRIEF_SENTENCES: usize = 4;

/// Abstract bodies are clipped to this many characters inside prompts.
const ABSTRACT_PROMPT_CHARS: usize = 1200;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinementFlags {
    /// No evidence was available for this variant; the summary is derived
    /// from the initial narrative.
    pub literature_free: bool,
    /// No citation survived grounding.
    pub uncited: bool,
    /// PMIDs cited by the model but absent from the evidence.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub removed_citations: Vec<u64>,
    /// A corrective re-ask was issued for sentence count.
    pub corrected: bool,
    /// The reply was cut at the second sentence boundary.
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedAnnotation {
    pub variant: EvidenceVariant,
    pub summary: String,
    pub cited_pmids: Vec<u64>,
    pub go_terms: Vec<GoPrediction>,
    pub flags: RefinementFlags,
    pub exchange_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedPair {
    pub top_pm: RefinedAnnotation,
    pub top_gene: RefinedAnnotation,
}

impl RefinedPair {
    pub fn get(&self, variant: EvidenceVariant) -> &RefinedAnnotation {
        match variant {
            EvidenceVariant::TopPm => &self.top_pm,
            EvidenceVariant::TopGene => &self.top_gene,
        }
    }
}

/// Everything produced for one marker gene set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub cluster_id: String,
    pub marker_type: MarkerType,
    pub genes: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unresolved_genes: Vec<String>,
    pub initial_narrative: String,
    pub initial_go_terms: Vec<GoPrediction>,
    pub initial_exchange_ids: Vec<String>,
    pub refined: RefinedPair,
    pub evidence: EvidenceSet,
    #[serde(with = "iso_seconds")]
    pub created_at: DateTime<Utc>,
}

impl AnnotationRecord {
    pub fn go_prediction_count(&self) -> usize {
        self.initial_go_terms.len() + self.refined.top_pm.go_terms.len() + self.refined.top_gene.go_terms.len()
    }

    /// Initial, TopPM and TopGene GO ids in that order.
    pub fn all_go_ids(&self) -> impl Iterator<Item = &str> {
        self.initial_go_terms
            .iter()
            .chain(&self.refined.top_pm.go_terms)
            .chain(&self.refined.top_gene.go_terms)
            .map(|p| p.go_id.as_str())
    }

    pub fn cited_pmids(&self) -> BTreeSet<u64> {
        self.refined
            .top_pm
            .cited_pmids
            .iter()
            .chain(&self.refined.top_gene.cited_pmids)
            .copied()
            .collect()
    }

    /// Narrative, TopPM and TopGene summaries joined for keyword search.
    pub fn annotation_texts(&self) -> [&str; 3] {
        [
            &self.initial_narrative,
            &self.refined.top_pm.summary,
            &self.refined.top_gene.summary,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceLink {
    pub gene: String,
    pub pmid: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellContext {
    pub anatomical_location: String,
    pub nt_type_label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTypeSummary {
    pub cluster_id: String,
    pub brief: String,
    pub detailed: String,
    pub evidence_links: Vec<EvidenceLink>,
    pub context: CellContext,
    /// Marker types whose annotations fed the summary.
    pub sources: Vec<MarkerType>,
    pub missing: Vec<MarkerType>,
    pub exchange_ids: Vec<String>,
    #[serde(with = "iso_seconds")]
    pub created_at: DateTime<Utc>,
}

/// Shared dependencies of the agents.
#[derive(Clone, Copy)]
pub struct AgentContext<'a> {
    pub lm: &'a dyn LmGateway,
    pub embedder: &'a dyn EmbeddingGateway,
    pub mapper: &'a GoMapper,
    pub abstracts: &'a AbstractStore,
    pub go_k: usize,
}

/// Query agent: a first description of the gene set's collective function.
/// An empty reply is re-asked once.
pub fn generate_initial_annotation(
    gene_set: &MarkerGeneSet,
    lm: &dyn LmGateway,
) -> Result<(String, Vec<LmExchange>)> {
    if gene_set.genes.is_empty() {
        return Err(Error::Validation("empty gene set".into()));
    }
    let genes = gene_set.genes.join(", ");
    let messages = prompts::initial_annotation().render(&[("genes", genes.as_str())])?;
    let mut exchanges = Vec::new();
    for _ in 0..2 {
        let ex = lm
            .complete(&messages)
            .map_err(|e| Error::Annotation(format!("initial annotation: {e}")))?;
        let narrative = squash_whitespace(&ex.response);
        exchanges.push(ex);
        if !narrative.is_empty() {
            return Ok((narrative, exchanges));
        }
    }
    Err(Error::Annotation(format!(
        "empty initial annotation for cluster {} ({})",
        gene_set.cluster_id, gene_set.marker_type
    )))
}

fn cell_context_block(cluster: &CellCluster) -> String {
    format!(
        "Class: {}\nSubclass: {}\nSupertype: {}\nNeurotransmitter: {}\nAnatomical location: {}",
        cluster.class_label,
        cluster.subclass_label,
        cluster.supertype_label,
        or_unknown(&cluster.nt_type_label),
        or_unknown(&cluster.anatomical_location),
    )
}

fn or_unknown(s: &str) -> &str {
    if s.trim().is_empty() {
        "unknown"
    } else {
        s
    }
}

fn clip(text: &str, max_chars: usize) -> &str {
    match text.char_indices().nth(max_chars) {
        Some((i, _)) => &text[..i],
        None => text,
    }
}

/// RAG agent: rewrites the initial narrative against one evidence variant.
///
/// The reply is held to two sentences (one corrective re-ask, then
/// truncation) and citations outside the supplied evidence are removed.
/// With no evidence for the variant, the result is derived from the initial
/// narrative and flagged literature-free.
pub fn refine_with_evidence(
    gene_set: &MarkerGeneSet,
    narrative: &str,
    evidence: &EvidenceSet,
    cluster: &CellCluster,
    variant: EvidenceVariant,
    ctx: &AgentContext<'_>,
) -> Result<(RefinedAnnotation, Vec<LmExchange>)> {
    let selected = evidence.variant(variant);
    if selected.is_empty() {
        let summary = truncate_sentences(&ground_citations(narrative, &BTreeSet::new()).text, MAX_REFINED_SENTENCES);
        let go_terms = ctx.mapper.map(&summary, ctx.embedder, ctx.go_k)?;
        return Ok((
            RefinedAnnotation {
                variant,
                summary,
                cited_pmids: Vec::new(),
                go_terms,
                flags: RefinementFlags {
                    literature_free: true,
                    uncited: true,
                    ..Default::default()
                },
                exchange_ids: Vec::new(),
            },
            Vec::new(),
        ));
    }

    let allowed: BTreeSet<u64> = selected.iter().map(|s| s.pmid).collect();
    let abstracts = selected
        .iter()
        .map(|s| match ctx.abstracts.get(s.pmid) {
            Some(a) => format!(
                "[PMID:{}] {} {}",
                a.pmid,
                squash_whitespace(&a.title),
                squash_whitespace(clip(&a.body, ABSTRACT_PROMPT_CHARS))
            ),
            None => format!("[PMID:{}]", s.pmid),
        })
        .collect::<Vec<_>>()
        .join("\n");
    let genes = gene_set.genes.join(", ");
    let context = cell_context_block(cluster);
    let variant_label = variant.to_string();
    let messages = prompts::refine().render(&[
        ("genes", genes.as_str()),
        ("narrative", narrative),
        ("context", context.as_str()),
        ("variant", variant_label.as_str()),
        ("abstracts", abstracts.as_str()),
    ])?;

    let fail = |e: Error| Error::Annotation(format!("{variant} refinement: {e}"));
    let first = ctx.lm.complete(&messages).map_err(fail)?;
    let mut reply = squash_whitespace(&first.response);
    let mut exchanges = vec![first];
    let mut flags = RefinementFlags::default();

    let count = sentence_count(&reply);
    if count > MAX_REFINED_SENTENCES {
        flags.corrected = true;
        let pmid_list = allowed.iter().map(u64::to_string).collect::<Vec<_>>().join(", ");
        let count = count.to_string();
        let correction = prompts::refine_correction().render(&[
            ("previous", reply.as_str()),
            ("count", count.as_str()),
            ("pmids", pmid_list.as_str()),
        ])?;
        let second = ctx.lm.complete(&correction).map_err(fail)?;
        let corrected = squash_whitespace(&second.response);
        exchanges.push(second);
        if !corrected.is_empty() {
            reply = corrected;
        }
        if sentence_count(&reply) > MAX_REFINED_SENTENCES {
            flags.truncated = true;
            reply = truncate_sentences(&reply, MAX_REFINED_SENTENCES);
        }
    }

    let grounded = ground_citations(&reply, &allowed);
    if grounded.text.is_empty() {
        return Err(Error::Annotation(format!("{variant} refinement: empty reply")));
    }
    flags.removed_citations = grounded.removed;
    flags.uncited = grounded.kept.is_empty();
    let go_terms = ctx.mapper.map(&grounded.text, ctx.embedder, ctx.go_k)?;
    Ok((
        RefinedAnnotation {
            variant,
            summary: grounded.text,
            cited_pmids: grounded.kept,
            go_terms,
            flags,
            exchange_ids: exchanges.iter().map(|e| e.id.clone()).collect(),
        },
        exchanges,
    ))
}

fn annotation_block(record: &AnnotationRecord) -> String {
    let cites = record
        .cited_pmids()
        .iter()
        .map(|p| format!("[PMID:{p}]"))
        .collect::<Vec<_>>()
        .join(" ");
    format!(
        "Marker set: {}\nGenes: {}\nAnnotation: {}\nTopPM: {}\nTopGene: {}\nCitations: {}",
        record.marker_type.label(),
        record.genes.join(", "),
        record.initial_narrative,
        record.refined.top_pm.summary,
        record.refined.top_gene.summary,
        if cites.is_empty() { "none".into() } else { cites },
    )
}

fn split_brief_detailed(reply: &str) -> (String, String) {
    let upper = reply.to_uppercase();
    match (upper.find("BRIEF:"), upper.find("DETAILED:")) {
        (Some(b), Some(d)) if b < d => (
            reply[b + "BRIEF:".len()..d].trim().to_string(),
            reply[d + "DETAILED:".len()..].trim().to_string(),
        ),
        (Some(b), None) => {
            let rest = reply[b + "BRIEF:".len()..].trim().to_string();
            (rest.clone(), rest)
        }
        _ => (reply.trim().to_string(), reply.trim().to_string()),
    }
}

/// Cell-summary agent: merges every available marker-set annotation of a
/// cluster with its anatomical and neurotransmitter context.
pub fn summarize_cluster(
    cluster: &CellCluster,
    records: &[AnnotationRecord],
    ctx: &AgentContext<'_>,
    created_at: DateTime<Utc>,
) -> Result<(CellTypeSummary, Vec<LmExchange>)> {
    if records.is_empty() {
        return Err(Error::Annotation(format!(
            "cluster {}: no annotation records to summarise",
            cluster.cluster_id
        )));
    }
    let mut records: Vec<&AnnotationRecord> = records.iter().collect();
    records.sort_by_key(|r| r.marker_type);
    let sources: Vec<MarkerType> = records.iter().map(|r| r.marker_type).collect();
    let missing: Vec<MarkerType> = MarkerType::ALL
        .into_iter()
        .filter(|m| !sources.contains(m))
        .collect();
    let label_list = |list: &[MarkerType]| {
        if list.is_empty() {
            "none".to_string()
        } else {
            list.iter().map(|m| m.label()).collect::<Vec<_>>().join(", ")
        }
    };
    let taxonomy = format!(
        "{} > {} > {}",
        cluster.class_label, cluster.subclass_label, cluster.supertype_label
    );
    let blocks = records
        .iter()
        .map(|r| annotation_block(r))
        .collect::<Vec<_>>()
        .join("\n\n");
    let available = label_list(&sources);
    let missing_label = label_list(&missing);
    let messages = prompts::cell_summary().render(&[
        ("cluster_id", cluster.cluster_id.as_str()),
        ("taxonomy", taxonomy.as_str()),
        ("location", or_unknown(&cluster.anatomical_location)),
        ("nt_type", or_unknown(&cluster.nt_type_label)),
        ("available", available.as_str()),
        ("missing", missing_label.as_str()),
        ("annotations", blocks.as_str()),
    ])?;
    let ex = ctx
        .lm
        .complete(&messages)
        .map_err(|e| Error::Annotation(format!("cell summary: {e}")))?;

    let allowed: BTreeSet<u64> = records.iter().flat_map(|r| r.cited_pmids()).collect();
    let (brief, detailed) = split_brief_detailed(&ex.response);
    let brief = truncate_sentences(&ground_citations(&brief, &allowed).text, MAX_BRIEF_SENTENCES);
    let detailed = ground_citations(&detailed, &allowed).text;
    if brief.is_empty() {
        return Err(Error::Annotation(format!(
            "cluster {}: empty cell summary",
            cluster.cluster_id
        )));
    }

    let mut evidence_links: Vec<EvidenceLink> = Vec::new();
    for r in &records {
        for variant in [EvidenceVariant::TopPm, EvidenceVariant::TopGene] {
            for &pmid in &r.refined.get(variant).cited_pmids {
                for gene in r.evidence.supporting_genes.get(&pmid).into_iter().flatten() {
                    let link = EvidenceLink {
                        gene: gene.clone(),
                        pmid,
                    };
                    if !evidence_links.contains(&link) {
                        evidence_links.push(link);
                    }
                }
            }
        }
    }

    Ok((
        CellTypeSummary {
            cluster_id: cluster.cluster_id.clone(),
            brief,
            detailed,
            evidence_links,
            context: CellContext {
                anatomical_location: cluster.anatomical_location.clone(),
                nt_type_label: cluster.nt_type_label.clone(),
            },
            sources,
            missing,
            exchange_ids: vec![ex.id.clone()],
            created_at,
        },
        vec![ex],
    ))
}
