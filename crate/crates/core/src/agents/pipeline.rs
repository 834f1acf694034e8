use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::{Deserialize, Serialize};

use super::{
    generate_initial_annotation, refine_with_evidence, summarize_cluster, AgentContext,
    AnnotationRecord, CellTypeSummary, GoMapper, RefinedPair, DEFAULT_GO_K,
};
use crate::clock::Clock;
use crate::corpus::{CellCluster, Corpus, MarkerGeneSet, MarkerType};
use crate::error::{Error, Result};
use crate::gateway::{EmbeddingGateway, LmExchange, LmGateway};
use crate::ontology::OntologyGraph;
use crate::retrieval::{
    build_query, collect_candidates, rank_abstracts, select_evidence, EvidenceVariant,
    DEFAULT_TOP_PM,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub n_top_pm: usize,
    pub go_k: usize,
    /// Worker threads; clusters are processed concurrently.
    pub jobs: usize,
    /// Produce a cell-type summary per cluster after its gene sets.
    pub summarize: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            n_top_pm: DEFAULT_TOP_PM,
            go_k: DEFAULT_GO_K,
            jobs: 1,
            summarize: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    InitialAnnotation,
    GoMapping,
    Retrieval,
    Refinement,
    Validation,
    Summary,
}

/// One isolated failure. The pipeline records it and moves on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureEntry {
    pub cluster_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marker_type: Option<MarkerType>,
    pub stage: Stage,
    pub reason_code: String,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct ClusterOutcome {
    pub cluster_id: String,
    pub records: Vec<AnnotationRecord>,
    pub summary: Option<CellTypeSummary>,
    pub exchanges: Vec<LmExchange>,
    pub failures: Vec<FailureEntry>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub clusters: usize,
    pub records: usize,
    pub summaries: usize,
    pub exchanges: usize,
    pub failures: usize,
}

/// The full workflow over a set of clusters.
pub struct Pipeline<'a> {
    pub corpus: &'a Corpus,
    pub ontology: &'a OntologyGraph,
    pub mapper: &'a GoMapper,
    pub lm: &'a dyn LmGateway,
    pub embedder: &'a dyn EmbeddingGateway,
    pub clock: &'a dyn Clock,
    pub config: PipelineConfig,
}

struct StageError(Stage, Error);

impl<'a> Pipeline<'a> {
    fn agent_context(&self) -> AgentContext<'a> {
        AgentContext {
            lm: self.lm,
            embedder: self.embedder,
            mapper: self.mapper,
            abstracts: &self.corpus.abstracts,
            go_k: self.config.go_k,
        }
    }

    /// Initial annotation, literature retrieval, both refinements and their
    /// GO mappings for one marker gene set.
    pub fn annotate_gene_set(
        &self,
        cluster: &CellCluster,
        set: &MarkerGeneSet,
    ) -> Result<(AnnotationRecord, Vec<LmExchange>)> {
        self.annotate_staged(cluster, set).map_err(|StageError(_, e)| e)
    }

    fn annotate_staged(
        &self,
        cluster: &CellCluster,
        set: &MarkerGeneSet,
    ) -> Result<(AnnotationRecord, Vec<LmExchange>), StageError> {
        let ctx = self.agent_context();
        let at = |stage: Stage| move |e: Error| StageError(stage, e);

        let (narrative, mut exchanges) =
            generate_initial_annotation(set, self.lm).map_err(at(Stage::InitialAnnotation))?;
        let initial_go_terms = self
            .mapper
            .map(&narrative, self.embedder, self.config.go_k)
            .map_err(at(Stage::GoMapping))?;

        let candidates = collect_candidates(set, self.corpus);
        let query = build_query(&set.genes, &narrative);
        let ranked = rank_abstracts(&query, &candidates.abstracts, self.embedder)
            .map_err(at(Stage::Retrieval))?;
        let evidence = select_evidence(&ranked, set, &candidates.per_gene, self.config.n_top_pm, &query);

        let (top_pm, ex_pm) =
            refine_with_evidence(set, &narrative, &evidence, cluster, EvidenceVariant::TopPm, &ctx)
                .map_err(at(Stage::Refinement))?;
        let (top_gene, ex_gene) =
            refine_with_evidence(set, &narrative, &evidence, cluster, EvidenceVariant::TopGene, &ctx)
                .map_err(at(Stage::Refinement))?;

        let initial_exchange_ids = exchanges.iter().map(|e| e.id.clone()).collect();
        exchanges.extend(ex_pm);
        exchanges.extend(ex_gene);

        let record = AnnotationRecord {
            cluster_id: set.cluster_id.clone(),
            marker_type: set.marker_type,
            genes: set.genes.clone(),
            unresolved_genes: candidates.unresolved.clone(),
            initial_narrative: narrative,
            initial_go_terms,
            initial_exchange_ids,
            refined: RefinedPair { top_pm, top_gene },
            evidence,
            created_at: self.clock.now(),
        };
        self.validate(&record).map_err(at(Stage::Validation))?;
        Ok((record, exchanges))
    }

    fn validate(&self, record: &AnnotationRecord) -> Result<()> {
        let budget = 3 * self.config.go_k;
        if record.go_prediction_count() > budget {
            return Err(Error::Validation(format!(
                "{} GO predictions exceed the budget of {budget}",
                record.go_prediction_count()
            )));
        }
        if let Some(id) = record.all_go_ids().find(|id| !self.ontology.contains(id)) {
            return Err(Error::Validation(format!("GO id {id} is not in the ontology")));
        }
        for variant in [EvidenceVariant::TopPm, EvidenceVariant::TopGene] {
            let allowed = record.evidence.pmids(variant);
            if let Some(p) = record
                .refined
                .get(variant)
                .cited_pmids
                .iter()
                .find(|p| !allowed.contains(p))
            {
                return Err(Error::Validation(format!("{variant} cites pmid {p} outside its evidence")));
            }
        }
        Ok(())
    }

    /// Annotates every marker set of a cluster, then summarises it.
    /// Failures are confined to the gene set (or summary) that raised them.
    pub fn process_cluster(&self, cluster: &CellCluster) -> ClusterOutcome {
        let mut out = ClusterOutcome {
            cluster_id: cluster.cluster_id.clone(),
            ..Default::default()
        };
        for set in &cluster.marker_sets {
            match self.annotate_staged(cluster, set) {
                Ok((record, exchanges)) => {
                    out.records.push(record);
                    out.exchanges.extend(exchanges);
                }
                Err(StageError(stage, e)) => {
                    tracing::warn!(cluster = %cluster.cluster_id, marker = %set.marker_type, "gene set failed: {e}");
                    out.failures.push(FailureEntry {
                        cluster_id: cluster.cluster_id.clone(),
                        marker_type: Some(set.marker_type),
                        stage,
                        reason_code: e.code().to_string(),
                        message: e.to_string(),
                    });
                }
            }
        }
        if self.config.summarize {
            if out.records.is_empty() {
                out.failures.push(FailureEntry {
                    cluster_id: cluster.cluster_id.clone(),
                    marker_type: None,
                    stage: Stage::Summary,
                    reason_code: "no_records".into(),
                    message: "no marker set was annotated".into(),
                });
            } else {
                match summarize_cluster(cluster, &out.records, &self.agent_context(), self.clock.now()) {
                    Ok((summary, exchanges)) => {
                        out.summary = Some(summary);
                        out.exchanges.extend(exchanges);
                    }
                    Err(e) => out.failures.push(FailureEntry {
                        cluster_id: cluster.cluster_id.clone(),
                        marker_type: None,
                        stage: Stage::Summary,
                        reason_code: e.code().to_string(),
                        message: e.to_string(),
                    }),
                }
            }
        }
        out
    }

    /// Processes clusters on a bounded worker pool and hands each outcome to
    /// `sink` in input order. An error from `sink` (the store went away)
    /// stops the run.
    pub fn run(
        &self,
        clusters: &[CellCluster],
        mut sink: impl FnMut(ClusterOutcome) -> Result<()>,
    ) -> Result<RunSummary> {
        let mut summary = RunSummary::default();
        let next = AtomicUsize::new(0);
        let stop = AtomicBool::new(false);
        let workers = self.config.jobs.clamp(1, clusters.len().max(1));
        let (tx, rx) = mpsc::channel::<(usize, ClusterOutcome)>();

        std::thread::scope(|scope| -> Result<()> {
            for _ in 0..workers {
                let tx = tx.clone();
                let (next, stop) = (&next, &stop);
                scope.spawn(move || loop {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(cluster) = clusters.get(i) else {
                        break;
                    };
                    if tx.send((i, self.process_cluster(cluster))).is_err() {
                        break;
                    }
                });
            }
            drop(tx);

            let mut pending = BTreeMap::new();
            let mut emit_at = 0;
            for (i, outcome) in rx {
                pending.insert(i, outcome);
                while let Some(outcome) = pending.remove(&emit_at) {
                    summary.clusters += 1;
                    summary.records += outcome.records.len();
                    summary.summaries += usize::from(outcome.summary.is_some());
                    summary.exchanges += outcome.exchanges.len();
                    summary.failures += outcome.failures.len();
                    if let Err(e) = sink(outcome) {
                        stop.store(true, Ordering::SeqCst);
                        return Err(e);
                    }
                    emit_at += 1;
                }
            }
            Ok(())
        })?;
        Ok(summary)
    }
}
