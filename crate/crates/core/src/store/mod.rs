//! Persistent store for clusters, annotations, summaries and community
//! submissions, with simple and advanced search.
//!
//! State lives in memory behind a reader/writer lock. Every write is first
//! appended to an optional JSONL journal, then applied, so a reopened store
//! replays to the same state. Writes hold the write lock for their whole
//! duration: readers see either the old or the new record, never a mix.
//!
//! The export files (`clusters.jsonl`, `annotations.jsonl`, `summaries.jsonl`,
//! `submissions.jsonl`, `abstracts.jsonl`) are the interchange format.

mod page;
mod search;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, PoisonError, RwLock};

use chrono::{DateTime, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::agents::{AnnotationRecord, CellTypeSummary, ClusterOutcome};
use crate::clock::{iso_seconds, Clock};
use crate::corpus::{cluster_order, CellCluster, MarkerType};
use crate::error::{Error, Result};
use crate::evaluation::{contributing_histogram, ContributingHistogram, CONTRIBUTING_THRESHOLDS};

pub use page::{paginate, PageEnvelope, PageWindow, DEFAULT_PAGE_SIZE, PAGE_SIZES};
pub use search::{
    AdvancedField, AnnotationSource, Criteria, GeneSetRow, Predicate, Rollup, SearchFilters,
    SearchQuery, SimpleField, MAX_PREDICATES,
};

use search::RowRef;

/// Keyword used for the statistics table.
pub const DEFAULT_STATS_KEYWORD: &str = "Basal Ganglia";

pub const SUMMARY_SCOPE: &str = "summary";
/// Fields a submission may target on a marker gene set.
pub const MARKER_FIELDS: &[&str] = &["initial_narrative", "top_pm", "top_gene", "go_terms", "general"];
/// Fields a submission may target on a cluster summary.
pub const SUMMARY_FIELDS: &[&str] = &["brief", "detailed", "general"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredAnnotation {
    pub id: String,
    pub version: u32,
    pub record: AnnotationRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredSummary {
    pub id: String,
    pub version: u32,
    pub summary: CellTypeSummary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubmissionStatus {
    Pending,
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmissionTarget {
    pub cluster_id: String,
    /// A marker type key or `"summary"`.
    pub scope: String,
    pub field: String,
}

/// What a client sends. Server-owned fields are not accepted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmissionDraft {
    pub target: SubmissionTarget,
    pub proposed_text: String,
    pub author: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contact: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommunitySubmission {
    pub submission_id: String,
    pub target: SubmissionTarget,
    pub proposed_text: String,
    pub author: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contact: Option<String>,
    #[serde(with = "iso_seconds")]
    pub submitted_at: DateTime<Utc>,
    pub status: SubmissionStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbstractRef {
    pub pmid: u64,
    pub title: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
// Adjacent tagging: internal tagging buffers the payload and loses integer map keys.
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
enum JournalEntry {
    Cluster(CellCluster),
    Abstract(AbstractRef),
    Annotation(StoredAnnotation),
    Summary(StoredSummary),
    Submission(CommunitySubmission),
    Review {
        submission_id: String,
        status: SubmissionStatus,
    },
}

#[derive(Debug, Default)]
struct State {
    clusters: HashMap<String, CellCluster>,
    order: Vec<String>,
    abstracts: BTreeMap<u64, String>,
    annotations: HashMap<(String, MarkerType), Vec<StoredAnnotation>>,
    summaries: HashMap<String, Vec<StoredSummary>>,
    submissions: Vec<CommunitySubmission>,
    submission_index: HashMap<String, usize>,
    annotation_writes: usize,
}

impl State {
    fn check(&self, entry: &JournalEntry) -> Result<()> {
        match entry {
            JournalEntry::Cluster(c) => {
                if c.cluster_id.trim().is_empty() {
                    return Err(Error::Validation("cluster id is empty".into()));
                }
            }
            JournalEntry::Abstract(_) => {}
            JournalEntry::Annotation(a) => {
                self.require_cluster(&a.record.cluster_id)?;
            }
            JournalEntry::Summary(s) => {
                self.require_cluster(&s.summary.cluster_id)?;
            }
            JournalEntry::Submission(s) => {
                self.check_target(&s.target)?;
                if self.submission_index.contains_key(&s.submission_id) {
                    return Err(Error::Integrity(format!("duplicate submission {}", s.submission_id)));
                }
            }
            JournalEntry::Review { submission_id, .. } => {
                if !self.submission_index.contains_key(submission_id) {
                    return Err(Error::NotFound(format!("submission {submission_id}")));
                }
            }
        }
        Ok(())
    }

    fn require_cluster(&self, id: &str) -> Result<&CellCluster> {
        self.clusters
            .get(id)
            .ok_or_else(|| Error::Integrity(format!("cluster {id} does not exist")))
    }

    fn check_target(&self, t: &SubmissionTarget) -> Result<()> {
        let cluster = self
            .clusters
            .get(&t.cluster_id)
            .ok_or_else(|| Error::NotFound(format!("cluster {}", t.cluster_id)))?;
        let fields = if t.scope == SUMMARY_SCOPE {
            SUMMARY_FIELDS
        } else {
            let marker: MarkerType = t.scope.parse().map_err(|_| {
                Error::Validation(format!(
                    "unknown submission scope {:?}; expected a marker type or \"summary\"",
                    t.scope
                ))
            })?;
            let exists = cluster.marker_set(marker).is_some()
                || self.annotations.contains_key(&(t.cluster_id.clone(), marker));
            if !exists {
                return Err(Error::NotFound(format!("cluster {} has no {marker} gene set", t.cluster_id)));
            }
            MARKER_FIELDS
        };
        if !fields.contains(&t.field.as_str()) {
            return Err(Error::Validation(format!(
                "unknown field {:?} for scope {}; legal fields: {}",
                t.field,
                t.scope,
                fields.join(", ")
            )));
        }
        Ok(())
    }

    fn apply(&mut self, entry: JournalEntry) {
        match entry {
            JournalEntry::Cluster(c) => {
                if !self.clusters.contains_key(&c.cluster_id) {
                    let pos = self
                        .order
                        .partition_point(|x| cluster_order(x, &c.cluster_id).is_lt());
                    self.order.insert(pos, c.cluster_id.clone());
                }
                self.clusters.insert(c.cluster_id.clone(), c);
            }
            JournalEntry::Abstract(a) => {
                self.abstracts.insert(a.pmid, a.title);
            }
            JournalEntry::Annotation(a) => {
                self.annotation_writes += 1;
                self.annotations
                    .entry((a.record.cluster_id.clone(), a.record.marker_type))
                    .or_default()
                    .push(a);
            }
            JournalEntry::Summary(s) => {
                self.summaries.entry(s.summary.cluster_id.clone()).or_default().push(s);
            }
            JournalEntry::Submission(s) => {
                self.submission_index.insert(s.submission_id.clone(), self.submissions.len());
                self.submissions.push(s);
            }
            JournalEntry::Review { submission_id, status } => {
                let i = self.submission_index[&submission_id];
                self.submissions[i].status = status;
            }
        }
    }

    fn latest_annotation(&self, cluster_id: &str, marker: MarkerType) -> Option<&StoredAnnotation> {
        self.annotations.get(&(cluster_id.to_string(), marker)).and_then(|v| v.last())
    }

    fn latest_summary(&self, cluster_id: &str) -> Option<&StoredSummary> {
        self.summaries.get(cluster_id).and_then(|v| v.last())
    }

    fn submissions_for(&self, cluster_id: &str) -> Vec<CommunitySubmission> {
        let mut out: Vec<CommunitySubmission> = self
            .submissions
            .iter()
            .filter(|s| s.target.cluster_id == cluster_id)
            .cloned()
            .collect();
        out.sort_by(|a, b| a.submitted_at.cmp(&b.submitted_at).then_with(|| a.submission_id.cmp(&b.submission_id)));
        out
    }

    /// Gene sets of a cluster: its marker sets plus any annotated types that
    /// are not attached to the cluster, in marker-type order.
    fn gene_sets<'a>(&'a self, c: &'a CellCluster) -> Vec<(MarkerType, &'a [String])> {
        MarkerType::ALL
            .iter()
            .filter_map(|&m| {
                if let Some(set) = c.marker_set(m) {
                    Some((m, set.genes.as_slice()))
                } else {
                    self.latest_annotation(&c.cluster_id, m)
                        .map(|a| (m, a.record.genes.as_slice()))
                }
            })
            .collect()
    }

    /// Every gene set in display order (cluster id, then marker type).
    fn rows(&self) -> Vec<RowRef<'_>> {
        let mut subs: HashMap<(&str, &str), usize> = HashMap::new();
        for s in &self.submissions {
            *subs.entry((&s.target.cluster_id, &s.target.scope)).or_insert(0) += 1;
        }
        let mut rows = Vec::new();
        for id in &self.order {
            let c = &self.clusters[id];
            let summary = self.latest_summary(id).map(|s| &s.summary);
            for (m, genes) in self.gene_sets(c) {
                rows.push(RowRef {
                    cluster: c,
                    marker_type: m,
                    genes,
                    annotation: self.latest_annotation(id, m).map(|a| (a.version, &a.record)),
                    summary,
                    submissions: subs.get(&(id.as_str(), m.key())).copied().unwrap_or(0),
                });
            }
        }
        rows
    }

    fn pmid_refs(&self, pmids: impl IntoIterator<Item = u64>) -> Vec<PmidRef> {
        pmids
            .into_iter()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(|pmid| match self.abstracts.get(&pmid) {
                Some(title) => PmidRef {
                    pmid,
                    ingested: true,
                    title: Some(title.clone()),
                },
                None => PmidRef {
                    pmid,
                    ingested: false,
                    title: None,
                },
            })
            .collect()
    }
}

/// A PMID shown in a view, flagged by whether its abstract was ingested.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PmidRef {
    pub pmid: u64,
    pub ingested: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterInfo {
    pub cluster_id: String,
    pub class_label: String,
    pub subclass_label: String,
    pub supertype_label: String,
    pub nt_type_label: String,
    pub anatomical_location: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atlas_link: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummarySection {
    pub version: u32,
    pub summary: CellTypeSummary,
    pub pmids: Vec<PmidRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkerSetBlock {
    pub marker_type: MarkerType,
    pub genes: Vec<String>,
    /// Latest version, or `None` when not yet annotated.
    pub annotation: Option<StoredAnnotation>,
    pub version_count: usize,
    pub pmids: Vec<PmidRef>,
    pub submissions: Vec<CommunitySubmission>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterView {
    pub cluster: ClusterInfo,
    /// `None` when the cluster has not been summarised yet.
    pub summary: Option<SummarySection>,
    pub marker_sets: Vec<MarkerSetBlock>,
    /// Every submission for the cluster, oldest first.
    pub submissions: Vec<CommunitySubmission>,
}

impl ClusterView {
    pub fn all_pmids(&self) -> impl Iterator<Item = &PmidRef> {
        self.summary
            .iter()
            .flat_map(|s| &s.pmids)
            .chain(self.marker_sets.iter().flat_map(|m| &m.pmids))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneSetDetail {
    pub cluster: ClusterInfo,
    pub block: MarkerSetBlock,
    /// All stored versions, oldest first.
    pub versions: Vec<StoredAnnotation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResults {
    #[serde(flatten)]
    pub page: PageEnvelope<GeneSetRow>,
    pub rollup: Rollup,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkerStats {
    pub marker_type: Option<MarkerType>,
    pub gene_sets: usize,
    pub annotated: usize,
    /// Sets whose literature-supported gene count exceeds each threshold.
    pub contributing: ContributingHistogram,
    /// Annotated sets whose own texts contain the keyword.
    pub keyword_sets: usize,
    /// Same, also counting the keyword in the cluster summary.
    pub keyword_sets_with_summary: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreStats {
    pub keyword: String,
    pub clusters: usize,
    pub gene_sets: usize,
    pub pages_at_default_size: usize,
    pub per_marker: Vec<MarkerStats>,
    pub total: MarkerStats,
    pub summaries: usize,
    /// Summarised clusters whose brief or detailed text contains the keyword.
    pub summary_keyword_clusters: usize,
    /// Clusters with the keyword anywhere in their annotations.
    pub keyword_rollup: Rollup,
    pub submissions: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExportKind {
    Clusters,
    Abstracts,
    Annotations,
    Summaries,
    Submissions,
}

impl ExportKind {
    pub const ALL: [ExportKind; 5] = [
        ExportKind::Clusters,
        ExportKind::Abstracts,
        ExportKind::Annotations,
        ExportKind::Summaries,
        ExportKind::Submissions,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            ExportKind::Clusters => "clusters.jsonl",
            ExportKind::Abstracts => "abstracts.jsonl",
            ExportKind::Annotations => "annotations.jsonl",
            ExportKind::Summaries => "summaries.jsonl",
            ExportKind::Submissions => "submissions.jsonl",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportCounts {
    pub clusters: usize,
    pub abstracts: usize,
    pub annotations: usize,
    pub summaries: usize,
    pub submissions: usize,
}

pub struct Store {
    state: RwLock<State>,
    journal: Option<Mutex<BufWriter<File>>>,
    journal_path: Option<PathBuf>,
    clock: Arc<dyn Clock>,
    atlas_link_template: Option<String>,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store")
            .field("journal", &self.journal_path)
            .finish_non_exhaustive()
    }
}

impl Store {
    pub fn in_memory(clock: Arc<dyn Clock>) -> Self {
        Self {
            state: RwLock::new(State::default()),
            journal: None,
            journal_path: None,
            clock,
            atlas_link_template: None,
        }
    }

    /// Opens (or creates) a journal-backed store and replays its history.
    /// A torn final line from an interrupted write is ignored.
    pub fn open(path: impl AsRef<Path>, clock: Arc<dyn Clock>) -> Result<Self> {
        let path = path.as_ref();
        let mut state = State::default();
        if path.exists() {
            let lines: Vec<String> = BufReader::new(File::open(path)?).lines().collect::<std::io::Result<_>>()?;
            let last = lines.iter().rposition(|l| !l.trim().is_empty());
            for (i, line) in lines.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let entry: JournalEntry = match serde_json::from_str(line) {
                    Ok(e) => e,
                    Err(e) if Some(i) == last => {
                        tracing::warn!(line = i + 1, "ignoring torn journal tail: {e}");
                        break;
                    }
                    Err(e) => return Err(Error::parse(i + 1, format!("journal entry: {e}"))),
                };
                state.check(&entry).map_err(|e| Error::parse(i + 1, e.to_string()))?;
                state.apply(entry);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            state: RwLock::new(state),
            journal: Some(Mutex::new(BufWriter::new(file))),
            journal_path: Some(path.to_path_buf()),
            clock,
            atlas_link_template: None,
        })
    }

    /// Template for the atlas link shown in cluster views; `{cluster_id}` is
    /// substituted.
    pub fn with_atlas_link(mut self, template: impl Into<String>) -> Self {
        self.atlas_link_template = Some(template.into());
        self
    }

    pub fn journal_path(&self) -> Option<&Path> {
        self.journal_path.as_deref()
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, State> {
        self.state.read().unwrap_or_else(PoisonError::into_inner)
    }

    /// Validates, journals, then applies. The write lock is held throughout.
    fn commit(&self, entry: JournalEntry) -> Result<()> {
        let mut state = self.state.write().unwrap_or_else(PoisonError::into_inner);
        state.check(&entry)?;
        self.append(&entry)?;
        state.apply(entry);
        Ok(())
    }

    /// Adds or updates a cluster. Re-registering an identical cluster is a no-op.
    pub fn register_cluster(&self, cluster: CellCluster) -> Result<()> {
        if self.read().clusters.get(&cluster.cluster_id) == Some(&cluster) {
            return Ok(());
        }
        self.commit(JournalEntry::Cluster(cluster))
    }

    pub fn register_clusters(&self, clusters: impl IntoIterator<Item = CellCluster>) -> Result<usize> {
        let mut n = 0;
        for c in clusters {
            self.register_cluster(c)?;
            n += 1;
        }
        Ok(n)
    }

    /// Records ingested abstracts so views can tell them from external PMIDs.
    pub fn register_abstracts(&self, abstracts: impl IntoIterator<Item = (u64, String)>) -> Result<usize> {
        let mut n = 0;
        for (pmid, title) in abstracts {
            if self.read().abstracts.get(&pmid) == Some(&title) {
                continue;
            }
            self.commit(JournalEntry::Abstract(AbstractRef { pmid, title }))?;
            n += 1;
        }
        Ok(n)
    }

    /// Stores a new version of the annotation for (cluster, marker type).
    pub fn save_annotation(&self, record: AnnotationRecord) -> Result<String> {
        let mut state = self.state.write().unwrap_or_else(PoisonError::into_inner);
        let version = state
            .annotations
            .get(&(record.cluster_id.clone(), record.marker_type))
            .map_or(0, Vec::len) as u32
            + 1;
        let id = format!("{}/{}/v{version}", record.cluster_id, record.marker_type);
        let entry = JournalEntry::Annotation(StoredAnnotation {
            id: id.clone(),
            version,
            record,
        });
        state.check(&entry)?;
        self.append(&entry)?;
        state.apply(entry);
        Ok(id)
    }

    pub fn save_summary(&self, summary: CellTypeSummary) -> Result<String> {
        let mut state = self.state.write().unwrap_or_else(PoisonError::into_inner);
        let version = state.summaries.get(&summary.cluster_id).map_or(0, Vec::len) as u32 + 1;
        let id = format!("{}/{SUMMARY_SCOPE}/v{version}", summary.cluster_id);
        let entry = JournalEntry::Summary(StoredSummary {
            id: id.clone(),
            version,
            summary,
        });
        state.check(&entry)?;
        self.append(&entry)?;
        state.apply(entry);
        Ok(id)
    }

    fn append(&self, entry: &JournalEntry) -> Result<()> {
        if let Some(journal) = &self.journal {
            let mut w = journal.lock().unwrap_or_else(PoisonError::into_inner);
            serde_json::to_writer(&mut *w, entry)?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        Ok(())
    }

    /// Persists everything a pipeline run produced for one cluster.
    pub fn save_outcome(&self, outcome: &ClusterOutcome) -> Result<Vec<String>> {
        let mut ids = Vec::new();
        for r in &outcome.records {
            ids.push(self.save_annotation(r.clone())?);
        }
        if let Some(s) = &outcome.summary {
            ids.push(self.save_summary(s.clone())?);
        }
        Ok(ids)
    }

    pub fn cluster(&self, cluster_id: &str) -> Option<CellCluster> {
        self.read().clusters.get(cluster_id).cloned()
    }

    /// Clusters in display order.
    pub fn clusters(&self) -> Vec<CellCluster> {
        let s = self.read();
        s.order.iter().map(|id| s.clusters[id].clone()).collect()
    }

    pub fn annotation(&self, cluster_id: &str, marker: MarkerType) -> Option<StoredAnnotation> {
        self.read().latest_annotation(cluster_id, marker).cloned()
    }

    pub fn annotation_versions(&self, cluster_id: &str, marker: MarkerType) -> Vec<StoredAnnotation> {
        self.read()
            .annotations
            .get(&(cluster_id.to_string(), marker))
            .cloned()
            .unwrap_or_default()
    }

    /// Latest version of every annotation, in display order.
    pub fn latest_annotations(&self) -> Vec<AnnotationRecord> {
        let s = self.read();
        s.rows()
            .into_iter()
            .filter_map(|r| r.annotation.map(|(_, a)| a.clone()))
            .collect()
    }

    pub fn summary(&self, cluster_id: &str) -> Option<StoredSummary> {
        self.read().latest_summary(cluster_id).cloned()
    }

    /// Latest summary of every cluster, in display order.
    pub fn latest_summaries(&self) -> Vec<CellTypeSummary> {
        let s = self.read();
        s.order
            .iter()
            .filter_map(|id| s.latest_summary(id).map(|x| x.summary.clone()))
            .collect()
    }

    /// Records a community edit. The id, timestamp and status are assigned here.
    pub fn submit_edit(&self, draft: SubmissionDraft) -> Result<CommunitySubmission> {
        if draft.proposed_text.trim().is_empty() {
            return Err(Error::Validation("proposed_text is empty".into()));
        }
        if draft.author.trim().is_empty() {
            return Err(Error::Validation("author is empty".into()));
        }
        let mut target = draft.target;
        target.cluster_id = target.cluster_id.trim().to_string();
        target.field = target.field.trim().to_string();
        if let Ok(m) = target.scope.parse::<MarkerType>() {
            target.scope = m.key().to_string();
        }
        let mut state = self.state.write().unwrap_or_else(PoisonError::into_inner);
        let submission = CommunitySubmission {
            submission_id: format!("S{:06}", state.submissions.len() + 1),
            target,
            proposed_text: draft.proposed_text,
            author: draft.author.trim().to_string(),
            contact: draft.contact.filter(|c| !c.trim().is_empty()),
            submitted_at: self.clock.now(),
            status: SubmissionStatus::Pending,
        };
        let entry = JournalEntry::Submission(submission.clone());
        state.check(&entry)?;
        self.append(&entry)?;
        state.apply(entry);
        Ok(submission)
    }

    /// Records a curator decision. The submission text is never changed.
    pub fn review_submission(&self, submission_id: &str, status: SubmissionStatus) -> Result<CommunitySubmission> {
        self.commit(JournalEntry::Review {
            submission_id: submission_id.to_string(),
            status,
        })?;
        let s = self.read();
        Ok(s.submissions[s.submission_index[submission_id]].clone())
    }

    pub fn submissions_for(&self, cluster_id: &str) -> Vec<CommunitySubmission> {
        self.read().submissions_for(cluster_id)
    }

    pub fn search(&self, query: &SearchQuery) -> Result<SearchResults> {
        query.validate()?;
        paginate(0, query.page_size, query.page)?;
        let state = self.read();
        let mut matched = Vec::new();
        for row in state.rows() {
            if row.matches(&query.criteria, &query.filters)? {
                matched.push(row);
            }
        }
        let rollup = rollup(&matched);
        let window = paginate(matched.len(), query.page_size, query.page)?;
        let items = matched
            .iter()
            .skip(window.offset)
            .take(window.limit)
            .map(RowRef::to_row)
            .collect();
        Ok(SearchResults {
            page: PageEnvelope {
                items,
                page: query.page,
                page_size: query.page_size,
                total_items: matched.len(),
                total_pages: window.total_pages,
            },
            rollup,
        })
    }

    fn cluster_info(&self, c: &CellCluster) -> ClusterInfo {
        ClusterInfo {
            cluster_id: c.cluster_id.clone(),
            class_label: c.class_label.clone(),
            subclass_label: c.subclass_label.clone(),
            supertype_label: c.supertype_label.clone(),
            nt_type_label: c.nt_type_label.clone(),
            anatomical_location: c.anatomical_location.clone(),
            atlas_link: self
                .atlas_link_template
                .as_ref()
                .map(|t| t.replace("{cluster_id}", &c.cluster_id)),
        }
    }

    fn block(state: &State, c: &CellCluster, m: MarkerType, genes: &[String]) -> MarkerSetBlock {
        let versions = state.annotations.get(&(c.cluster_id.clone(), m));
        let latest = versions.and_then(|v| v.last()).cloned();
        let pmids = latest
            .as_ref()
            .map(|a| {
                let mut all = a.record.cited_pmids();
                all.extend(a.record.evidence.all_pmids());
                state.pmid_refs(all)
            })
            .unwrap_or_default();
        MarkerSetBlock {
            marker_type: m,
            genes: genes.to_vec(),
            annotation: latest,
            version_count: versions.map_or(0, Vec::len),
            pmids,
            submissions: state
                .submissions_for(&c.cluster_id)
                .into_iter()
                .filter(|s| s.target.scope == m.key())
                .collect(),
        }
    }

    /// Cluster information, summary and per-marker-set annotations, with all
    /// submissions for the cluster.
    pub fn get_cluster_view(&self, cluster_id: &str) -> Result<ClusterView> {
        let state = self.read();
        let c = state
            .clusters
            .get(cluster_id)
            .ok_or_else(|| Error::NotFound(format!("cluster {cluster_id}")))?;
        let summary = state.latest_summary(cluster_id).map(|s| SummarySection {
            version: s.version,
            pmids: state.pmid_refs(s.summary.evidence_links.iter().map(|l| l.pmid)),
            summary: s.summary.clone(),
        });
        let marker_sets = state
            .gene_sets(c)
            .into_iter()
            .map(|(m, genes)| Self::block(&state, c, m, genes))
            .collect();
        Ok(ClusterView {
            cluster: self.cluster_info(c),
            summary,
            marker_sets,
            submissions: state.submissions_for(cluster_id),
        })
    }

    pub fn get_gene_set(&self, cluster_id: &str, marker: MarkerType) -> Result<GeneSetDetail> {
        let state = self.read();
        let c = state
            .clusters
            .get(cluster_id)
            .ok_or_else(|| Error::NotFound(format!("cluster {cluster_id}")))?;
        let (_, genes) = state
            .gene_sets(c)
            .into_iter()
            .find(|(m, _)| *m == marker)
            .ok_or_else(|| Error::NotFound(format!("cluster {cluster_id} has no {marker} gene set")))?;
        Ok(GeneSetDetail {
            cluster: self.cluster_info(c),
            block: Self::block(&state, c, marker, genes),
            versions: state
                .annotations
                .get(&(cluster_id.to_string(), marker))
                .cloned()
                .unwrap_or_default(),
        })
    }

    /// Counts in the shape of the published annotation table.
    pub fn stats(&self, keyword: &str) -> StoreStats {
        let state = self.read();
        let needle = keyword.to_lowercase();
        let rows = state.rows();
        let has = |t: &str| !needle.is_empty() && t.to_lowercase().contains(&needle);

        let tally = |marker: Option<MarkerType>| {
            let selected: Vec<&RowRef> = rows
                .iter()
                .filter(|r| marker.is_none_or(|m| r.marker_type == m))
                .collect();
            let annotated: Vec<&AnnotationRecord> =
                selected.iter().filter_map(|r| r.annotation.map(|(_, a)| a)).collect();
            let counts: Vec<usize> = annotated.iter().map(|a| a.evidence.literature_genes.len()).collect();
            let own = |r: &RowRef| r.annotation.is_some_and(|(_, a)| a.annotation_texts().iter().any(|t| has(t)));
            let in_summary = |r: &RowRef| r.summary.is_some_and(|s| has(&s.brief) || has(&s.detailed));
            MarkerStats {
                marker_type: marker,
                gene_sets: selected.len(),
                annotated: annotated.len(),
                contributing: contributing_histogram(&counts, &CONTRIBUTING_THRESHOLDS),
                keyword_sets: selected.iter().filter(|r| own(r)).count(),
                keyword_sets_with_summary: selected
                    .iter()
                    .filter(|r| own(r) || (r.annotation.is_some() && in_summary(r)))
                    .count(),
            }
        };

        let summaries: Vec<&CellTypeSummary> = state
            .order
            .iter()
            .filter_map(|id| state.latest_summary(id).map(|s| &s.summary))
            .collect();
        let keyword_rows = rows.iter().filter(|r| {
            r.annotation.is_some_and(|(_, a)| a.annotation_texts().iter().any(|t| has(t)))
                || r.summary.is_some_and(|s| has(&s.brief) || has(&s.detailed))
        });
        StoreStats {
            keyword: keyword.to_string(),
            clusters: state.order.len(),
            gene_sets: rows.len(),
            pages_at_default_size: rows.len().div_ceil(DEFAULT_PAGE_SIZE),
            per_marker: MarkerType::ALL.iter().map(|&m| tally(Some(m))).collect(),
            total: tally(None),
            summaries: summaries.len(),
            summary_keyword_clusters: summaries.iter().filter(|s| has(&s.brief) || has(&s.detailed)).count(),
            keyword_rollup: rollup(keyword_rows),
            submissions: state.submissions.len(),
        }
    }

    /// Writes one entity type as JSONL and returns the line count.
    /// Annotations and summaries include every stored version.
    pub fn export_jsonl<W: Write>(&self, kind: ExportKind, out: W) -> Result<usize> {
        let state = self.read();
        let mut w = BufWriter::new(out);
        let mut n = 0;
        match kind {
            ExportKind::Clusters => {
                for id in &state.order {
                    write_line(&mut w, &state.clusters[id], &mut n)?;
                }
            }
            ExportKind::Abstracts => {
                for (pmid, title) in &state.abstracts {
                    write_line(&mut w, &AbstractRef { pmid: *pmid, title: title.clone() }, &mut n)?;
                }
            }
            ExportKind::Annotations => {
                for id in &state.order {
                    for m in MarkerType::ALL {
                        for a in state.annotations.get(&(id.clone(), m)).into_iter().flatten() {
                            write_line(&mut w, a, &mut n)?;
                        }
                    }
                }
            }
            ExportKind::Summaries => {
                for id in &state.order {
                    for s in state.summaries.get(id).into_iter().flatten() {
                        write_line(&mut w, s, &mut n)?;
                    }
                }
            }
            ExportKind::Submissions => {
                for s in &state.submissions {
                    write_line(&mut w, s, &mut n)?;
                }
            }
        }
        w.flush()?;
        Ok(n)
    }

    /// Writes every export file into `dir`.
    pub fn export_dir(&self, dir: impl AsRef<Path>) -> Result<ExportCounts> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut counts = ExportCounts::default();
        for kind in ExportKind::ALL {
            let n = self.export_jsonl(kind, File::create(dir.join(kind.file_name()))?)?;
            match kind {
                ExportKind::Clusters => counts.clusters = n,
                ExportKind::Abstracts => counts.abstracts = n,
                ExportKind::Annotations => counts.annotations = n,
                ExportKind::Summaries => counts.summaries = n,
                ExportKind::Submissions => counts.submissions = n,
            }
        }
        Ok(counts)
    }

    /// Loads export files from `dir` into this store. Missing files are
    /// skipped; records are validated as if written live.
    pub fn import_dir(&self, dir: impl AsRef<Path>) -> Result<ExportCounts> {
        let dir = dir.as_ref();
        let mut counts = ExportCounts::default();
        for kind in ExportKind::ALL {
            let path = dir.join(kind.file_name());
            if !path.exists() {
                continue;
            }
            let text = std::fs::read_to_string(&path)?;
            match kind {
                ExportKind::Clusters => {
                    for c in parse_lines::<CellCluster>(&text)? {
                        self.register_cluster(c)?;
                        counts.clusters += 1;
                    }
                }
                ExportKind::Abstracts => {
                    let refs = parse_lines::<AbstractRef>(&text)?;
                    counts.abstracts = refs.len();
                    self.register_abstracts(refs.into_iter().map(|a| (a.pmid, a.title)))?;
                }
                ExportKind::Annotations => {
                    for a in parse_lines::<StoredAnnotation>(&text)? {
                        self.save_annotation(a.record)?;
                        counts.annotations += 1;
                    }
                }
                ExportKind::Summaries => {
                    for s in parse_lines::<StoredSummary>(&text)? {
                        self.save_summary(s.summary)?;
                        counts.summaries += 1;
                    }
                }
                ExportKind::Submissions => {
                    for s in parse_lines::<CommunitySubmission>(&text)? {
                        self.commit(JournalEntry::Submission(s))?;
                        counts.submissions += 1;
                    }
                }
            }
        }
        Ok(counts)
    }

    /// Number of annotation writes since the store was created or opened,
    /// including replayed history.
    pub fn annotation_write_count(&self) -> usize {
        self.read().annotation_writes
    }
}

fn rollup<'r, 'a: 'r>(rows: impl IntoIterator<Item = &'r RowRef<'a>>) -> Rollup {
    let mut classes = BTreeSet::new();
    let mut subclasses = BTreeSet::new();
    let mut supertypes = BTreeSet::new();
    let mut clusters = BTreeSet::new();
    let mut gene_sets = 0;
    for r in rows {
        gene_sets += 1;
        classes.insert(r.cluster.class_label.as_str());
        subclasses.insert(r.cluster.subclass_label.as_str());
        supertypes.insert(r.cluster.supertype_label.as_str());
        clusters.insert(r.cluster.cluster_id.as_str());
    }
    Rollup {
        classes: classes.len(),
        subclasses: subclasses.len(),
        supertypes: supertypes.len(),
        clusters: clusters.len(),
        gene_sets,
    }
}

fn write_line<W: Write, T: Serialize>(w: &mut W, value: &T, n: &mut usize) -> Result<()> {
    serde_json::to_writer(&mut *w, value)?;
    w.write_all(b"\n")?;
    *n += 1;
    Ok(())
}

fn parse_lines<T: DeserializeOwned>(text: &str) -> Result<Vec<T>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::parse(i + 1, e.to_string())))
        .collect()
}
