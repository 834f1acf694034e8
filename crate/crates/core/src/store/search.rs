use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::page::DEFAULT_PAGE_SIZE;
use crate::agents::{AnnotationRecord, CellTypeSummary, GoPrediction};
use crate::corpus::{CellCluster, MarkerType};
use crate::error::{Error, Result};
use crate::ontology::is_go_id;

pub const MAX_PREDICATES: usize = 9;

macro_rules! field_enum {
    ($name:ident, $what:literal, { $($variant:ident => $key:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn key(self) -> &'static str {
                match self {
                    $($name::$variant => $key),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.key())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($key => Ok($name::$variant),)+
                    other => Err(Error::Validation(format!(
                        "unknown {} field {other:?}; legal fields: {}",
                        $what,
                        [$($key),+].join(", ")
                    ))),
                }
            }
        }
    };
}

field_enum!(SimpleField, "simple search", {
    ClusterId => "cluster_id",
    Genes => "genes",
    MarkerType => "marker_type",
    Taxonomy => "taxonomy",
    GoTerm => "go_term",
    Annotation => "annotation",
});

field_enum!(AdvancedField, "advanced search", {
    ClusterId => "cluster_id",
    Gene => "gene",
    MarkerType => "marker_type",
    Class => "class",
    Supertype => "supertype",
    NtType => "nt_type",
    GoTerm => "go_term",
    Pmid => "pmid",
    Annotation => "annotation",
});

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Predicate {
    pub field: AdvancedField,
    pub value: String,
}

impl Predicate {
    pub fn new(field: AdvancedField, value: impl Into<String>) -> Self {
        Self {
            field,
            value: value.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Criteria {
    /// Every gene set.
    #[default]
    All,
    Simple { field: SimpleField, value: String },
    /// Predicates are ANDed.
    Advanced { predicates: Vec<Predicate> },
}

/// Where a row's annotation came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationSource {
    /// Has a stored machine annotation.
    Machine,
    /// Has at least one community submission.
    Community,
}

impl FromStr for AnnotationSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "machine" => Ok(Self::Machine),
            "community" => Ok(Self::Community),
            other => Err(Error::Validation(format!(
                "unknown annotation source {other:?}; expected machine or community"
            ))),
        }
    }
}

/// Facet filters; taxonomy values match exactly, ignoring case.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SearchFilters {
    pub class: Option<String>,
    pub subclass: Option<String>,
    pub supertype: Option<String>,
    pub nt_type: Option<String>,
    pub marker_type: Option<MarkerType>,
    pub source: Option<AnnotationSource>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchQuery {
    #[serde(flatten)]
    pub criteria: Criteria,
    #[serde(default)]
    pub filters: SearchFilters,
    pub page: usize,
    pub page_size: usize,
}

impl Default for SearchQuery {
    fn default() -> Self {
        Self {
            criteria: Criteria::All,
            filters: SearchFilters::default(),
            page: 1,
            page_size: DEFAULT_PAGE_SIZE,
        }
    }
}

impl SearchQuery {
    pub fn simple(field: SimpleField, value: impl Into<String>) -> Self {
        Self {
            criteria: Criteria::Simple {
                field,
                value: value.into(),
            },
            ..Self::default()
        }
    }

    pub fn advanced(predicates: Vec<Predicate>) -> Self {
        Self {
            criteria: Criteria::Advanced { predicates },
            ..Self::default()
        }
    }

    pub fn with_page(mut self, page: usize, page_size: usize) -> Self {
        self.page = page;
        self.page_size = page_size;
        self
    }

    pub fn with_filters(mut self, filters: SearchFilters) -> Self {
        self.filters = filters;
        self
    }

    pub(crate) fn validate(&self) -> Result<()> {
        match &self.criteria {
            Criteria::All => {}
            Criteria::Simple { value, .. } => {
                if value.trim().is_empty() {
                    return Err(Error::Validation("search value is empty".into()));
                }
            }
            Criteria::Advanced { predicates } => {
                if predicates.is_empty() {
                    return Err(Error::Validation("advanced search needs at least one predicate".into()));
                }
                if predicates.len() > MAX_PREDICATES {
                    return Err(Error::Validation(format!(
                        "at most {MAX_PREDICATES} predicates are allowed, got {}",
                        predicates.len()
                    )));
                }
                if let Some(p) = predicates.iter().find(|p| p.value.trim().is_empty()) {
                    return Err(Error::Validation(format!("predicate {} has an empty value", p.field)));
                }
            }
        }
        Ok(())
    }
}

/// A gene set as listed in search results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneSetRow {
    pub cluster_id: String,
    pub marker_type: MarkerType,
    pub genes: Vec<String>,
    pub class_label: String,
    pub subclass_label: String,
    pub supertype_label: String,
    pub nt_type_label: String,
    /// Latest annotation version, if annotated.
    pub version: Option<u32>,
    pub initial_narrative: Option<String>,
    pub top_pm_summary: Option<String>,
    pub top_gene_summary: Option<String>,
    pub go_terms: Vec<GoPrediction>,
    pub cited_pmids: Vec<u64>,
    pub submission_count: usize,
}

/// Distinct taxonomy units among all matching rows.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rollup {
    pub classes: usize,
    pub subclasses: usize,
    pub supertypes: usize,
    pub clusters: usize,
    pub gene_sets: usize,
}

/// Borrowed view of one gene set while matching.
pub(crate) struct RowRef<'a> {
    pub cluster: &'a CellCluster,
    pub marker_type: MarkerType,
    pub genes: &'a [String],
    pub annotation: Option<(u32, &'a AnnotationRecord)>,
    pub summary: Option<&'a CellTypeSummary>,
    pub submissions: usize,
}

fn contains_ci(haystack: &str, needle_lower: &str) -> bool {
    haystack.to_lowercase().contains(needle_lower)
}

fn eq_ci(a: &str, b: &str) -> bool {
    a.trim().eq_ignore_ascii_case(b.trim())
}

impl RowRef<'_> {
    pub fn matches(&self, criteria: &Criteria, filters: &SearchFilters) -> Result<bool> {
        if !self.passes_filters(filters) {
            return Ok(false);
        }
        match criteria {
            Criteria::All => Ok(true),
            Criteria::Simple { field, value } => self.simple(*field, value),
            Criteria::Advanced { predicates } => {
                for p in predicates {
                    if !self.advanced(p.field, &p.value)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
        }
    }

    fn passes_filters(&self, f: &SearchFilters) -> bool {
        let c = self.cluster;
        let level = |want: &Option<String>, have: &str| want.as_deref().is_none_or(|w| eq_ci(w, have));
        level(&f.class, &c.class_label)
            && level(&f.subclass, &c.subclass_label)
            && level(&f.supertype, &c.supertype_label)
            && level(&f.nt_type, &c.nt_type_label)
            && f.marker_type.is_none_or(|m| m == self.marker_type)
            && match f.source {
                None => true,
                Some(AnnotationSource::Machine) => self.annotation.is_some(),
                Some(AnnotationSource::Community) => self.submissions > 0,
            }
    }

    fn simple(&self, field: SimpleField, value: &str) -> Result<bool> {
        let lower = value.trim().to_lowercase();
        Ok(match field {
            SimpleField::ClusterId => self.cluster.cluster_id == value.trim(),
            SimpleField::Genes => {
                let wanted: Vec<&str> = value
                    .split(|c: char| c == ',' || c == ';' || c.is_whitespace())
                    .filter(|g| !g.is_empty())
                    .collect();
                wanted.iter().all(|w| self.has_gene(w))
            }
            SimpleField::MarkerType => value.parse::<MarkerType>()? == self.marker_type,
            SimpleField::Taxonomy => {
                let c = self.cluster;
                [&c.class_label, &c.subclass_label, &c.supertype_label]
                    .iter()
                    .any(|l| contains_ci(l, &lower))
            }
            SimpleField::GoTerm => self.has_go_term(value.trim(), &lower),
            SimpleField::Annotation => self.annotation_contains(&lower),
        })
    }

    fn advanced(&self, field: AdvancedField, value: &str) -> Result<bool> {
        let lower = value.trim().to_lowercase();
        let c = self.cluster;
        Ok(match field {
            AdvancedField::ClusterId => c.cluster_id == value.trim(),
            AdvancedField::Gene => self.has_gene(value.trim()),
            AdvancedField::MarkerType => value.parse::<MarkerType>()? == self.marker_type,
            AdvancedField::Class => contains_ci(&c.class_label, &lower),
            AdvancedField::Supertype => contains_ci(&c.supertype_label, &lower),
            AdvancedField::NtType => contains_ci(&c.nt_type_label, &lower),
            AdvancedField::GoTerm => self.has_go_term(value.trim(), &lower),
            AdvancedField::Pmid => {
                let pmid: u64 = value
                    .trim()
                    .trim_start_matches("PMID:")
                    .parse()
                    .map_err(|_| Error::Validation(format!("pmid must be numeric, got {value:?}")))?;
                self.annotation.is_some_and(|(_, a)| {
                    a.cited_pmids().contains(&pmid) || a.evidence.all_pmids().contains(&pmid)
                })
            }
            AdvancedField::Annotation => self.annotation_contains(&lower),
        })
    }

    fn has_gene(&self, symbol: &str) -> bool {
        self.genes.iter().any(|g| eq_ci(g, symbol))
    }

    fn has_go_term(&self, raw: &str, lower: &str) -> bool {
        let Some((_, a)) = self.annotation else {
            return false;
        };
        let mut preds = a
            .initial_go_terms
            .iter()
            .chain(&a.refined.top_pm.go_terms)
            .chain(&a.refined.top_gene.go_terms);
        if is_go_id(raw) {
            preds.any(|p| p.go_id == raw)
        } else {
            preds.any(|p| contains_ci(&p.name, lower))
        }
    }

    /// Searches the narrative, both refined summaries and the cluster summary.
    fn annotation_contains(&self, lower: &str) -> bool {
        let in_record = self
            .annotation
            .is_some_and(|(_, a)| a.annotation_texts().iter().any(|t| contains_ci(t, lower)));
        let in_summary = self
            .summary
            .is_some_and(|s| contains_ci(&s.brief, lower) || contains_ci(&s.detailed, lower));
        in_record || in_summary
    }

    pub fn to_row(&self) -> GeneSetRow {
        let c = self.cluster;
        let (version, narrative, pm, gene, go_terms, cited) = match self.annotation {
            Some((v, a)) => {
                let mut go: Vec<GoPrediction> = Vec::new();
                for p in a
                    .initial_go_terms
                    .iter()
                    .chain(&a.refined.top_pm.go_terms)
                    .chain(&a.refined.top_gene.go_terms)
                {
                    if !go.iter().any(|g| g.go_id == p.go_id) {
                        go.push(p.clone());
                    }
                }
                (
                    Some(v),
                    Some(a.initial_narrative.clone()),
                    Some(a.refined.top_pm.summary.clone()),
                    Some(a.refined.top_gene.summary.clone()),
                    go,
                    a.cited_pmids().into_iter().collect(),
                )
            }
            None => (None, None, None, None, Vec::new(), Vec::new()),
        };
        GeneSetRow {
            cluster_id: c.cluster_id.clone(),
            marker_type: self.marker_type,
            genes: self.genes.to_vec(),
            class_label: c.class_label.clone(),
            subclass_label: c.subclass_label.clone(),
            supertype_label: c.supertype_label.clone(),
            nt_type_label: c.nt_type_label.clone(),
            version,
            initial_narrative: narrative,
            top_pm_summary: pm,
            top_gene_summary: gene,
            go_terms,
            cited_pmids: cited,
            submission_count: self.submissions,
        }
    }
}
