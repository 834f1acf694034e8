use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::stats::{benjamini_hochberg, hypergeometric_upper_tail};
use crate::corpus::LabeledGeneSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichmentResult {
    pub label: String,
    pub p_value: f64,
    pub adjusted_p: f64,
    pub contributing_genes: Vec<String>,
    pub background_size: usize,
    /// Term genes inside the background.
    pub term_size: usize,
    /// Query genes inside the background.
    pub query_size: usize,
}

fn key(s: &str) -> String {
    s.trim().to_uppercase()
}

/// Over-representation analysis of `query` against every term of `library`.
///
/// Symbols compare case-insensitively. Query genes outside the background are
/// dropped before testing. Results are sorted by ascending p, ties by label.
pub fn ora_enrich(
    query: &[String],
    library: &[LabeledGeneSet],
    background: &[String],
) -> Result<Vec<EnrichmentResult>> {
    let universe: HashSet<String> = background.iter().map(|g| key(g)).filter(|g| !g.is_empty()).collect();
    if universe.is_empty() {
        return Err(Error::Validation("background gene list is empty".into()));
    }
    if library.is_empty() {
        return Err(Error::Validation("term library is empty".into()));
    }

    let mut seen = HashSet::new();
    let query: Vec<(&str, String)> = query
        .iter()
        .map(|g| (g.trim(), key(g)))
        .filter(|(_, k)| universe.contains(k) && seen.insert(k.clone()))
        .collect();

    let n_pop = universe.len() as u64;
    let mut results: Vec<EnrichmentResult> = library
        .iter()
        .map(|term| {
            let members: HashSet<String> = term
                .genes
                .iter()
                .map(|g| key(g))
                .filter(|g| universe.contains(g))
                .collect();
            let contributing: Vec<String> = query
                .iter()
                .filter(|(_, k)| members.contains(k))
                .map(|(g, _)| g.to_string())
                .collect();
            let p = hypergeometric_upper_tail(
                n_pop,
                members.len() as u64,
                query.len() as u64,
                contributing.len() as u64,
            )
            .clamp(f64::MIN_POSITIVE, 1.0);
            EnrichmentResult {
                label: term.label.clone(),
                p_value: p,
                adjusted_p: p,
                contributing_genes: contributing,
                background_size: universe.len(),
                term_size: members.len(),
                query_size: query.len(),
            }
        })
        .collect();

    let raw: Vec<f64> = results.iter().map(|r| r.p_value).collect();
    for (r, adj) in results.iter_mut().zip(benjamini_hochberg(&raw)) {
        r.adjusted_p = adj;
    }
    results.sort_by(|a, b| a.p_value.total_cmp(&b.p_value).then_with(|| a.label.cmp(&b.label)));
    Ok(results)
}

/// The lowest-p term of one enrichment run (ties by label).
pub fn best_term(results: &[EnrichmentResult]) -> Option<&EnrichmentResult> {
    results
        .iter()
        .min_by(|a, b| a.p_value.total_cmp(&b.p_value).then_with(|| a.label.cmp(&b.label)))
}

pub const CONTRIBUTING_THRESHOLDS: [usize; 3] = [0, 1, 2];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContributingHistogram {
    /// Each count is the number of gene sets whose count exceeds this value.
    pub thresholds: Vec<usize>,
    pub counts: Vec<usize>,
    pub n_sets: usize,
}

/// Counts gene sets whose contributing-gene count exceeds each threshold.
pub fn contributing_histogram(per_set_counts: &[usize], thresholds: &[usize]) -> ContributingHistogram {
    ContributingHistogram {
        thresholds: thresholds.to_vec(),
        counts: thresholds
            .iter()
            .map(|&t| per_set_counts.iter().filter(|&&c| c > t).count())
            .collect(),
        n_sets: per_set_counts.len(),
    }
}

/// Histogram over enrichment runs, one per gene set, using each run's best
/// term. A run with no terms counts as zero.
pub fn contributing_gene_histogram(
    runs: &[Vec<EnrichmentResult>],
    thresholds: &[usize],
) -> ContributingHistogram {
    let counts: Vec<usize> = runs
        .iter()
        .map(|r| best_term(r).map_or(0, |b| b.contributing_genes.len()))
        .collect();
    contributing_histogram(&counts, thresholds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    fn term(label: &str, genes: &[&str]) -> LabeledGeneSet {
        LabeledGeneSet {
            label: label.into(),
            description: String::new(),
            genes: s(genes),
            species: None,
        }
    }

    #[test]
    fn disjoint_term_has_p_one() {
        let r = ora_enrich(&s(&["A"]), &[term("T", &["B"])], &s(&["A", "B", "C"])).unwrap();
        assert_eq!(r[0].p_value, 1.0);
        assert!(r[0].contributing_genes.is_empty());
    }

    #[test]
    fn certain_outcome() {
        let all = s(&["A", "B", "C"]);
        let r = ora_enrich(&all, &[term("T", &["A", "B", "C"])], &all).unwrap();
        assert_eq!(r[0].p_value, 1.0);
        assert_eq!(r[0].contributing_genes, all);
    }

    #[test]
    fn empty_background_rejected() {
        assert!(ora_enrich(&s(&["A"]), &[term("T", &["A"])], &[]).is_err());
    }

    #[test]
    fn case_insensitive_and_sorted() {
        let bg: Vec<String> = (0..20).map(|i| format!("G{i}")).collect();
        let lib = [term("weak", &["g0", "G10", "G11", "G12"]), term("strong", &["G0", "G1", "G2"])];
        let r = ora_enrich(&s(&["g0", "g1", "g2", "nope"]), &lib, &bg).unwrap();
        assert_eq!(r[0].label, "strong");
        assert_eq!(r[0].contributing_genes, s(&["g0", "g1", "g2"]));
        assert_eq!(r[0].query_size, 3);
        assert!(r[0].p_value < r[1].p_value);
    }

    #[test]
    fn threshold_edges() {
        let h = contributing_histogram(&[2], &CONTRIBUTING_THRESHOLDS);
        assert_eq!(h.counts, vec![1, 1, 0]);
        let h = contributing_histogram(&[3, 3, 3], &CONTRIBUTING_THRESHOLDS);
        assert_eq!(h.counts, vec![3, 3, 3]);
    }
}
