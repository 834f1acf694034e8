//! Output contracts for model replies: `[PMID:n]` citation grounding and
//! sentence-count enforcement.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;

use crate::text::squash_whitespace;

fn citation_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\[PMID:\s*(\d{1,12})\]").unwrap())
}

/// PMIDs cited with the bracketed marker syntax, in order of first appearance.
pub fn cited_pmids(text: &str) -> Vec<u64> {
    let mut seen = BTreeSet::new();
    citation_re()
        .captures_iter(text)
        .filter_map(|c| c[1].parse::<u64>().ok())
        .filter(|p| seen.insert(*p))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grounded {
    pub text: String,
    pub kept: Vec<u64>,
    pub removed: Vec<u64>,
}

/// Removes citation markers whose PMID is not in `allowed`. Markers that
/// survive are normalised to `[PMID:n]`.
pub fn ground_citations(text: &str, allowed: &BTreeSet<u64>) -> Grounded {
    let mut kept = Vec::new();
    let mut removed = Vec::new();
    let cleaned = citation_re().replace_all(text, |c: &regex::Captures| {
        let pmid = c[1].parse::<u64>().ok();
        match pmid {
            Some(p) if allowed.contains(&p) => {
                if !kept.contains(&p) {
                    kept.push(p);
                }
                format!("[PMID:{p}]")
            }
            _ => {
                if let Some(p) = pmid {
                    if !removed.contains(&p) {
                        removed.push(p);
                    }
                }
                String::new()
            }
        }
    });
    let text = squash_whitespace(&cleaned)
        .replace(" .", ".")
        .replace(" ,", ",")
        .replace(" ;", ";")
        .replace("()", "")
        .replace("( )", "");
    Grounded {
        text: squash_whitespace(&text),
        kept,
        removed,
    }
}
