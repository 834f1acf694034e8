use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::text::tokens;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RougeMode {
    #[serde(rename = "rouge1")]
    N1,
    #[serde(rename = "rouge2")]
    N2,
    #[serde(rename = "rougeL")]
    L,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    fn from_counts(overlap: usize, candidate: usize, reference: usize) -> Self {
        if candidate == 0 || reference == 0 {
            return Self::default();
        }
        let precision = overlap as f64 / candidate as f64;
        let recall = overlap as f64 / reference as f64;
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            precision,
            recall,
            f1,
        }
    }
}

/// ROUGE-1/2/L with clipped counts, no stemming and no stopword removal.
/// Tokens are lowercased alphanumeric runs.
pub fn rouge(candidate: &str, reference: &str, mode: RougeMode) -> RougeScore {
    let cand = tokens(candidate);
    let refr = tokens(reference);
    match mode {
        RougeMode::N1 => ngram_score(&cand, &refr, 1),
        RougeMode::N2 => ngram_score(&cand, &refr, 2),
        RougeMode::L => RougeScore::from_counts(lcs_len(&cand, &refr), cand.len(), refr.len()),
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

fn ngram_score(cand: &[String], refr: &[String], n: usize) -> RougeScore {
    let c = ngram_counts(cand, n);
    let r = ngram_counts(refr, n);
    let overlap = c
        .iter()
        .map(|(g, &k)| k.min(r.get(g).copied().unwrap_or(0)))
        .sum();
    RougeScore::from_counts(overlap, c.values().sum(), r.values().sum())
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}
