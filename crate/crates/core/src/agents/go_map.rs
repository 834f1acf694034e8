use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::{cosine, EmbeddingGateway};
use crate::ontology::{template_narration, Namespace, OntologyGraph, VerbalizedTerm};

/// Default number of GO terms attached to each generated text.
pub const DEFAULT_GO_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoPrediction {
    pub go_id: String,
    pub name: String,
    pub score: f64,
}

struct Entry {
    go_id: String,
    name: String,
    vector: Vec<f64>,
}

/// Nearest-neighbour search from free text to GO terms through their
/// verbalizations. Term vectors are embedded once at construction.
pub struct GoMapper {
    entries: Vec<Entry>,
}

impl GoMapper {
    /// Candidate terms are the non-obsolete terms of `graph` (optionally one
    /// namespace). A term missing from `table` is narrated with the template.
    pub fn build(
        graph: &OntologyGraph,
        table: &BTreeMap<String, VerbalizedTerm>,
        namespace: Option<Namespace>,
        gateway: &dyn EmbeddingGateway,
    ) -> Result<Self> {
        let terms: Vec<_> = graph
            .terms()
            .filter(|t| !t.obsolete && namespace.is_none_or(|ns| t.namespace == ns))
            .collect();
        if terms.is_empty() {
            return Err(Error::Config("no GO terms available for mapping".into()));
        }
        let texts: Vec<String> = terms
            .iter()
            .map(|t| {
                table
                    .get(&t.id)
                    .map(|v| v.narration.clone())
                    .unwrap_or_else(|| template_narration(t))
            })
            .collect();
        let vectors = gateway.embed(&texts)?;
        if vectors.len() != terms.len() {
            return Err(Error::Gateway(format!(
                "{} vectors for {} verbalizations",
                vectors.len(),
                terms.len()
            )));
        }
        Ok(Self {
            entries: terms
                .iter()
                .zip(vectors)
                .map(|(t, vector)| Entry {
                    go_id: t.id.clone(),
                    name: t.name.clone(),
                    vector,
                })
                .collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The `k` terms whose verbalization is most cosine-similar to `text`,
    /// descending, ties by ascending GO id.
    pub fn map(&self, text: &str, gateway: &dyn EmbeddingGateway, k: usize) -> Result<Vec<GoPrediction>> {
        let query = gateway
            .embed(&[text.to_string()])?
            .pop()
            .ok_or_else(|| Error::Gateway("no embedding returned".into()))?;
        let mut scored: Vec<(f64, &Entry)> = self
            .entries
            .iter()
            .map(|e| (cosine(&query, &e.vector), e))
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.go_id.cmp(&b.1.go_id)));
        Ok(scored
            .into_iter()
            .take(k)
            .map(|(score, e)| GoPrediction {
                go_id: e.go_id.clone(),
                name: e.name.clone(),
                score,
            })
            .collect())
    }
}

/// Maps a narrative to GO terms; an alias of [`GoMapper::map`] with the
/// arguments in workflow order.
pub fn map_to_go_terms(
    narrative: &str,
    mapper: &GoMapper,
    gateway: &dyn EmbeddingGateway,
    k: usize,
) -> Result<Vec<GoPrediction>> {
    mapper.map(narrative, gateway, k)
}
