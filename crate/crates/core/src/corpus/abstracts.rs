use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::GeneLinks;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbstractRecord {
    pub pmid: u64,
    pub title: String,
    pub body: String,
    pub linked_genes: BTreeSet<u64>,
}

impl AbstractRecord {
    /// Text used for embedding: `title + " " + body`.
    pub fn text(&self) -> String {
        format!("{} {}", self.title, self.body)
    }
}

#[derive(Deserialize)]
struct RawAbstract {
    pmid: u64,
    #[serde(default)]
    title: String,
    #[serde(default, alias = "body")]
    r#abstract: String,
}

#[derive(Debug, Clone, Default)]
pub struct AbstractStore {
    records: BTreeMap<u64, AbstractRecord>,
    skipped_lines: usize,
    duplicate_pmids: usize,
}

impl AbstractStore {
    pub fn get(&self, pmid: u64) -> Option<&AbstractRecord> {
        self.records.get(&pmid)
    }

    pub fn contains(&self, pmid: u64) -> bool {
        self.records.contains_key(&pmid)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &AbstractRecord> {
        self.records.values()
    }

    pub fn pmids(&self) -> impl Iterator<Item = u64> + '_ {
        self.records.keys().copied()
    }

    pub fn skipped_lines(&self) -> usize {
        self.skipped_lines
    }

    pub fn duplicate_pmids(&self) -> usize {
        self.duplicate_pmids
    }
}

/// Reads abstracts as JSONL (`pmid`, `title`, `abstract`) and back-fills
/// `linked_genes` from the gene→pmid links. Unparsable lines and records
/// with no text are skipped; a repeated pmid keeps its first occurrence.
pub fn ingest_abstracts(reader: impl BufRead, links: &GeneLinks) -> Result<AbstractStore> {
    let by_pmid = links.invert();
    let mut store = AbstractStore::default();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawAbstract = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                tracing::debug!("skipping abstract line: {e}");
                store.skipped_lines += 1;
                continue;
            }
        };
        if raw.pmid == 0 || (raw.title.trim().is_empty() && raw.r#abstract.trim().is_empty()) {
            store.skipped_lines += 1;
            continue;
        }
        if store.records.contains_key(&raw.pmid) {
            store.duplicate_pmids += 1;
            continue;
        }
        let linked_genes = by_pmid.get(&raw.pmid).cloned().unwrap_or_default();
        store.records.insert(
            raw.pmid,
            AbstractRecord {
                pmid: raw.pmid,
                title: raw.title,
                body: raw.r#abstract,
                linked_genes,
            },
        );
    }
    Ok(store)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn links_are_inverted() {
        let links = GeneLinks::from_pairs([(1, 100), (2, 100), (1, 200)]);
        let text = r#"{"pmid": 100, "title": "t", "abstract": "a"}
{"pmid": 300, "title": "unlinked", "abstract": "b"}
not json
{"pmid": 100, "title": "dup", "abstract": "c"}
{"pmid": 400, "title": "", "abstract": ""}
"#;
        let store = ingest_abstracts(text.as_bytes(), &links).unwrap();
        assert_eq!(store.len(), 2);
        assert_eq!(store.get(100).unwrap().linked_genes, BTreeSet::from([1, 2]));
        assert_eq!(store.get(100).unwrap().title, "t");
        assert!(store.get(300).unwrap().linked_genes.is_empty());
        assert_eq!(store.skipped_lines(), 2);
        assert_eq!(store.duplicate_pmids(), 1);
    }
}
