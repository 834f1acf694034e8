use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Which species rows to keep.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum TaxFilter {
    #[default]
    All,
    Only(BTreeSet<u32>),
}

impl TaxFilter {
    pub fn only(ids: impl IntoIterator<Item = u32>) -> Self {
        TaxFilter::Only(ids.into_iter().collect())
    }

    pub fn keeps(&self, tax_id: u32) -> bool {
        match self {
            TaxFilter::All => true,
            TaxFilter::Only(set) => set.contains(&tax_id),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneRecord {
    pub gene_id: u64,
    pub symbol: String,
    pub tax_id: u32,
    pub synonyms: Vec<String>,
}

/// Genes indexed by `(tax_id, symbol)` with synonyms as a fallback.
/// Symbol lookups are case-insensitive.
#[derive(Debug, Clone, Default)]
pub struct GeneRegistry {
    genes: Vec<GeneRecord>,
    by_id: HashMap<u64, usize>,
    by_symbol: HashMap<(u32, String), usize>,
    by_synonym: HashMap<(u32, String), Vec<usize>>,
    rejected_rows: usize,
}

impl GeneRegistry {
    pub fn from_records(records: impl IntoIterator<Item = GeneRecord>) -> Self {
        let mut reg = Self::default();
        for r in records {
            reg.insert(r);
        }
        reg
    }

    fn insert(&mut self, rec: GeneRecord) {
        if self.by_id.contains_key(&rec.gene_id) {
            return;
        }
        let idx = self.genes.len();
        self.by_id.insert(rec.gene_id, idx);
        self.by_symbol
            .entry((rec.tax_id, rec.symbol.to_lowercase()))
            .or_insert(idx);
        for syn in &rec.synonyms {
            self.by_synonym
                .entry((rec.tax_id, syn.to_lowercase()))
                .or_default()
                .push(idx);
        }
        self.genes.push(rec);
    }

    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }

    pub fn rejected_rows(&self) -> usize {
        self.rejected_rows
    }

    pub fn get(&self, gene_id: u64) -> Option<&GeneRecord> {
        self.by_id.get(&gene_id).map(|&i| &self.genes[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = &GeneRecord> {
        self.genes.iter()
    }

    /// Official symbol first, then synonyms. An ambiguous synonym resolves to
    /// the lowest gene id.
    pub fn resolve(&self, tax_id: u32, symbol: &str) -> Option<&GeneRecord> {
        let key = (tax_id, symbol.trim().to_lowercase());
        if let Some(&i) = self.by_symbol.get(&key) {
            return Some(&self.genes[i]);
        }
        self.by_synonym
            .get(&key)?
            .iter()
            .map(|&i| &self.genes[i])
            .min_by_key(|g| g.gene_id)
    }
}

/// Reads NCBI `gene_info` (tab-separated, `#` header). Rows with a
/// non-integer or zero GeneID, a bad tax id or an empty symbol are rejected
/// and counted.
pub fn parse_gene_info(reader: impl BufRead, filter: &TaxFilter) -> Result<GeneRegistry> {
    let mut reg = GeneRegistry::default();
    for line in reader.lines() {
        let line = line?;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 5 {
            reg.rejected_rows += 1;
            continue;
        }
        let (Ok(tax_id), Ok(gene_id)) = (cols[0].trim().parse::<u32>(), cols[1].trim().parse::<u64>())
        else {
            reg.rejected_rows += 1;
            continue;
        };
        let symbol = cols[2].trim();
        if gene_id == 0 || symbol.is_empty() {
            reg.rejected_rows += 1;
            continue;
        }
        if !filter.keeps(tax_id) {
            continue;
        }
        let synonyms = cols[4]
            .split('|')
            .map(str::trim)
            .filter(|s| !s.is_empty() && *s != "-")
            .map(String::from)
            .collect();
        reg.insert(GeneRecord {
            gene_id,
            symbol: symbol.to_string(),
            tax_id,
            synonyms,
        });
    }
    Ok(reg)
}

/// gene id → ascending, deduplicated PubMed ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GeneLinks {
    map: BTreeMap<u64, Vec<u64>>,
    rejected_rows: usize,
}

impl GeneLinks {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u64, u64)>) -> Self {
        let mut map: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
        for (gene, pmid) in pairs {
            map.entry(gene).or_default().push(pmid);
        }
        for v in map.values_mut() {
            v.sort_unstable();
            v.dedup();
        }
        Self {
            map,
            rejected_rows: 0,
        }
    }

    pub fn pmids(&self, gene_id: u64) -> &[u64] {
        self.map.get(&gene_id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn rejected_rows(&self) -> usize {
        self.rejected_rows
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &[u64])> {
        self.map.iter().map(|(g, p)| (*g, p.as_slice()))
    }

    /// Total number of distinct (gene, pmid) pairs.
    pub fn pair_count(&self) -> usize {
        self.map.values().map(Vec::len).sum()
    }

    /// pmid → genes citing it.
    pub fn invert(&self) -> BTreeMap<u64, BTreeSet<u64>> {
        let mut out: BTreeMap<u64, BTreeSet<u64>> = BTreeMap::new();
        for (gene, pmids) in &self.map {
            for p in pmids {
                out.entry(*p).or_default().insert(*gene);
            }
        }
        out
    }
}

/// Reads NCBI `gene2pubmed` (`tax_id`, `GeneID`, `PubMed_ID`).
pub fn parse_gene2pubmed(reader: impl BufRead, filter: &TaxFilter) -> Result<GeneLinks> {
    let mut pairs = Vec::new();
    let mut rejected = 0;
    for line in reader.lines() {
        let line = line?;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
        let parsed = match cols.as_slice() {
            [tax, gene, pmid, ..] => (tax.parse::<u32>(), gene.parse::<u64>(), pmid.parse::<u64>()),
            _ => {
                rejected += 1;
                continue;
            }
        };
        match parsed {
            (Ok(tax), Ok(gene), Ok(pmid)) if gene > 0 && pmid > 0 => {
                if filter.keeps(tax) {
                    pairs.push((gene, pmid));
                }
            }
            _ => rejected += 1,
        }
    }
    let mut links = GeneLinks::from_pairs(pairs);
    links.rejected_rows = rejected;
    Ok(links)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GENE_INFO: &str = "#tax_id\tGeneID\tSymbol\tLocusTag\tSynonyms\tdbXrefs\n\
10090\t13162\tSlc6a3\t-\tDAT|Dat1\t-\n\
10090\t21823\tTh\t-\t-\t-\n\
9606\t7054\tTH\t-\tTYH\t-\n\
10090\tabc\tBroken\t-\t-\t-\n";

    #[test]
    fn tax_filter_and_rejects() {
        let reg = parse_gene_info(GENE_INFO.as_bytes(), &TaxFilter::only([10090])).unwrap();
        assert_eq!(reg.len(), 2);
        assert_eq!(reg.rejected_rows(), 1);
    }

    #[test]
    fn synonym_lookup() {
        let reg = parse_gene_info(GENE_INFO.as_bytes(), &TaxFilter::All).unwrap();
        assert_eq!(reg.resolve(10090, "dat1").unwrap().symbol, "Slc6a3");
        assert_eq!(reg.resolve(10090, "SLC6A3").unwrap().gene_id, 13162);
        assert!(reg.resolve(9606, "Dat1").is_none());
    }

    #[test]
    fn same_symbol_across_species() {
        let reg = parse_gene_info(GENE_INFO.as_bytes(), &TaxFilter::All).unwrap();
        assert_eq!(reg.len(), 3);
        assert_eq!(reg.resolve(10090, "TH").unwrap().gene_id, 21823);
        assert_eq!(reg.resolve(9606, "Th").unwrap().gene_id, 7054);
    }

    #[test]
    fn gene2pubmed_sorted_dedup() {
        let text = "#tax_id\tGeneID\tPubMed_ID\n10090\t1\t30\n10090\t1\t10\n10090\t2\t10\n10090\t1\t30\n10090\t2\t20\n";
        let links = parse_gene2pubmed(text.as_bytes(), &TaxFilter::All).unwrap();
        assert_eq!(links.len(), 2);
        assert_eq!(links.pmids(1), &[10, 30]);
        assert_eq!(links.pmids(2), &[10, 20]);
        assert_eq!(links.pair_count(), 5 - 1);
        assert!(parse_gene2pubmed(&b""[..], &TaxFilter::All).unwrap().is_empty());
        assert!(parse_gene2pubmed(text.as_bytes(), &TaxFilter::only([9606]))
            .unwrap()
            .is_empty());
    }

    #[test]
    fn gene2pubmed_counts_malformed_rows() {
        let text = "10090\t1\t30\n10090\tx\t10\n10090\t2\n";
        let links = parse_gene2pubmed(text.as_bytes(), &TaxFilter::All).unwrap();
        assert_eq!(links.rejected_rows(), 2);
        assert_eq!(links.pair_count(), 1);
    }
}
