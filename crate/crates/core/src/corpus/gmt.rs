use serde::{Deserialize, Serialize};

use super::dedup_symbols;
use crate::error::{Error, Result};

/// A gene set with a known label, e.g. one line of an MSigDB GMT file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledGeneSet {
    pub label: String,
    pub description: String,
    pub genes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub species: Option<u32>,
}

/// Parses GMT: `name<TAB>description<TAB>gene<TAB>gene...`. Blank lines are
/// ignored; a line with fewer than three fields or no genes is an error.
pub fn parse_gmt(text: &str, species: Option<u32>) -> Result<Vec<LabeledGeneSet>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim_end_matches(['\r', '\n']).split('\t').collect();
        if fields.len() < 3 {
            return Err(Error::parse(i + 1, format!("GMT line has {} fields", fields.len())));
        }
        let label = fields[0].trim();
        if label.is_empty() {
            return Err(Error::parse(i + 1, "GMT line without a set name"));
        }
        let genes = dedup_symbols(fields[2..].iter().map(|g| g.to_string()));
        if genes.is_empty() {
            return Err(Error::parse(i + 1, format!("gene set {label} has no genes")));
        }
        out.push(LabeledGeneSet {
            label: label.to_string(),
            description: fields[1].trim().to_string(),
            genes,
            species,
        });
    }
    Ok(out)
}

pub fn serialize_gmt(sets: &[LabeledGeneSet]) -> String {
    let mut out = String::new();
    for s in sets {
        out.push_str(&s.label);
        out.push('\t');
        out.push_str(&s.description);
        for g in &s.genes {
            out.push('\t');
            out.push_str(g);
        }
        out.push('\n');
    }
    out
}
