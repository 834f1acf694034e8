use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::sync::OnceLock;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{GoTerm, OntologyGraph};
use crate::error::{Error, Result};
use crate::gateway::{LmExchange, LmGateway};
use crate::prompts;
use crate::text::squash_whitespace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerbalizationSource {
    LmGenerated,
    Template,
}

/// A GO term rendered as prose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerbalizedTerm {
    pub term_id: String,
    pub narration: String,
    pub source: VerbalizationSource,
    /// Why the template was used even though a gateway was configured.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback_reason: Option<String>,
}

fn accession_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[\(\[]?\bGO:\s?\d+\b[\)\]]?").unwrap())
}

/// Strips GO accessions so the narration reads as prose, not a label.
fn sanitize(text: &str) -> String {
    let cleaned = accession_re().replace_all(text, "");
    squash_whitespace(&cleaned).replace(" .", ".").replace(" ,", ",")
}

/// `Genes in this set are involved in {name}: {definition}.`
pub fn template_narration(term: &GoTerm) -> String {
    let def = term.definition.trim().trim_end_matches('.');
    let text = if def.is_empty() {
        format!("Genes in this set are involved in {}.", term.name)
    } else {
        format!("Genes in this set are involved in {}: {def}.", term.name)
    };
    sanitize(&text)
}

/// Narrates one term. Without a gateway, or when the gateway fails or
/// returns nothing usable, the deterministic template is used and the reason
/// is recorded.
pub fn verbalize_term(
    term: &GoTerm,
    gateway: Option<&dyn LmGateway>,
) -> Result<(VerbalizedTerm, Option<LmExchange>)> {
    if term.obsolete {
        return Err(Error::Validation(format!("{} is obsolete", term.id)));
    }
    let template = |reason: Option<String>| VerbalizedTerm {
        term_id: term.id.clone(),
        narration: template_narration(term),
        source: VerbalizationSource::Template,
        fallback_reason: reason,
    };
    let Some(gateway) = gateway else {
        return Ok((template(None), None));
    };
    let messages = prompts::verbalize().render(&[
        ("name", term.name.as_str()),
        ("definition", term.definition.as_str()),
    ])?;
    match gateway.complete(&messages) {
        Ok(exchange) => {
            let narration = sanitize(&exchange.response);
            if narration.is_empty() {
                tracing::warn!(term = %term.id, "empty verbalization, using template");
                return Ok((template(Some("empty model output".into())), Some(exchange)));
            }
            Ok((
                VerbalizedTerm {
                    term_id: term.id.clone(),
                    narration,
                    source: VerbalizationSource::LmGenerated,
                    fallback_reason: None,
                },
                Some(exchange),
            ))
        }
        Err(e) => {
            tracing::warn!(term = %term.id, "verbalization failed, using template: {e}");
            Ok((template(Some(e.to_string())), None))
        }
    }
}

/// Verbalizes every non-obsolete term, in id order.
pub fn verbalize_all(
    graph: &OntologyGraph,
    gateway: Option<&dyn LmGateway>,
) -> Result<(Vec<VerbalizedTerm>, Vec<LmExchange>)> {
    let live: Vec<&GoTerm> = graph.terms().filter(|t| !t.obsolete).collect();
    let results: Vec<_> = live
        .par_iter()
        .map(|t| verbalize_term(t, gateway))
        .collect::<Result<_>>()?;
    let mut table = Vec::with_capacity(results.len());
    let mut exchanges = Vec::new();
    for (v, ex) in results {
        table.push(v);
        exchanges.extend(ex);
    }
    Ok((table, exchanges))
}

/// Reads a JSONL verbalization table (`term_id`, `narration`, `source`).
pub fn read_verbalization_table(reader: impl BufRead) -> Result<BTreeMap<String, VerbalizedTerm>> {
    let mut out = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: VerbalizedTerm = serde_json::from_str(&line)
            .map_err(|e| Error::parse(i + 1, format!("verbalization row: {e}")))?;
        if v.narration.trim().is_empty() {
            return Err(Error::parse(i + 1, format!("{} has an empty narration", v.term_id)));
        }
        out.insert(v.term_id.clone(), v);
    }
    Ok(out)
}

pub fn write_verbalization_table<'a>(
    mut writer: impl Write,
    rows: impl IntoIterator<Item = &'a VerbalizedTerm>,
) -> Result<()> {
    for row in rows {
        serde_json::to_writer(&mut writer, row)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}
