//! OBO 1.2 flat-file reader (go-basic style).

use super::{is_go_id, GoTerm, Namespace, OntologyGraph, ParentLink, Relation};
use crate::error::{Error, Result};

#[derive(Default)]
struct Stanza {
    header_line: usize,
    id: Option<String>,
    name: String,
    namespace: Option<(usize, String)>,
    definition: String,
    parents: Vec<ParentLink>,
    obsolete: bool,
}

/// Parses `[Term]` stanzas into an [`OntologyGraph`]. Other stanza types
/// (`[Typedef]`, `[Instance]`) and header tags are skipped. Relationships
/// other than `part_of` are ignored.
pub fn parse_obo(text: &str) -> Result<OntologyGraph> {
    let mut terms = Vec::new();
    let mut current: Option<Stanza> = None;
    let mut in_term = false;

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('!') {
            continue;
        }
        if line.starts_with('[') && line.ends_with(']') {
            if let Some(stanza) = current.take() {
                terms.push(finish(stanza)?);
            }
            in_term = line == "[Term]";
            if in_term {
                current = Some(Stanza {
                    header_line: lineno,
                    ..Stanza::default()
                });
            }
            continue;
        }
        if !in_term {
            continue;
        }
        let stanza = current.as_mut().expect("inside a term stanza");
        let Some((tag, value)) = line.split_once(':') else {
            return Err(Error::parse(lineno, format!("expected `tag: value`, got {line:?}")));
        };
        let value = value.trim();
        match tag.trim() {
            "id" => {
                if !is_go_id(value) {
                    return Err(Error::parse(lineno, format!("malformed GO id {value:?}")));
                }
                stanza.id = Some(value.to_string());
            }
            "name" => stanza.name = value.to_string(),
            "namespace" => stanza.namespace = Some((lineno, value.to_string())),
            "def" => stanza.definition = quoted(value).unwrap_or(value).replace("\\\"", "\""),
            "is_obsolete" => stanza.obsolete = value == "true",
            "is_a" => stanza.parents.push(ParentLink {
                target: target_id(value, lineno)?,
                relation: Relation::IsA,
            }),
            "relationship" => {
                let mut parts = value.split_whitespace();
                if parts.next() == Some("part_of") {
                    let target = parts
                        .next()
                        .ok_or_else(|| Error::parse(lineno, "part_of without target"))?;
                    stanza.parents.push(ParentLink {
                        target: target_id(target, lineno)?,
                        relation: Relation::PartOf,
                    });
                }
            }
            _ => {}
        }
    }
    if let Some(stanza) = current.take() {
        terms.push(finish(stanza)?);
    }
    OntologyGraph::build(terms, Vec::new())
}

fn finish(stanza: Stanza) -> Result<GoTerm> {
    let id = stanza
        .id
        .ok_or_else(|| Error::parse(stanza.header_line, "[Term] stanza without id"))?;
    let (ns_line, ns) = stanza
        .namespace
        .ok_or_else(|| Error::parse(stanza.header_line, format!("{id} has no namespace")))?;
    let namespace: Namespace = ns
        .parse()
        .map_err(|e: Error| Error::parse(ns_line, e.to_string()))?;
    Ok(GoTerm {
        id,
        name: stanza.name,
        namespace,
        definition: stanza.definition,
        parents: stanza.parents,
        obsolete: stanza.obsolete,
    })
}

/// Text between the first unescaped pair of double quotes.
fn quoted(value: &str) -> Option<&str> {
    let rest = value.strip_prefix('"')?;
    let bytes = rest.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => i += 2,
            b'"' => return Some(&rest[..i]),
            _ => i += 1,
        }
    }
    None
}

fn target_id(value: &str, lineno: usize) -> Result<String> {
    let id = value.split('!').next().unwrap_or("").trim();
    let id = id.split_whitespace().next().unwrap_or("");
    if !is_go_id(id) {
        return Err(Error::parse(lineno, format!("malformed edge target {value:?}")));
    }
    Ok(id.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = "format-version: 1.2\n\n[Term]\nid: GO:0048308\nname: organelle inheritance\nnamespace: biological_process\n\n[Term]\nid: GO:0000001\nname: mitochondrion inheritance\nnamespace: biological_process\ndef: \"The distribution of \\\"mitochondria\\\" into daughter cells.\" [GOC:mcc]\nis_a: GO:0048308 ! organelle inheritance\n\n[Typedef]\nid: part_of\nname: part of\n";

    #[test]
    fn minimal_two_term_file() {
        let g = parse_obo(TWO).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.term_distance("GO:0000001", "GO:0048308", 3).unwrap(), Some(1));
        assert_eq!(
            g.term("GO:0000001").unwrap().definition,
            "The distribution of \"mitochondria\" into daughter cells."
        );
    }

    #[test]
    fn obsolete_term_has_degree_zero() {
        let text = format!(
            "{TWO}\n[Term]\nid: GO:0000005\nname: obsolete thing\nnamespace: biological_process\nis_obsolete: true\n"
        );
        let g = parse_obo(&text).unwrap();
        assert_eq!(g.len(), 3);
        assert!(g.term("GO:0000005").unwrap().obsolete);
        assert_eq!(g.degree("GO:0000005").unwrap(), 0);
    }

    #[test]
    fn missing_id_reports_header_line() {
        let text = "[Term]\nname: nameless\nnamespace: biological_process\n";
        match parse_obo(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn part_of_and_other_relationships() {
        let text = "[Term]\nid: GO:0000002\nname: a\nnamespace: cellular_component\n\n[Term]\nid: GO:0000003\nname: b\nnamespace: cellular_component\nrelationship: part_of GO:0000002 ! a\nrelationship: regulates GO:0000002 ! a\nis_a: GO:0000009 ! missing\n";
        let g = parse_obo(text).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.warnings().len(), 1);
        assert!(g.warnings()[0].contains("GO:0000009"));
    }

    #[test]
    fn bad_edge_target_is_a_parse_error() {
        let text = "[Term]\nid: GO:0000002\nname: a\nnamespace: biological_process\nis_a: nonsense\n";
        assert!(matches!(parse_obo(text), Err(Error::Parse { line: 5, .. })));
    }
}
