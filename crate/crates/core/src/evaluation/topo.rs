use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ontology::{OntologyGraph, HIGHLY_RELEVANT_HOPS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopoEvalReport {
    pub hits: Vec<bool>,
    pub accuracy: f64,
    /// Largest prediction list seen.
    pub k: usize,
    pub radius: u32,
    pub n_sets: usize,
}

impl TopoEvalReport {
    pub fn hit_count(&self) -> usize {
        self.hits.iter().filter(|&&h| h).count()
    }
}

pub(crate) fn accuracy_of(hits: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        hits as f64 / n as f64
    }
}

/// Fraction of sets where at least one prediction lies within three hops of
/// the truth term.
pub fn topo_hit_rate(
    predictions: &[Vec<String>],
    truths: &[String],
    graph: &OntologyGraph,
) -> Result<TopoEvalReport> {
    if predictions.len() != truths.len() {
        return Err(Error::Validation(format!(
            "{} prediction lists but {} truths",
            predictions.len(),
            truths.len()
        )));
    }
    let mut hits = Vec::with_capacity(truths.len());
    for (i, (preds, truth)) in predictions.iter().zip(truths).enumerate() {
        check_known(graph, truth, i)?;
        let mut hit = false;
        for p in preds {
            check_known(graph, p, i)?;
            if !hit && graph.is_highly_relevant(p, truth)? {
                hit = true;
            }
        }
        hits.push(hit);
    }
    let n_sets = hits.len();
    let accuracy = accuracy_of(hits.iter().filter(|&&h| h).count(), n_sets);
    Ok(TopoEvalReport {
        k: predictions.iter().map(Vec::len).max().unwrap_or(0),
        radius: HIGHLY_RELEVANT_HOPS,
        accuracy,
        hits,
        n_sets,
    })
}

pub(crate) fn check_known(graph: &OntologyGraph, id: &str, set: usize) -> Result<()> {
    if graph.contains(id) {
        Ok(())
    } else {
        Err(Error::NotFound(format!("set {set}: GO term {id} is not in the ontology")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::{GoTerm, Namespace, Relation};

    fn path(n: usize) -> OntologyGraph {
        let terms = (0..n)
            .map(|i| {
                let t = GoTerm::new(format!("GO:{i:07}"), format!("t{i}"), Namespace::BiologicalProcess);
                if i == 0 {
                    t
                } else {
                    t.with_parent(format!("GO:{:07}", i - 1), Relation::IsA)
                }
            })
            .collect();
        OntologyGraph::from_terms(terms).unwrap()
    }

    fn id(i: usize) -> String {
        format!("GO:{i:07}")
    }

    #[test]
    fn self_prediction_is_perfect() {
        let g = path(6);
        let truths: Vec<String> = (0..6).map(id).collect();
        let preds: Vec<Vec<String>> = truths.iter().map(|t| vec![t.clone()]).collect();
        let r = topo_hit_rate(&preds, &truths, &g).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.radius, 3);
    }

    #[test]
    fn four_hops_misses() {
        let g = path(10);
        let r = topo_hit_rate(&[vec![id(4)], vec![id(3)]], &[id(0), id(0)], &g).unwrap();
        assert_eq!(r.hits, vec![false, true]);
        assert_eq!(r.accuracy, 0.5);
    }

    #[test]
    fn unknown_id_names_set() {
        let g = path(3);
        let err = topo_hit_rate(&[vec![id(0)], vec!["GO:9999999".into()]], &[id(0), id(1)], &g).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("set 1") && msg.contains("GO:9999999"), "{msg}");
    }

    #[test]
    fn misaligned_inputs_rejected() {
        assert!(topo_hit_rate(&[vec![]], &[], &path(2)).is_err());
    }
}
