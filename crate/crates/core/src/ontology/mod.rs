//! Gene Ontology graph: parsing, hop distances, term sampling and
//! verbalization.

mod obo;
mod verbalize;

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use obo::parse_obo;
pub use verbalize::{
    read_verbalization_table, template_narration, verbalize_all, verbalize_term,
    write_verbalization_table, VerbalizationSource, VerbalizedTerm,
};

/// Radius used for "highly relevant" predictions.
pub const HIGHLY_RELEVANT_HOPS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Namespace {
    BiologicalProcess,
    MolecularFunction,
    CellularComponent,
}

impl FromStr for Namespace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "biological_process" => Ok(Namespace::BiologicalProcess),
            "molecular_function" => Ok(Namespace::MolecularFunction),
            "cellular_component" => Ok(Namespace::CellularComponent),
            other => Err(Error::Validation(format!("unknown GO namespace {other:?}"))),
        }
    }
}

impl fmt::Display for Namespace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Namespace::BiologicalProcess => "biological_process",
            Namespace::MolecularFunction => "molecular_function",
            Namespace::CellularComponent => "cellular_component",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    IsA,
    PartOf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParentLink {
    pub target: String,
    pub relation: Relation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoTerm {
    pub id: String,
    pub name: String,
    pub namespace: Namespace,
    pub definition: String,
    pub parents: Vec<ParentLink>,
    pub obsolete: bool,
}

impl GoTerm {
    pub fn new(id: impl Into<String>, name: impl Into<String>, namespace: Namespace) -> Self {
        Self {
            id: id.into(),
            name: name.into(),
            namespace,
            definition: String::new(),
            parents: Vec::new(),
            obsolete: false,
        }
    }

    pub fn with_definition(mut self, def: impl Into<String>) -> Self {
        self.definition = def.into();
        self
    }

    pub fn with_parent(mut self, target: impl Into<String>, relation: Relation) -> Self {
        self.parents.push(ParentLink {
            target: target.into(),
            relation,
        });
        self
    }
}

pub fn is_go_id(s: &str) -> bool {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^GO:[0-9]{7}$").unwrap())
        .is_match(s)
}

/// Which relations count as edges for distance queries.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeMode {
    /// Undirected hops over both `is_a` and `part_of`.
    #[default]
    IsAAndPartOf,
    IsAOnly,
}

#[derive(Debug, Clone, Copy)]
struct Neighbor {
    node: u32,
    is_a: bool,
}

/// Immutable GO graph. Terms are stored in ascending id order.
#[derive(Debug, Clone)]
pub struct OntologyGraph {
    terms: Vec<GoTerm>,
    index: HashMap<String, u32>,
    adjacency: Vec<Vec<Neighbor>>,
    by_namespace: BTreeMap<Namespace, Vec<u32>>,
    edge_count: usize,
    edge_mode: EdgeMode,
    warnings: Vec<String>,
}

impl OntologyGraph {
    /// Reads and parses an OBO file.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        parse_obo(&text)
    }

    /// Builds the graph. Edges to unknown or obsolete terms and self-loops are
    /// dropped with a warning; duplicate ids and cycles in the parent relation
    /// are errors.
    pub fn from_terms(terms: Vec<GoTerm>) -> Result<Self> {
        Self::build(terms, Vec::new())
    }

    fn build(mut terms: Vec<GoTerm>, mut warnings: Vec<String>) -> Result<Self> {
        terms.sort_by(|a, b| a.id.cmp(&b.id));
        let mut index = HashMap::with_capacity(terms.len());
        for (i, t) in terms.iter().enumerate() {
            if !is_go_id(&t.id) {
                return Err(Error::Validation(format!("malformed GO id {:?}", t.id)));
            }
            if index.insert(t.id.clone(), i as u32).is_some() {
                return Err(Error::Validation(format!("duplicate term {}", t.id)));
            }
        }

        let obsolete: Vec<bool> = terms.iter().map(|t| t.obsolete).collect();
        let mut pairs: BTreeMap<(u32, u32), bool> = BTreeMap::new();
        let mut directed: Vec<Vec<u32>> = vec![Vec::new(); terms.len()];
        for (child, term) in terms.iter_mut().enumerate() {
            let child = child as u32;
            if term.obsolete {
                term.parents.clear();
                continue;
            }
            let mut kept = Vec::with_capacity(term.parents.len());
            for link in term.parents.drain(..) {
                let Some(&parent) = index.get(&link.target) else {
                    warnings.push(format!("{}: dangling edge to {}", term.id, link.target));
                    continue;
                };
                if parent == child {
                    warnings.push(format!("{}: self-loop dropped", term.id));
                    continue;
                }
                if obsolete[parent as usize] {
                    warnings.push(format!("{}: edge to obsolete {}", term.id, link.target));
                    continue;
                }
                let key = (child.min(parent), child.max(parent));
                let is_a = link.relation == Relation::IsA;
                pairs
                    .entry(key)
                    .and_modify(|flag| *flag |= is_a)
                    .or_insert(is_a);
                directed[child as usize].push(parent);
                kept.push(link);
            }
            term.parents = kept;
        }

        let mut adjacency = vec![Vec::new(); terms.len()];
        for (&(a, b), &is_a) in &pairs {
            adjacency[a as usize].push(Neighbor { node: b, is_a });
            adjacency[b as usize].push(Neighbor { node: a, is_a });
        }

        let mut by_namespace: BTreeMap<Namespace, Vec<u32>> = BTreeMap::new();
        for (i, t) in terms.iter().enumerate() {
            if !t.obsolete {
                by_namespace.entry(t.namespace).or_default().push(i as u32);
            }
        }

        let graph = Self {
            edge_count: pairs.len(),
            terms,
            index,
            adjacency,
            by_namespace,
            edge_mode: EdgeMode::default(),
            warnings,
        };
        if graph.topo_sort(&directed).is_none() {
            return Err(Error::Validation("parent relation contains a cycle".into()));
        }
        Ok(graph)
    }

    pub fn with_edge_mode(mut self, mode: EdgeMode) -> Self {
        self.edge_mode = mode;
        self
    }

    pub fn edge_mode(&self) -> EdgeMode {
        self.edge_mode
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Number of distinct undirected term pairs joined by `is_a` or `part_of`.
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn term(&self, id: &str) -> Option<&GoTerm> {
        self.index.get(id).map(|&i| &self.terms[i as usize])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn terms(&self) -> impl Iterator<Item = &GoTerm> {
        self.terms.iter()
    }

    /// Non-obsolete terms of one namespace, ascending by id.
    pub fn namespace_terms(&self, ns: Namespace) -> impl Iterator<Item = &GoTerm> {
        self.by_namespace
            .get(&ns)
            .into_iter()
            .flatten()
            .map(|&i| &self.terms[i as usize])
    }

    pub fn degree(&self, id: &str) -> Result<usize> {
        let i = self.lookup(id)?;
        Ok(self.neighbors(i).count())
    }

    /// Ids adjacent to `id` under the current edge mode.
    pub fn neighbor_ids(&self, id: &str) -> Result<Vec<&str>> {
        let i = self.lookup(id)?;
        Ok(self
            .neighbors(i)
            .map(|n| self.terms[n as usize].id.as_str())
            .collect())
    }

    fn lookup(&self, id: &str) -> Result<u32> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::NotFound(format!("GO term {id}")))
    }

    fn neighbors(&self, node: u32) -> impl Iterator<Item = u32> + '_ {
        let mode = self.edge_mode;
        self.adjacency[node as usize]
            .iter()
            .filter(move |n| mode == EdgeMode::IsAAndPartOf || n.is_a)
            .map(|n| n.node)
    }

    /// Shortest undirected hop count between two terms, or `None` when it
    /// exceeds `max_hops`. Runs a bidirectional BFS that never explores past
    /// the requested radius.
    pub fn term_distance(&self, a: &str, b: &str, max_hops: u32) -> Result<Option<u32>> {
        let src = self.lookup(a)?;
        let dst = self.lookup(b)?;
        if src == dst {
            return Ok(Some(0));
        }

        let mut dist_fwd: FxHashMap<u32, u32> = FxHashMap::default();
        let mut dist_bwd: FxHashMap<u32, u32> = FxHashMap::default();
        dist_fwd.insert(src, 0);
        dist_bwd.insert(dst, 0);
        let mut frontier_fwd = vec![src];
        let mut frontier_bwd = vec![dst];
        let (mut depth_fwd, mut depth_bwd) = (0u32, 0u32);

        while depth_fwd + depth_bwd < max_hops
            && !frontier_fwd.is_empty()
            && !frontier_bwd.is_empty()
        {
            let forward = frontier_fwd.len() <= frontier_bwd.len();
            let (frontier, seen, other, depth) = if forward {
                (&mut frontier_fwd, &mut dist_fwd, &dist_bwd, &mut depth_fwd)
            } else {
                (&mut frontier_bwd, &mut dist_bwd, &dist_fwd, &mut depth_bwd)
            };
            *depth += 1;
            let mut next = Vec::new();
            let mut best: Option<u32> = None;
            for &node in frontier.iter() {
                for nb in self.neighbors(node) {
                    if seen.contains_key(&nb) {
                        continue;
                    }
                    seen.insert(nb, *depth);
                    if let Some(&d) = other.get(&nb) {
                        let total = *depth + d;
                        best = Some(best.map_or(total, |b| b.min(total)));
                    }
                    next.push(nb);
                }
            }
            if let Some(total) = best {
                return Ok((total <= max_hops).then_some(total));
            }
            *frontier = next;
        }
        Ok(None)
    }

    /// Every term within `radius` hops of `id`, including `id` itself.
    pub fn within_hops(&self, id: &str, radius: u32) -> Result<Vec<&str>> {
        let start = self.lookup(id)?;
        let mut seen: FxHashMap<u32, u32> = FxHashMap::default();
        seen.insert(start, 0);
        let mut queue = VecDeque::from([start]);
        while let Some(node) = queue.pop_front() {
            let d = seen[&node];
            if d == radius {
                continue;
            }
            for nb in self.neighbors(node) {
                if let std::collections::hash_map::Entry::Vacant(e) = seen.entry(nb) {
                    e.insert(d + 1);
                    queue.push_back(nb);
                }
            }
        }
        let mut out: Vec<&str> = seen.keys().map(|&i| self.terms[i as usize].id.as_str()).collect();
        out.sort_unstable();
        Ok(out)
    }

    /// True when `predicted` lies within three hops of `truth`.
    pub fn is_highly_relevant(&self, predicted: &str, truth: &str) -> Result<bool> {
        Ok(self
            .term_distance(predicted, truth, HIGHLY_RELEVANT_HOPS)?
            .is_some())
    }

    /// `n` distinct non-obsolete Biological Process terms drawn uniformly
    /// without replacement. Equal seeds give identical output.
    pub fn sample_bp_terms(&self, n: usize, seed: u64) -> Result<Vec<String>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_bp_terms_with(n, &mut rng)
    }

    pub fn sample_bp_terms_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<String>> {
        let population = self
            .by_namespace
            .get(&Namespace::BiologicalProcess)
            .map(Vec::as_slice)
            .unwrap_or(&[]);
        if n > population.len() {
            return Err(Error::Capacity {
                requested: n,
                available: population.len(),
            });
        }
        Ok(rand::seq::index::sample(rng, population.len(), n)
            .into_iter()
            .map(|i| self.terms[population[i] as usize].id.clone())
            .collect())
    }

    pub fn bp_population(&self) -> usize {
        self.by_namespace
            .get(&Namespace::BiologicalProcess)
            .map_or(0, Vec::len)
    }

    /// Terms ordered so that every child precedes its parents.
    pub fn topological_order(&self) -> Vec<&str> {
        let directed: Vec<Vec<u32>> = self
            .terms
            .iter()
            .map(|t| t.parents.iter().map(|p| self.index[&p.target]).collect())
            .collect();
        self.topo_sort(&directed)
            .expect("accepted graphs are acyclic")
            .into_iter()
            .map(|i| self.terms[i as usize].id.as_str())
            .collect()
    }

    fn topo_sort(&self, child_to_parents: &[Vec<u32>]) -> Option<Vec<u32>> {
        let n = child_to_parents.len();
        let mut indegree = vec![0usize; n];
        for parents in child_to_parents {
            for &p in parents {
                indegree[p as usize] += 1;
            }
        }
        let mut queue: VecDeque<u32> = (0..n as u32).filter(|&i| indegree[i as usize] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(node) = queue.pop_front() {
            order.push(node);
            for &p in &child_to_parents[node as usize] {
                indegree[p as usize] -= 1;
                if indegree[p as usize] == 0 {
                    queue.push_back(p);
                }
            }
        }
        (order.len() == n).then_some(order)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(n: usize) -> String {
        format!("GO:{n:07}")
    }

    /// Path 1 - 2 - 3 - ... - n, each term `is_a` its predecessor.
    pub(crate) fn path_graph(n: usize) -> OntologyGraph {
        let terms = (1..=n)
            .map(|i| {
                let t = GoTerm::new(id(i), format!("term {i}"), Namespace::BiologicalProcess);
                if i > 1 {
                    t.with_parent(id(i - 1), Relation::IsA)
                } else {
                    t
                }
            })
            .collect();
        OntologyGraph::from_terms(terms).unwrap()
    }

    #[test]
    fn identity_and_single_edge() {
        let g = path_graph(6);
        assert_eq!(g.term_distance(&id(3), &id(3), 3).unwrap(), Some(0));
        assert_eq!(g.term_distance(&id(3), &id(3), 0).unwrap(), Some(0));
        assert_eq!(g.term_distance(&id(2), &id(1), 3).unwrap(), Some(1));
        assert_eq!(g.term_distance(&id(1), &id(2), 0).unwrap(), None);
    }

    #[test]
    fn four_hops_is_not_highly_relevant() {
        let g = path_graph(6);
        assert_eq!(g.term_distance(&id(1), &id(5), 3).unwrap(), None);
        assert_eq!(g.term_distance(&id(1), &id(5), 4).unwrap(), Some(4));
        assert!(!g.is_highly_relevant(&id(1), &id(5)).unwrap());
        assert!(g.is_highly_relevant(&id(1), &id(4)).unwrap());
        assert!(g.is_highly_relevant(&id(2), &id(2)).unwrap());
    }

    #[test]
    fn unknown_id_is_named() {
        let g = path_graph(2);
        let err = g.term_distance(&id(1), "GO:9999999", 3).unwrap_err();
        assert!(matches!(err, Error::NotFound(ref m) if m.contains("GO:9999999")));
    }

    #[test]
    fn part_of_edges_follow_edge_mode() {
        let terms = vec![
            GoTerm::new(id(1), "root", Namespace::BiologicalProcess),
            GoTerm::new(id(2), "piece", Namespace::BiologicalProcess).with_parent(id(1), Relation::PartOf),
        ];
        let g = OntologyGraph::from_terms(terms).unwrap();
        assert_eq!(g.term_distance(&id(1), &id(2), 3).unwrap(), Some(1));
        let g = g.with_edge_mode(EdgeMode::IsAOnly);
        assert_eq!(g.term_distance(&id(1), &id(2), 3).unwrap(), None);
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn cycles_are_rejected() {
        let terms = vec![
            GoTerm::new(id(1), "a", Namespace::BiologicalProcess).with_parent(id(2), Relation::IsA),
            GoTerm::new(id(2), "b", Namespace::BiologicalProcess).with_parent(id(1), Relation::PartOf),
        ];
        assert!(matches!(OntologyGraph::from_terms(terms), Err(Error::Validation(_))));
    }

    #[test]
    fn dangling_and_obsolete_edges_dropped() {
        let mut dead = GoTerm::new(id(3), "dead", Namespace::BiologicalProcess);
        dead.obsolete = true;
        let terms = vec![
            GoTerm::new(id(1), "a", Namespace::BiologicalProcess)
                .with_parent(id(7), Relation::IsA)
                .with_parent(id(3), Relation::IsA),
            GoTerm::new(id(2), "b", Namespace::BiologicalProcess).with_parent(id(1), Relation::IsA),
            dead.with_parent(id(1), Relation::IsA),
        ];
        let g = OntologyGraph::from_terms(terms).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.degree(&id(3)).unwrap(), 0);
        assert!(g.term(&id(3)).unwrap().parents.is_empty());
        assert_eq!(g.warnings().len(), 2);
    }

    #[test]
    fn sampling_is_seeded_and_bounded() {
        let g = path_graph(20);
        assert!(g.sample_bp_terms(0, 1).unwrap().is_empty());
        let a = g.sample_bp_terms(10, 42).unwrap();
        assert_eq!(a, g.sample_bp_terms(10, 42).unwrap());
        let mut uniq = a.clone();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), 10);
        assert!(matches!(
            g.sample_bp_terms(21, 1),
            Err(Error::Capacity { requested: 21, available: 20 })
        ));
        let mut all = g.sample_bp_terms(20, 9).unwrap();
        all.sort();
        assert_eq!(all, (1..=20).map(id).collect::<Vec<_>>());
    }

    #[test]
    fn sampling_skips_other_namespaces_and_obsolete() {
        let mut gone = GoTerm::new(id(3), "gone", Namespace::BiologicalProcess);
        gone.obsolete = true;
        let terms = vec![
            GoTerm::new(id(1), "bp", Namespace::BiologicalProcess),
            GoTerm::new(id(2), "mf", Namespace::MolecularFunction),
            gone,
        ];
        let g = OntologyGraph::from_terms(terms).unwrap();
        assert_eq!(g.bp_population(), 1);
        assert_eq!(g.sample_bp_terms(1, 5).unwrap(), vec![id(1)]);
    }

    #[test]
    fn topological_order_puts_children_first() {
        let g = path_graph(5);
        let order = g.topological_order();
        assert_eq!(order.first(), Some(&id(5).as_str()));
        assert_eq!(order.last(), Some(&id(1).as_str()));
    }
}
