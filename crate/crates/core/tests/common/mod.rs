#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::path::PathBuf;

use bcaid_core::agents::{ClusterOutcome, GoMapper, Pipeline, PipelineConfig, RunSummary};
use bcaid_core::clock::FixedClock;
use bcaid_core::corpus::{load_atlas, CellCluster, Corpus, MarkerGeneSet, MarkerType, MOUSE};
use bcaid_core::gateway::{HashedBowEmbedder, LmGateway};
use bcaid_core::ontology::{
    verbalize_all, GoTerm, Namespace, OntologyGraph, Relation, VerbalizedTerm,
};
use chrono::{DateTime, TimeZone, Utc};
use rand::Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn epoch() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2025, 1, 15, 9, 30, 0).unwrap()
}

pub struct Fixture {
    pub ontology: OntologyGraph,
    pub corpus: Corpus,
    pub clusters: Vec<CellCluster>,
    pub embedder: HashedBowEmbedder,
    pub mapper: GoMapper,
}

impl Fixture {
    pub fn load() -> Self {
        let ontology = OntologyGraph::load(&fixture("go.obo")).unwrap();
        let corpus = Corpus::from_files(
            &fixture("gene_info.tsv"),
            &fixture("gene2pubmed.tsv"),
            &fixture("abstracts.jsonl"),
            MOUSE,
        )
        .unwrap();
        let clusters = load_atlas(&fixture("atlas.csv"), Some(&fixture("expression.csv")), 20)
            .unwrap()
            .into_clusters();
        let embedder = HashedBowEmbedder::default();
        let (table, _) = verbalize_all(&ontology, None).unwrap();
        let table: BTreeMap<String, VerbalizedTerm> =
            table.into_iter().map(|v| (v.term_id.clone(), v)).collect();
        let mapper = GoMapper::build(&ontology, &table, Some(Namespace::BiologicalProcess), &embedder).unwrap();
        Self {
            ontology,
            corpus,
            clusters,
            embedder,
            mapper,
        }
    }

    pub fn run(&self, lm: &dyn LmGateway, jobs: usize) -> (Vec<ClusterOutcome>, RunSummary) {
        let clock = FixedClock(epoch());
        let pipeline = Pipeline {
            corpus: &self.corpus,
            ontology: &self.ontology,
            mapper: &self.mapper,
            lm,
            embedder: &self.embedder,
            clock: &clock,
            config: PipelineConfig {
                jobs,
                ..PipelineConfig::default()
            },
        };
        let mut outcomes = Vec::new();
        let summary = pipeline
            .run(&self.clusters, |o| {
                outcomes.push(o);
                Ok(())
            })
            .unwrap();
        (outcomes, summary)
    }
}

pub fn go_id(i: usize) -> String {
    format!("GO:{i:07}")
}

/// A random DAG: `n` BP terms and up to `m` parent edges, each pointing from a
/// higher index to a lower one.
pub fn random_dag(rng: &mut impl Rng, n: usize, m: usize) -> OntologyGraph {
    let mut terms: Vec<GoTerm> = (0..n)
        .map(|i| GoTerm::new(go_id(i), format!("term {i}"), Namespace::BiologicalProcess))
        .collect();
    if n > 1 {
        for _ in 0..m {
            let child = rng.gen_range(1..n);
            let parent = rng.gen_range(0..child);
            let rel = if rng.gen_bool(0.8) { Relation::IsA } else { Relation::PartOf };
            terms[child] = terms[child].clone().with_parent(go_id(parent), rel);
        }
    }
    OntologyGraph::from_terms(terms).unwrap()
}

/// Undirected hop distances from every term, computed by plain BFS over the
/// parent lists (independent of the graph's own adjacency).
pub fn all_pairs_bfs(graph: &OntologyGraph) -> HashMap<(String, String), u32> {
    let ids: Vec<String> = graph.terms().map(|t| t.id.clone()).collect();
    let mut adj: HashMap<&str, Vec<&str>> = ids.iter().map(|i| (i.as_str(), Vec::new())).collect();
    for t in graph.terms() {
        for p in &t.parents {
            if p.target != t.id && adj.contains_key(p.target.as_str()) {
                adj.get_mut(t.id.as_str()).unwrap().push(p.target.as_str());
                adj.get_mut(p.target.as_str()).unwrap().push(t.id.as_str());
            }
        }
    }
    let mut out = HashMap::new();
    for src in &ids {
        let mut dist: HashMap<&str, u32> = HashMap::from([(src.as_str(), 0)]);
        let mut q = VecDeque::from([src.as_str()]);
        while let Some(u) = q.pop_front() {
            for &v in &adj[u] {
                if !dist.contains_key(v) {
                    dist.insert(v, dist[u] + 1);
                    q.push_back(v);
                }
            }
        }
        for (dst, d) in dist {
            out.insert((src.clone(), dst.to_string()), d);
        }
    }
    out
}

pub const CLASSES: [&str; 3] = ["01 IT-ET Glut", "09 CNU-LGE GABA", "21 MB Dopa"];
pub const NT_TYPES: [&str; 3] = ["Glut", "GABA", "Dopa"];
pub const GENE_POOL: [&str; 12] = [
    "Slc6a3", "Th", "Ddc", "Drd1", "Drd2", "Gad1", "Tac1", "Penk", "Satb2", "Tbr1", "Rorb", "Cux2",
];

/// `n` clusters with a random three-level taxonomy. Each cluster has the
/// three atlas marker sets and, with probability `deg_p`, a Top-20 DEG set.
pub fn synthetic_clusters(rng: &mut impl Rng, n: usize, deg_p: f64) -> Vec<CellCluster> {
    (0..n)
        .map(|i| {
            let c = rng.gen_range(0..CLASSES.len());
            let sub = rng.gen_range(0..2);
            let sup = rng.gen_range(0..2);
            let id = (1000 + i).to_string();
            let mut types = vec![MarkerType::ClusterCombo, MarkerType::Merfish, MarkerType::Tf];
            if rng.gen_bool(deg_p) {
                types.push(MarkerType::Top20Deg);
            }
            let marker_sets = types
                .into_iter()
                .map(|m| {
                    let k = rng.gen_range(1..5);
                    let genes: Vec<&str> = (0..k).map(|_| GENE_POOL[rng.gen_range(0..GENE_POOL.len())]).collect();
                    MarkerGeneSet::new(id.clone(), m, genes).unwrap()
                })
                .collect();
            CellCluster {
                cluster_id: id,
                class_label: CLASSES[c].to_string(),
                subclass_label: format!("{} sub{sub}", CLASSES[c]),
                supertype_label: format!("{} sub{sub} sup{sup}", CLASSES[c]),
                nt_type_label: NT_TYPES[c].to_string(),
                anatomical_location: if c == 2 { "Basal Ganglia".into() } else { "Isocortex".into() },
                marker_sets,
            }
        })
        .collect()
}

/// Clusters shaped like the full atlas run: `clusters` with three atlas sets
/// each, the first `with_deg` of them also carrying a DEG set.
pub fn scale_clusters(clusters: usize, with_deg: usize) -> Vec<CellCluster> {
    (0..clusters)
        .map(|i| {
            let id = i.to_string();
            let mut types = vec![MarkerType::ClusterCombo, MarkerType::Merfish, MarkerType::Tf];
            if i < with_deg {
                types.push(MarkerType::Top20Deg);
            }
            CellCluster {
                cluster_id: id.clone(),
                class_label: format!("class {}", i % 34),
                subclass_label: format!("subclass {}", i % 338),
                supertype_label: format!("supertype {}", i % 1201),
                nt_type_label: NT_TYPES[i % 3].to_string(),
                anatomical_location: String::new(),
                marker_sets: types
                    .into_iter()
                    .map(|m| MarkerGeneSet::new(id.clone(), m, [GENE_POOL[i % 12]]).unwrap())
                    .collect(),
            }
        })
        .collect()
}
