use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use bcaid_core::agents::{summarize_cluster, AgentContext, FailureEntry, GoMapper, Pipeline, PipelineConfig, Stage};
use bcaid_core::clock::{Clock, FixedClock, SystemClock};
use bcaid_core::corpus::{load_atlas, parse_gmt, AbstractStore, CellCluster, Corpus, LabeledGeneSet, MarkerType};
use bcaid_core::evaluation::{
    best_term, contributing_gene_histogram, ora_enrich, random_baseline, rouge, topo_hit_rate,
    word_frequencies, write_frequency_csv, BaselineConfig, RougeMode, CONTRIBUTING_THRESHOLDS,
};
use bcaid_core::gateway::{
    write_replay_file, EmbeddingConfig, EmbeddingGateway, HashedBowEmbedder, HttpEmbeddingGateway,
    HttpLmGateway, LmConfig, LmExchange, LmGateway, MockLmGateway,
};
use bcaid_core::ontology::{read_verbalization_table, verbalize_all, write_verbalization_table, Namespace, OntologyGraph, VerbalizedTerm};
use bcaid_core::store::Store;
use bcaid_core::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::args::*;
use crate::manifest::Manifest;

const OFFLINE_EMBED_DIM: usize = 256;
const HTTP_EMBED_DIM: usize = 1536;

fn config_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Config(format!("cannot read {}: {e}", path.display()))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| config_err(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn write_jsonl<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<usize> {
    let mut w = create(path)?;
    let mut n = 0;
    for row in rows {
        serde_json::to_writer(&mut w, &row)?;
        w.write_all(b"\n")?;
        n += 1;
    }
    w.flush()?;
    Ok(n)
}

fn clock(fixed: Option<chrono::DateTime<chrono::Utc>>) -> Arc<dyn Clock> {
    match fixed {
        Some(t) => Arc::new(FixedClock(t)),
        None => Arc::new(SystemClock),
    }
}

pub fn open_store(g: &GlobalArgs, clock: Arc<dyn Clock>) -> Result<Store> {
    if let Some(dir) = g.store.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Store::open(&g.store, clock)
}

fn load_ontology(a: &OntologyArgs, m: &mut Manifest) -> Result<OntologyGraph> {
    m.input("obo", &a.obo)?;
    let graph = OntologyGraph::load(&a.obo)?;
    for w in graph.warnings() {
        tracing::warn!("ontology: {w}");
    }
    m.count("go_terms", graph.len());
    m.count("go_edges", graph.edge_count());
    m.count("ontology_warnings", graph.warnings().len());
    Ok(graph)
}

fn load_corpus(a: &CorpusArgs, m: &mut Manifest) -> Result<Corpus> {
    m.input("gene_info", &a.gene_info)?;
    m.input("gene2pubmed", &a.gene2pubmed)?;
    m.input("abstracts", &a.abstracts)?;
    m.param("tax_id", a.tax_id);
    let corpus = Corpus::from_files(&a.gene_info, &a.gene2pubmed, &a.abstracts, a.tax_id)?;
    m.count("genes", corpus.genes.len());
    m.count("gene_info_rejected_rows", corpus.genes.rejected_rows());
    m.count("gene_pubmed_pairs", corpus.links.pair_count());
    m.count("gene2pubmed_rejected_rows", corpus.links.rejected_rows());
    m.count("abstracts", corpus.abstracts.len());
    m.count("abstract_skipped_lines", corpus.abstracts.skipped_lines());
    m.count("abstract_duplicate_pmids", corpus.abstracts.duplicate_pmids());
    Ok(corpus)
}

fn load_clusters(a: &AtlasArgs, m: &mut Manifest) -> Result<Vec<CellCluster>> {
    m.input("atlas", &a.atlas)?;
    if let Some(p) = &a.expression {
        m.input("expression", p)?;
    }
    m.param("deg_count", a.deg_count);
    let registry = load_atlas(&a.atlas, a.expression.as_deref(), a.deg_count)?;
    m.count("clusters", registry.len());
    m.count("gene_sets", registry.manifest());
    Ok(registry.into_clusters())
}

fn select_clusters(clusters: Vec<CellCluster>, wanted: &[String]) -> Result<Vec<CellCluster>> {
    if wanted.is_empty() {
        return Ok(clusters);
    }
    let known: BTreeSet<&str> = clusters.iter().map(|c| c.cluster_id.as_str()).collect();
    if let Some(missing) = wanted.iter().find(|w| !known.contains(w.as_str())) {
        return Err(Error::Validation(format!("unknown cluster {missing:?}")));
    }
    Ok(clusters.into_iter().filter(|c| wanted.contains(&c.cluster_id)).collect())
}

pub struct Gateways {
    pub lm: Box<dyn LmGateway>,
    pub embedder: Box<dyn EmbeddingGateway>,
}

fn gateways(a: &GatewayArgs, m: &mut Manifest) -> Result<Gateways> {
    let lm: Box<dyn LmGateway> = match a.gateway.as_str() {
        "mock" => Box::new(MockLmGateway::synthetic()),
        "http" => {
            let endpoint = a
                .lm_endpoint
                .clone()
                .ok_or_else(|| Error::Validation("--gateway http needs --lm-endpoint".into()))?;
            let mut config = LmConfig::new(endpoint, &a.lm_model);
            config.api_key = a.api_key.clone();
            m.param("lm", &config);
            Box::new(HttpLmGateway::new(config)?)
        }
        other => match other.strip_prefix("mock:") {
            Some(path) if !path.is_empty() => {
                let path = Path::new(path);
                m.input("replay", path)?;
                Box::new(MockLmGateway::new().load_replay_file(path)?)
            }
            _ => {
                return Err(Error::Validation(format!(
                    "--gateway must be mock, mock:<replay.jsonl> or http, not {other:?}"
                )))
            }
        },
    };
    m.param("gateway", &a.gateway);
    m.version("lm_model", lm.model());

    let embedder: Box<dyn EmbeddingGateway> = match &a.embed_endpoint {
        Some(endpoint) => {
            let mut config = EmbeddingConfig::new(endpoint, &a.embed_model, a.embed_dim.unwrap_or(HTTP_EMBED_DIM));
            config.api_key = a.api_key.clone();
            m.param("embedding", &config);
            m.version("embedding_model", &a.embed_model);
            Box::new(HttpEmbeddingGateway::new(config)?)
        }
        None => {
            let dim = a.embed_dim.unwrap_or(OFFLINE_EMBED_DIM);
            if dim == 0 {
                return Err(Error::Validation("--embed-dim must be positive".into()));
            }
            m.version("embedding_model", format!("hashed-bow-{dim}"));
            Box::new(HashedBowEmbedder::new(dim))
        }
    };
    Ok(Gateways { lm, embedder })
}

fn record_exchanges(a: &GatewayArgs, exchanges: &[LmExchange], m: &mut Manifest) -> Result<()> {
    if let Some(path) = &a.record {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        write_replay_file(path, exchanges)?;
        m.outputs.push(path.clone());
    }
    Ok(())
}

fn build_mapper(
    graph: &OntologyGraph,
    table: Option<&Path>,
    embedder: &dyn EmbeddingGateway,
    m: &mut Manifest,
) -> Result<GoMapper> {
    let table: BTreeMap<String, VerbalizedTerm> = match table {
        Some(path) => {
            m.input("verbalized", path)?;
            read_verbalization_table(BufReader::new(File::open(path).map_err(|e| config_err(path, e))?))?
        }
        None => verbalize_all(graph, None)?.0.into_iter().map(|v| (v.term_id.clone(), v)).collect(),
    };
    let mapper = GoMapper::build(graph, &table, Some(Namespace::BiologicalProcess), embedder)?;
    m.count("mapper_terms", mapper.len());
    Ok(mapper)
}

pub fn ingest(g: &GlobalArgs, a: &IngestArgs, m: &mut Manifest) -> Result<()> {
    let corpus = load_corpus(&a.corpus, m)?;
    let clusters = load_clusters(&a.atlas, m)?;
    let store = open_store(g, Arc::new(SystemClock))?;
    m.count("clusters_registered", store.register_clusters(clusters)?);
    let abstracts = corpus.abstracts.iter().map(|r| (r.pmid, r.title.clone()));
    m.count("abstracts_registered", store.register_abstracts(abstracts)?);
    m.outputs.push(g.store.clone());
    Ok(())
}

pub fn verbalize(g: &GlobalArgs, a: &VerbalizeArgs, m: &mut Manifest) -> Result<()> {
    let graph = load_ontology(&a.ontology, m)?;
    let gw = if a.use_lm { Some(gateways(&a.gateway, m)?) } else { None };
    m.param("use_lm", a.use_lm);
    let (table, exchanges) = verbalize_all(&graph, gw.as_ref().map(|g| g.lm.as_ref()))?;
    let path = a.output.clone().unwrap_or_else(|| g.out.join("verbalized.jsonl"));
    let mut w = create(&path)?;
    write_verbalization_table(&mut w, &table)?;
    w.flush()?;
    m.count("verbalized", table.len());
    m.count("template_fallbacks", table.iter().filter(|v| v.fallback_reason.is_some()).count());
    m.count("lm_exchanges", exchanges.len());
    m.outputs.push(path);
    record_exchanges(&a.gateway, &exchanges, m)
}

pub fn annotate(g: &GlobalArgs, a: &AnnotateArgs, m: &mut Manifest) -> Result<()> {
    if a.jobs == 0 {
        return Err(Error::Validation("--jobs must be at least 1".into()));
    }
    let graph = load_ontology(&a.ontology, m)?;
    let corpus = load_corpus(&a.corpus, m)?;
    let clusters = select_clusters(load_clusters(&a.atlas, m)?, &a.clusters)?;
    let gw = gateways(&a.gateway, m)?;
    let mapper = build_mapper(&graph, a.verbalized.as_deref(), gw.embedder.as_ref(), m)?;

    let clock = clock(a.fixed_time);
    let store = open_store(g, clock.clone())?;
    store.register_clusters(clusters.iter().cloned())?;
    store.register_abstracts(corpus.abstracts.iter().map(|r| (r.pmid, r.title.clone())))?;

    let config = PipelineConfig {
        n_top_pm: a.n_top_pm,
        go_k: a.go_k,
        jobs: a.jobs,
        summarize: !a.no_summary,
    };
    m.param("pipeline", &config);
    if let Some(t) = a.fixed_time {
        m.param("fixed_time", t);
    }
    let pipeline = Pipeline {
        corpus: &corpus,
        ontology: &graph,
        mapper: &mapper,
        lm: gw.lm.as_ref(),
        embedder: gw.embedder.as_ref(),
        clock: clock.as_ref(),
        config,
    };
    let mut failures = Vec::new();
    let mut exchanges = Vec::new();
    let mut saved = 0;
    let summary = pipeline.run(&clusters, |outcome| {
        saved += store.save_outcome(&outcome)?.len();
        failures.extend(outcome.failures);
        exchanges.extend(outcome.exchanges);
        Ok(())
    })?;
    let failure_path = g.out.join("failures.jsonl");
    write_jsonl(&failure_path, &failures)?;
    m.outputs.push(failure_path);
    m.outputs.push(g.store.clone());
    m.count("run", &summary);
    m.count("store_entries_written", saved);
    record_exchanges(&a.gateway, &exchanges, m)?;

    if summary.clusters > 0 && summary.records == 0 {
        return Err(Error::Annotation(format!(
            "no gene set was annotated; {} failures in {}",
            failures.len(),
            g.out.join("failures.jsonl").display()
        )));
    }
    Ok(())
}

pub fn summarize(g: &GlobalArgs, a: &SummarizeArgs, m: &mut Manifest) -> Result<()> {
    let graph = load_ontology(&a.ontology, m)?;
    let gw = gateways(&a.gateway, m)?;
    let mapper = build_mapper(&graph, None, gw.embedder.as_ref(), m)?;
    let clock = clock(a.fixed_time);
    let store = open_store(g, clock.clone())?;
    let clusters = select_clusters(store.clusters(), &a.clusters)?;
    let abstracts = AbstractStore::default();
    let ctx = AgentContext {
        lm: gw.lm.as_ref(),
        embedder: gw.embedder.as_ref(),
        mapper: &mapper,
        abstracts: &abstracts,
        go_k: mapper.len().min(bcaid_core::agents::DEFAULT_GO_K),
    };
    let mut failures = Vec::new();
    let mut exchanges = Vec::new();
    let mut written = 0;
    for cluster in &clusters {
        let records: Vec<_> = MarkerType::ALL
            .into_iter()
            .filter_map(|mt| store.annotation(&cluster.cluster_id, mt))
            .map(|s| s.record)
            .collect();
        match summarize_cluster(cluster, &records, &ctx, clock.now()) {
            Ok((summary, ex)) => {
                store.save_summary(summary)?;
                exchanges.extend(ex);
                written += 1;
            }
            Err(e) => failures.push(FailureEntry {
                cluster_id: cluster.cluster_id.clone(),
                marker_type: None,
                stage: Stage::Summary,
                reason_code: e.code().into(),
                message: e.to_string(),
            }),
        }
    }
    let failure_path = g.out.join("summary_failures.jsonl");
    write_jsonl(&failure_path, &failures)?;
    m.outputs.push(failure_path);
    m.count("clusters", clusters.len());
    m.count("summaries", written);
    m.count("failures", failures.len());
    record_exchanges(&a.gateway, &exchanges, m)
}

/// One row of a predictions or truths file. A truth row may use `go_terms`
/// too; its first entry is the truth.
#[derive(Debug, Deserialize)]
struct EvalRow {
    id: String,
    #[serde(default)]
    go_terms: Vec<String>,
    #[serde(default)]
    go_term: Option<String>,
    #[serde(default)]
    text: Option<String>,
}

impl EvalRow {
    fn terms(&self) -> Vec<String> {
        self.go_term.iter().chain(&self.go_terms).cloned().collect()
    }
}

fn read_rows(path: &Path, role: &str, m: &mut Manifest) -> Result<Vec<EvalRow>> {
    m.input(role, path)?;
    let reader = BufReader::new(File::open(path).map_err(|e| config_err(path, e))?);
    let mut rows = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: EvalRow = serde_json::from_str(&line)
            .map_err(|e| Error::parse(i + 1, format!("{}: {e}", path.display())))?;
        if !seen.insert(row.id.clone()) {
            return Err(Error::parse(i + 1, format!("{}: duplicate id {:?}", path.display(), row.id)));
        }
        rows.push(row);
    }
    Ok(rows)
}

struct Joined {
    ids: Vec<String>,
    predictions: Vec<Vec<String>>,
    truths: Vec<String>,
    texts: Vec<(Option<String>, Option<String>)>,
}

/// Pairs every truth with the prediction row of the same id, in truth order.
fn join(predictions: Vec<EvalRow>, truths: Vec<EvalRow>) -> Result<Joined> {
    let mut by_id: BTreeMap<String, EvalRow> = predictions.into_iter().map(|r| (r.id.clone(), r)).collect();
    let mut out = Joined {
        ids: Vec::new(),
        predictions: Vec::new(),
        truths: Vec::new(),
        texts: Vec::new(),
    };
    for t in truths {
        let truth = t
            .terms()
            .into_iter()
            .next()
            .ok_or_else(|| Error::Validation(format!("truth {:?} has no GO term", t.id)))?;
        let p = by_id
            .remove(&t.id)
            .ok_or_else(|| Error::Validation(format!("no prediction for {:?}", t.id)))?;
        out.predictions.push(p.terms());
        out.truths.push(truth);
        out.texts.push((p.text, t.text));
        out.ids.push(t.id);
    }
    if let Some(extra) = by_id.keys().next() {
        return Err(Error::Validation(format!("prediction {extra:?} has no truth")));
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
struct RougeSummary {
    pairs: usize,
    rouge1_f1: f64,
    rouge2_f1: f64,
    rouge_l_f1: f64,
}

pub fn evaluate(g: &GlobalArgs, a: &EvaluateArgs, m: &mut Manifest) -> Result<()> {
    let graph = load_ontology(&a.ontology, m)?;
    let joined = join(read_rows(&a.predictions, "predictions", m)?, read_rows(&a.truths, "truths", m)?)?;
    let topo = topo_hit_rate(&joined.predictions, &joined.truths, &graph)?;

    let mut per_set = Vec::new();
    let mut sums = [0.0; 3];
    let mut pairs = 0;
    for (i, id) in joined.ids.iter().enumerate() {
        let mut row = json!({ "id": id, "truth": joined.truths[i], "topo_hit": topo.hits[i] });
        if let (Some(cand), Some(reference)) = &joined.texts[i] {
            let scores = [RougeMode::N1, RougeMode::N2, RougeMode::L].map(|mode| rouge(cand, reference, mode));
            for (s, score) in sums.iter_mut().zip(&scores) {
                *s += score.f1;
            }
            pairs += 1;
            row["rouge1"] = json!(scores[0]);
            row["rouge2"] = json!(scores[1]);
            row["rougeL"] = json!(scores[2]);
        }
        per_set.push(row);
    }
    let mean = |s: f64| if pairs == 0 { 0.0 } else { s / pairs as f64 };
    let rouge = RougeSummary {
        pairs,
        rouge1_f1: mean(sums[0]),
        rouge2_f1: mean(sums[1]),
        rouge_l_f1: mean(sums[2]),
    };
    m.count("sets", joined.ids.len());
    m.count("topo_hits", topo.hit_count());
    m.count("accuracy", topo.accuracy);
    m.count("rouge_pairs", pairs);

    let path = a.output.clone().unwrap_or_else(|| g.out.join("evaluation.json"));
    write_json(&path, &json!({ "topo": topo, "rouge": rouge, "per_set": per_set }))?;
    m.outputs.push(path);
    Ok(())
}

pub fn baseline(g: &GlobalArgs, a: &BaselineArgs, m: &mut Manifest) -> Result<()> {
    let graph = load_ontology(&a.ontology, m)?;
    let base = join(read_rows(&a.base, "base", m)?, read_rows(&a.truths, "truths", m)?)?;
    let observed = match (&a.predictions, a.observed) {
        (Some(path), _) => {
            let refined = join(read_rows(path, "predictions", m)?, read_rows(&a.truths, "truths", m)?)?;
            topo_hit_rate(&refined.predictions, &refined.truths, &graph)?.accuracy
        }
        (None, Some(x)) if (0.0..=1.0).contains(&x) => x,
        (None, Some(x)) => return Err(Error::Validation(format!("--observed {x} is not in [0, 1]"))),
        (None, None) => topo_hit_rate(&base.predictions, &base.truths, &graph)?.accuracy,
    };
    let config = BaselineConfig {
        n_random: a.n_random,
        trials: a.trials,
        seed: a.seed,
    };
    m.seeds.insert("baseline".into(), a.seed);
    m.param("baseline", config);
    let report = random_baseline(&base.predictions, &base.truths, &graph, observed, config)?;
    m.count("sets", base.truths.len());
    m.count("mean", report.mean);
    m.count("t_statistic", report.t_statistic);
    m.count("p_value", report.p_value);

    let path = a.output.clone().unwrap_or_else(|| g.out.join("baseline.json"));
    write_json(&path, &report)?;
    m.outputs.push(path);
    Ok(())
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    Ok(read_text(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

pub fn ora(g: &GlobalArgs, a: &OraArgs, m: &mut Manifest) -> Result<()> {
    m.input("library", &a.library)?;
    let library = parse_gmt(&read_text(&a.library)?, None)?;
    let queries: Vec<LabeledGeneSet> = if let Some(path) = &a.queries {
        m.input("queries", path)?;
        parse_gmt(&read_text(path)?, None)?
    } else if !a.genes.is_empty() {
        vec![LabeledGeneSet {
            label: "query".into(),
            description: String::new(),
            genes: a.genes.clone(),
            species: None,
        }]
    } else {
        let store = open_store(g, Arc::new(SystemClock))?;
        store
            .clusters()
            .into_iter()
            .flat_map(|c| c.marker_sets)
            .map(|s| LabeledGeneSet {
                label: format!("{}/{}", s.cluster_id, s.marker_type),
                description: String::new(),
                genes: s.genes,
                species: None,
            })
            .collect()
    };
    if queries.is_empty() {
        return Err(Error::Validation("no query gene sets".into()));
    }
    let background: Vec<String> = match &a.background {
        Some(path) => {
            m.input("background", path)?;
            read_lines(path)?
        }
        None => library
            .iter()
            .flat_map(|s| s.genes.iter().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
    };
    m.count("library_sets", library.len());
    m.count("queries", queries.len());
    m.count("background", background.len());

    let mut runs = Vec::with_capacity(queries.len());
    let mut rows = Vec::with_capacity(queries.len());
    for q in &queries {
        let results = ora_enrich(&q.genes, &library, &background)?;
        rows.push(json!({ "query": q.label, "best": best_term(&results), "results": results }));
        runs.push(results);
    }
    let path = a.output.clone().unwrap_or_else(|| g.out.join("ora.jsonl"));
    write_jsonl(&path, &rows)?;
    m.outputs.push(path);
    let histogram = contributing_gene_histogram(&runs, &CONTRIBUTING_THRESHOLDS);
    let hist_path = g.out.join("ora_contributing.json");
    write_json(&hist_path, &histogram)?;
    m.outputs.push(hist_path);
    m.count("contributing_histogram", &histogram);
    Ok(())
}

fn frequencies_to_csv(path: &Path, texts: &[String], a: &WordfreqArgs) -> Result<usize> {
    let mut freqs = word_frequencies(texts, &a.stopwords);
    if let Some(n) = a.top {
        freqs.truncate(n);
    }
    let mut w = create(path)?;
    write_frequency_csv(&freqs, &mut w)?;
    w.flush()?;
    Ok(freqs.len())
}

pub fn wordfreq(g: &GlobalArgs, a: &WordfreqArgs, m: &mut Manifest) -> Result<()> {
    let texts: Vec<String> = match &a.input {
        Some(path) => {
            m.input("input", path)?;
            let mut texts = Vec::new();
            for (i, line) in read_text(path)?.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let row: serde_json::Value =
                    serde_json::from_str(line).map_err(|e| Error::parse(i + 1, e.to_string()))?;
                let text = row[a.field.as_str()]
                    .as_str()
                    .ok_or_else(|| Error::parse(i + 1, format!("no string field {:?}", a.field)))?;
                texts.push(text.to_string());
            }
            texts
        }
        None => {
            let store = open_store(g, Arc::new(SystemClock))?;
            store
                .latest_summaries()
                .into_iter()
                .map(|s| format!("{} {}", s.brief, s.detailed))
                .collect()
        }
    };
    m.count("texts", texts.len());
    let path = g.out.join("wordfreq.csv");
    m.count("tokens", frequencies_to_csv(&path, &texts, a)?);
    m.outputs.push(path);

    if let Some(keyword) = a.keyword.as_deref().map(str::trim).filter(|k| !k.is_empty()) {
        let needle = keyword.to_lowercase();
        let subset: Vec<String> = texts.iter().filter(|t| t.to_lowercase().contains(&needle)).cloned().collect();
        m.param("keyword", keyword);
        m.count("keyword_texts", subset.len());
        let path = g.out.join("wordfreq_keyword.csv");
        m.count("keyword_tokens", frequencies_to_csv(&path, &subset, a)?);
        m.outputs.push(path);
    }
    Ok(())
}

pub fn export(g: &GlobalArgs, a: &ExportArgs, m: &mut Manifest) -> Result<()> {
    let store = open_store(g, Arc::new(SystemClock))?;
    let dir: PathBuf = a.dir.clone().unwrap_or_else(|| g.out.join("export"));
    m.count("exported", store.export_dir(&dir)?);
    m.outputs.push(dir);
    Ok(())
}

pub fn serve(g: &GlobalArgs, a: &ServeArgs, m: &mut Manifest) -> Result<()> {
    let mut store = open_store(g, Arc::new(SystemClock))?;
    if let Some(t) = &a.atlas_link {
        store = store.with_atlas_link(t);
    }
    let stats = store.stats(bcaid_core::store::DEFAULT_STATS_KEYWORD);
    m.count("clusters", stats.clusters);
    m.count("gene_sets", stats.gene_sets);
    m.param("bind", a.bind.to_string());
    m.param("cors_origin", &a.cors_origin);
    m.status = "serving";
    m.write(&g.out)?;

    let config = bcaid_service::ServiceConfig {
        cors_origin: a.cors_origin.clone(),
    };
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(bcaid_service::serve(a.bind, Arc::new(store), &config))
}
