mod common;

use std::collections::{BTreeMap, HashSet};

use bcaid_core::corpus::{parse_gmt, LabeledGeneSet};
use bcaid_core::evaluation::stats::{benjamini_hochberg, hypergeometric_upper_tail, student_t_upper_tail};
use bcaid_core::evaluation::{
    contributing_gene_histogram, contributing_histogram, one_sample_t_test, ora_enrich, random_baseline,
    rank_of, rouge, topo_hit_rate, word_frequencies, BaselineConfig, EnrichmentResult, RougeMode,
    CONTRIBUTING_THRESHOLDS,
};
use bcaid_core::ontology::{GoTerm, Namespace, OntologyGraph, Relation};
use common::{all_pairs_bfs, fixture, go_id, random_dag};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

// ---- ROUGE ----

fn oracle_ngrams(tokens: &[&str], n: usize) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    if tokens.len() >= n {
        for i in 0..=tokens.len() - n {
            *m.entry(tokens[i..i + n].join(" ")).or_insert(0) += 1;
        }
    }
    m
}

fn oracle_f1(overlap: usize, c: usize, r: usize) -> f64 {
    if c == 0 || r == 0 || overlap == 0 {
        return 0.0;
    }
    let p = overlap as f64 / c as f64;
    let rc = overlap as f64 / r as f64;
    2.0 * p * rc / (p + rc)
}

fn oracle_rouge_n(c: &[&str], r: &[&str], n: usize) -> f64 {
    let (cm, rm) = (oracle_ngrams(c, n), oracle_ngrams(r, n));
    let overlap = cm.iter().map(|(g, k)| (*k).min(*rm.get(g).unwrap_or(&0))).sum();
    oracle_f1(overlap, cm.values().sum(), rm.values().sum())
}

fn oracle_lcs(a: &[&str], b: &[&str]) -> usize {
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in (0..a.len()).rev() {
        for j in (0..b.len()).rev() {
            t[i][j] = if a[i] == b[j] { 1 + t[i + 1][j + 1] } else { t[i + 1][j].max(t[i][j + 1]) };
        }
    }
    t[0][0]
}

const VOCAB: [&str; 8] = ["dopamine", "motor", "neuron", "the", "striatum", "gaba", "signal", "of"];

fn random_tokens(rng: &mut impl Rng, len: usize) -> Vec<&'static str> {
    (0..len).map(|_| VOCAB[rng.gen_range(0..VOCAB.len())]).collect()
}

#[test]
fn rouge_matches_independent_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let c = random_tokens(&mut rng, 30);
        let r = random_tokens(&mut rng, 30);
        let (cs, rs) = (c.join(" "), r.join(" "));
        assert!((rouge(&cs, &rs, RougeMode::N1).f1 - oracle_rouge_n(&c, &r, 1)).abs() < 1e-12);
        assert!((rouge(&cs, &rs, RougeMode::N2).f1 - oracle_rouge_n(&c, &r, 2)).abs() < 1e-12);
        let l = oracle_lcs(&c, &r);
        assert!((rouge(&cs, &rs, RougeMode::L).f1 - oracle_f1(l, c.len(), r.len())).abs() < 1e-12);
    }
}

#[test]
fn rouge_hand_example() {
    let s = rouge("the cat sat", "the cat ran", RougeMode::N1);
    for v in [s.precision, s.recall, s.f1] {
        assert!((v - 2.0 / 3.0).abs() < 1e-15);
    }
}

proptest! {
    #[test]
    fn rouge_precision_is_swapped_recall(
        c in proptest::collection::vec(0usize..8, 0..25),
        r in proptest::collection::vec(0usize..8, 0..25),
    ) {
        let cs: Vec<&str> = c.iter().map(|&i| VOCAB[i]).collect();
        let rs: Vec<&str> = r.iter().map(|&i| VOCAB[i]).collect();
        let (cs, rs) = (cs.join(" "), rs.join(" "));
        for mode in [RougeMode::N1, RougeMode::N2, RougeMode::L] {
            let a = rouge(&cs, &rs, mode);
            let b = rouge(&rs, &cs, mode);
            prop_assert!((a.precision - b.recall).abs() < 1e-15);
            for v in [a.precision, a.recall, a.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}

// ---- topology ----

#[test]
fn topo_matches_bfs_on_fifty_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let g = random_dag(&mut rng, 120, 160);
    let oracle = all_pairs_bfs(&g);
    let ids: Vec<String> = g.terms().map(|t| t.id.clone()).collect();
    let mut preds = Vec::new();
    let mut truths = Vec::new();
    for _ in 0..50 {
        truths.push(ids[rng.gen_range(0..ids.len())].clone());
        preds.push((0..5).map(|_| ids[rng.gen_range(0..ids.len())].clone()).collect::<Vec<_>>());
    }
    let report = topo_hit_rate(&preds, &truths, &g).unwrap();
    let expected: Vec<bool> = preds
        .iter()
        .zip(&truths)
        .map(|(p, t)| p.iter().any(|x| oracle.get(&(x.clone(), t.clone())).is_some_and(|&d| d <= 3)))
        .collect();
    assert_eq!(report.hits, expected);
    let hits = expected.iter().filter(|&&h| h).count();
    assert_eq!(report.accuracy, hits as f64 / 50.0);
}

#[test]
fn topo_path_graph_far_predictions_miss() {
    let terms: Vec<GoTerm> = (0..12)
        .map(|i| {
            let t = GoTerm::new(go_id(i), format!("t{i}"), Namespace::BiologicalProcess);
            if i == 0 { t } else { t.with_parent(go_id(i - 1), Relation::IsA) }
        })
        .collect();
    let g = OntologyGraph::from_terms(terms).unwrap();
    let truths = vec![go_id(0), go_id(11)];
    let preds = vec![vec![go_id(4), go_id(9)], vec![go_id(7), go_id(1)]];
    assert_eq!(topo_hit_rate(&preds, &truths, &g).unwrap().accuracy, 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn topo_is_monotone_in_predictions(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_dag(&mut rng, 40, 50);
        let ids: Vec<String> = g.terms().map(|t| t.id.clone()).collect();
        let truths: Vec<String> = (0..10).map(|_| ids[rng.gen_range(0..40)].clone()).collect();
        let base: Vec<Vec<String>> = (0..10).map(|_| vec![ids[rng.gen_range(0..40)].clone()]).collect();
        let more: Vec<Vec<String>> = base
            .iter()
            .map(|b| {
                let mut v = b.clone();
                v.push(ids[rng.gen_range(0..40)].clone());
                v
            })
            .collect();
        let a = topo_hit_rate(&base, &truths, &g).unwrap().accuracy;
        let b = topo_hit_rate(&more, &truths, &g).unwrap().accuracy;
        prop_assert!(b >= a);
    }
}

// ---- baseline ----

fn star_ontology(leaves: usize) -> OntologyGraph {
    // root GO:0000000 with `leaves` children and one grandchild chain of length 5
    let mut terms = vec![GoTerm::new(go_id(0), "root", Namespace::BiologicalProcess)];
    for i in 1..=leaves {
        terms.push(GoTerm::new(go_id(i), format!("leaf {i}"), Namespace::BiologicalProcess).with_parent(go_id(0), Relation::IsA));
    }
    for j in 0..5 {
        let id = leaves + 1 + j;
        let parent = if j == 0 { 1 } else { id - 1 };
        terms.push(GoTerm::new(go_id(id), format!("deep {j}"), Namespace::BiologicalProcess).with_parent(go_id(parent), Relation::IsA));
    }
    OntologyGraph::from_terms(terms).unwrap()
}

#[test]
fn baseline_superset_monotonicity_and_reproducibility() {
    let g = star_ontology(20);
    let truths: Vec<String> = (0..8).map(|i| go_id(3 + i)).collect();
    let base: Vec<Vec<String>> = (0..8).map(|i| if i % 2 == 0 { vec![go_id(25)] } else { vec![] }).collect();
    let cfg = BaselineConfig { n_random: 2, trials: 100, seed: 99 };
    let a = random_baseline(&base, &truths, &g, 0.8, cfg).unwrap();
    let b = random_baseline(&base, &truths, &g, 0.8, cfg).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(a.trial_accuracies.len(), 100);
    for acc in &a.trial_accuracies {
        assert!(*acc >= a.base_accuracy);
    }
}

#[test]
fn baseline_mean_matches_enumerated_expectation() {
    // Five BP terms on a path: 0-1-2-3-4. Truth = 0, so terms 0..=3 hit and 4 misses.
    let terms: Vec<GoTerm> = (0..5)
        .map(|i| {
            let t = GoTerm::new(go_id(i), format!("t{i}"), Namespace::BiologicalProcess);
            if i == 0 { t } else { t.with_parent(go_id(i - 1), Relation::IsA) }
        })
        .collect();
    let g = OntologyGraph::from_terms(terms).unwrap();
    let oracle = all_pairs_bfs(&g);
    // One random term per set, no base predictions: P(hit) = |{t : d(t, truth) ≤ 3}| / 5.
    let truths = vec![go_id(0), go_id(4), go_id(2)];
    let expected: f64 = truths
        .iter()
        .map(|t| (0..5).filter(|&i| oracle[&(go_id(i), t.clone())] <= 3).count() as f64 / 5.0)
        .sum::<f64>()
        / truths.len() as f64;
    let cfg = BaselineConfig { n_random: 1, trials: 2000, seed: 5 };
    let r = random_baseline(&vec![vec![]; 3], &truths, &g, 1.0, cfg).unwrap();
    let se = r.stdev / (cfg.trials as f64).sqrt();
    assert!((r.mean - expected).abs() <= 3.0 * se, "mean {} expected {expected} se {se}", r.mean);
}

#[test]
fn centred_trials_give_zero_statistic() {
    assert_eq!(one_sample_t_test(0.7, &[0.7; 100]), (0.0, 0.5));
}

#[test]
fn t_tail_matches_statrs() {
    for df in [1.0, 2.0, 5.0, 30.0, 999.0] {
        let dist = StudentsT::new(0.0, 1.0, df).unwrap();
        for t in [-4.0, -1.5, -0.1, 0.0, 0.3, 1.0, 2.5, 6.0] {
            let expect = 1.0 - dist.cdf(t);
            let got = student_t_upper_tail(t, df);
            assert!((got - expect).abs() < 1e-9, "df {df} t {t}: {got} vs {expect}");
        }
    }
}

#[test]
fn t_statistic_formula() {
    let samples = [0.60, 0.62, 0.64, 0.66, 0.68];
    let (t, p) = one_sample_t_test(0.70, &samples);
    let mean = 0.64;
    let sd = (samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 4.0).sqrt();
    let expect_t = (0.70 - mean) / (sd / 5f64.sqrt());
    assert!((t - expect_t).abs() < 1e-12);
    let dist = StudentsT::new(0.0, 1.0, 4.0).unwrap();
    assert!((p - (1.0 - dist.cdf(expect_t))).abs() < 1e-9);
}

// ---- enrichment ----

fn binom(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Exhaustive P(X ≥ k) by counting every draw of n genes out of N.
fn enumerate_tail(n_pop: u32, succ: u32, draws: u32, k: u32) -> f64 {
    let mut hit = 0u64;
    let mut total = 0u64;
    for mask in 0u32..(1 << n_pop) {
        if mask.count_ones() != draws {
            continue;
        }
        total += 1;
        if (mask & ((1 << succ) - 1)).count_ones() >= k {
            hit += 1;
        }
    }
    hit as f64 / total as f64
}

fn genes(range: std::ops::Range<u32>) -> Vec<String> {
    range.map(|i| format!("G{i}")).collect()
}

#[test]
fn ora_matches_enumeration_n12() {
    let bg = genes(0..12);
    let term = LabeledGeneSet { label: "T".into(), description: String::new(), genes: genes(0..5), species: None };
    for k in 0..=4u32 {
        // query of 4 genes with exactly k inside the term
        let mut q = genes(0..k);
        q.extend(genes(5..5 + (4 - k)));
        let r = ora_enrich(&q, std::slice::from_ref(&term), &bg).unwrap();
        let expect = enumerate_tail(12, 5, 4, k);
        assert!((r[0].p_value - expect).abs() < 1e-9, "k {k}");
        assert_eq!(r[0].contributing_genes.len(), k as usize);
    }
}

#[test]
fn hypergeometric_matches_enumeration_for_all_small_cases() {
    for n_pop in 1..=12u32 {
        for succ in 0..=n_pop {
            for draws in 0..=n_pop {
                for k in 0..=draws.min(succ) {
                    let got = hypergeometric_upper_tail(n_pop as u64, succ as u64, draws as u64, k as u64);
                    let expect = enumerate_tail(n_pop, succ, draws, k);
                    assert!((got - expect).abs() < 1e-9, "N={n_pop} K={succ} n={draws} k={k}");
                }
            }
        }
    }
    // cross-check enumeration against the closed form once
    let closed = (2..=4).map(|i| binom(5, i) * binom(7, 4 - i)).sum::<f64>() / binom(12, 4);
    assert!((enumerate_tail(12, 5, 4, 2) - closed).abs() < 1e-12);
}

#[test]
fn ora_certain_outcome_and_sorting() {
    let bg = genes(0..6);
    let lib = parse_gmt("B\t-\tG0\tG1\nA\t-\tG0\tG1\nC\t-\tG5\n", None).unwrap();
    let r = ora_enrich(&genes(0..2), &lib, &bg).unwrap();
    assert_eq!(r.iter().map(|x| x.label.as_str()).collect::<Vec<_>>(), ["A", "B", "C"]);
    let all = ora_enrich(&bg, &[LabeledGeneSet { label: "ALL".into(), description: String::new(), genes: bg.clone(), species: None }], &bg).unwrap();
    assert_eq!(all[0].p_value, 1.0);
    assert_eq!(all[0].contributing_genes, bg);
}

#[test]
fn fixture_library_enrichment() {
    let lib = parse_gmt(&std::fs::read_to_string(fixture("library.gmt")).unwrap(), None).unwrap();
    let bg: Vec<String> = std::fs::read_to_string(fixture("gene_info.tsv"))
        .unwrap()
        .lines()
        .filter(|l| l.starts_with("10090\t"))
        .filter_map(|l| l.split('\t').nth(2).map(String::from))
        .collect();
    let q: Vec<String> = ["Slc6a3", "Th", "Ddc", "Drd2"].iter().map(|s| s.to_string()).collect();
    let r = ora_enrich(&q, &lib, &bg).unwrap();
    assert_eq!(r[0].label, "DOPAMINE_SECRETION");
    assert_eq!(r[0].contributing_genes.len(), 4);
}

proptest! {
    #[test]
    fn bh_dominates_and_preserves_order(ps in proptest::collection::vec(1e-12f64..1.0, 1..40)) {
        let adj = benjamini_hochberg(&ps);
        for (p, a) in ps.iter().zip(&adj) {
            prop_assert!(a >= p);
            prop_assert!(*a <= 1.0);
        }
        for i in 0..ps.len() {
            for j in 0..ps.len() {
                if ps[i] < ps[j] {
                    prop_assert!(adj[i] <= adj[j]);
                }
            }
        }
    }

    #[test]
    fn hypergeometric_tail_is_monotone_in_k(n_pop in 1u64..60, a in 0u64..60, b in 0u64..60) {
        let succ = a % (n_pop + 1);
        let draws = b % (n_pop + 1);
        let mut prev = 1.0f64;
        for k in 0..=draws.min(succ) {
            let p = hypergeometric_upper_tail(n_pop, succ, draws, k);
            prop_assert!(p <= prev + 1e-12);
            prop_assert!(p > 0.0 && p <= 1.0);
            prev = p;
        }
    }

    #[test]
    fn contributing_genes_bounded(q in proptest::collection::btree_set(0u32..30, 1..12), t in proptest::collection::btree_set(0u32..30, 1..12)) {
        let bg = genes(0..30);
        let q: Vec<String> = q.into_iter().map(|i| format!("G{i}")).collect();
        let term = LabeledGeneSet { label: "T".into(), description: String::new(), genes: t.into_iter().map(|i| format!("G{i}")).collect(), species: None };
        let r = &ora_enrich(&q, std::slice::from_ref(&term), &bg).unwrap()[0];
        prop_assert!(r.contributing_genes.len() <= q.len().min(term.genes.len()));
        prop_assert!(r.p_value > 0.0 && r.p_value <= 1.0);
    }
}

fn result_with(label: &str, p: f64, n: usize) -> EnrichmentResult {
    EnrichmentResult {
        label: label.into(),
        p_value: p,
        adjusted_p: p,
        contributing_genes: (0..n).map(|i| format!("G{i}")).collect(),
        background_size: 100,
        term_size: 10,
        query_size: 10,
    }
}

#[test]
fn histogram_matches_hand_tally_of_twenty_sets() {
    // best-term overlaps: 0 x3, 1 x4, 2 x6, 3 x5, 5 x2
    let overlaps = [0, 1, 2, 3, 2, 1, 0, 3, 5, 2, 2, 3, 1, 0, 2, 3, 5, 1, 2, 3];
    let runs: Vec<Vec<EnrichmentResult>> = overlaps
        .iter()
        .map(|&n| vec![result_with("worse", 0.5, 9), result_with("best", 0.01, n)])
        .collect();
    let h = contributing_gene_histogram(&runs, &CONTRIBUTING_THRESHOLDS);
    assert_eq!(h.counts, vec![17, 13, 7]);
    assert_eq!(h.n_sets, 20);
    assert_eq!(contributing_histogram(&[2], &CONTRIBUTING_THRESHOLDS).counts, vec![1, 1, 0]);
}

// ---- word frequencies ----

fn fixture_summaries() -> Vec<String> {
    std::fs::read_to_string(fixture("summaries.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["text"].as_str().unwrap().to_string())
        .collect()
}

#[test]
fn basal_ganglia_subset_ranks_dopamine_and_motor_higher() {
    let all = fixture_summaries();
    let bg: Vec<&String> = all.iter().filter(|t| t.to_lowercase().contains("basal ganglia")).collect();
    assert_eq!(bg.len(), 4);
    let fa = word_frequencies(&all, &[]);
    let fb = word_frequencies(&bg, &[]);
    for tok in ["dopamine", "motor"] {
        let (rb, ra) = (rank_of(&fb, tok).unwrap(), rank_of(&fa, tok).unwrap());
        assert!(rb < ra, "{tok}: {rb} vs {ra}");
    }
}

#[test]
fn word_frequency_order_is_total() {
    let f = word_frequencies(&["beta alpha beta gamma alpha delta"], &[]);
    let got: Vec<(&str, usize)> = f.iter().map(|w| (w.token.as_str(), w.count)).collect();
    assert_eq!(got, [("alpha", 2), ("beta", 2), ("delta", 1), ("gamma", 1)]);
    let uniq: HashSet<&str> = f.iter().map(|w| w.token.as_str()).collect();
    assert_eq!(uniq.len(), f.len());
}
