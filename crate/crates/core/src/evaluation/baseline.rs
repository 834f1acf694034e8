use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{mean, sample_stdev, student_t_upper_tail};
use super::topo::{accuracy_of, check_known, topo_hit_rate};
use crate::error::{Error, Result};
use crate::ontology::{OntologyGraph, HIGHLY_RELEVANT_HOPS};

pub const DEFAULT_N_RANDOM: usize = 10;
pub const DEFAULT_TRIALS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub n_random: usize,
    pub trials: usize,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            n_random: DEFAULT_N_RANDOM,
            trials: DEFAULT_TRIALS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub trial_accuracies: Vec<f64>,
    pub mean: f64,
    pub stdev: f64,
    pub base_accuracy: f64,
    pub observed_accuracy: f64,
    pub t_statistic: f64,
    /// One-sided: observed exceeds the random-trial mean.
    pub p_value: f64,
    pub seed: u64,
    pub n_random: usize,
    pub trials: usize,
}

/// One-sample, one-sided t-test of `observed` against `samples`.
///
/// A zero spread is handled explicitly: equal values give t = 0 and p = 0.5,
/// otherwise t saturates at ±f64::MAX.
pub fn one_sample_t_test(observed: f64, samples: &[f64]) -> (f64, f64) {
    let m = mean(samples);
    let sd = sample_stdev(samples);
    let n = samples.len() as f64;
    let mut diff = observed - m;
    // summation noise on constant samples must not pass for spread
    let scale = m.abs().max(observed.abs()).max(1.0);
    if sd <= 1e-12 * scale {
        if diff.abs() <= 1e-12 * scale {
            diff = 0.0;
        }
        return if diff == 0.0 {
            (0.0, 0.5)
        } else if diff > 0.0 {
            (f64::MAX, f64::MIN_POSITIVE)
        } else {
            (-f64::MAX, 1.0)
        };
    }
    let t = diff / (sd / n.sqrt());
    let df = (n - 1.0).max(1.0);
    let p = student_t_upper_tail(t, df).clamp(f64::MIN_POSITIVE, 1.0);
    (t, p)
}

/// Replaces the refined predictions with `n_random` Biological Process
/// samples per set and re-scores, `trials` times. Trial `i` draws from its own
/// generator seeded with `seed + i`, so the result does not depend on how
/// trials are scheduled.
pub fn random_baseline(
    base_predictions: &[Vec<String>],
    truths: &[String],
    graph: &OntologyGraph,
    observed_accuracy: f64,
    config: BaselineConfig,
) -> Result<BaselineReport> {
    if config.trials == 0 {
        return Err(Error::Validation("trials must be at least 1".into()));
    }
    if graph.bp_population() == 0 {
        return Err(Error::Validation("ontology has no biological_process terms".into()));
    }
    let base = topo_hit_rate(base_predictions, truths, graph)?;
    for (i, t) in truths.iter().enumerate() {
        check_known(graph, t, i)?;
    }

    // Terms within the hit radius of each truth. A sampled term hits exactly
    // when it falls inside its set's ball.
    let balls: Vec<HashSet<&str>> = truths
        .iter()
        .map(|t| graph.within_hops(t, HIGHLY_RELEVANT_HOPS).map(|v| v.into_iter().collect()))
        .collect::<Result<_>>()?;

    let trial_accuracies: Vec<f64> = (0..config.trials)
        .into_par_iter()
        .map(|trial| -> Result<f64> {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(trial as u64));
            let mut hits = 0;
            for (set, ball) in balls.iter().enumerate() {
                let sampled = graph.sample_bp_terms_with(config.n_random, &mut rng)?;
                if base.hits[set] || sampled.iter().any(|s| ball.contains(s.as_str())) {
                    hits += 1;
                }
            }
            Ok(accuracy_of(hits, balls.len()))
        })
        .collect::<Result<_>>()?;

    let (t_statistic, p_value) = one_sample_t_test(observed_accuracy, &trial_accuracies);
    Ok(BaselineReport {
        mean: mean(&trial_accuracies),
        stdev: sample_stdev(&trial_accuracies),
        trial_accuracies,
        base_accuracy: base.accuracy,
        observed_accuracy,
        t_statistic,
        p_value,
        seed: config.seed,
        n_random: config.n_random,
        trials: config.trials,
    })
}
