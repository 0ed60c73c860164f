//! Jaya search over classifier selection masks.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::exec;
use crate::learners::{check_mask, vote_from_predictions, ClassifierPool};
use crate::metrics::classification_metrics;
use crate::seed::StageRng;

/// Continuous candidate in `[0, 1]^m`, one coordinate per pool member.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Genome {
    pub values: Vec<f64>,
    pub fitness: Option<f64>,
}

impl Genome {
    pub fn new(values: Vec<f64>) -> Self {
        Genome { values, fitness: None }
    }

    pub fn random(len: usize, rng: &mut StageRng) -> Self {
        Genome::new((0..len).map(|_| rng.gen::<f64>()).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JayaParams {
    pub population: usize,
    pub iterations: usize,
}

impl Default for JayaParams {
    fn default() -> Self {
        JayaParams { population: 20, iterations: 50 }
    }
}

/// Values strictly above 0.5 select their member. An empty selection is repaired by
/// selecting the largest value (first on ties).
pub fn digitize(values: &[f64]) -> Vec<bool> {
    let mut mask: Vec<bool> = values.iter().map(|&v| v > 0.5).collect();
    if !mask.iter().any(|&b| b) && !mask.is_empty() {
        let mut best = 0;
        for (i, &v) in values.iter().enumerate() {
            if v > values[best] {
                best = i;
            }
        }
        mask[best] = true;
    }
    mask
}

/// `v + r1 * |best - v| - r2 * |worst - v|` per position with explicit `(r1, r2)`,
/// clipped to `[0, 1]`.
pub fn jaya_step(values: &[f64], best: &[f64], worst: &[f64], r: &[(f64, f64)]) -> Vec<f64> {
    values
        .iter()
        .zip(best)
        .zip(worst)
        .zip(r)
        .map(|(((&v, &b), &w), &(r1, r2))| (v + r1 * (b - v).abs() - r2 * (w - v).abs()).clamp(0.0, 1.0))
        .collect()
}

/// Jaya move with fresh `r1, r2` in `[0, 1)` for every position.
pub fn jaya_update(genome: &Genome, best: &Genome, worst: &Genome, rng: &mut StageRng) -> Genome {
    let r: Vec<(f64, f64)> = (0..genome.values.len()).map(|_| (rng.gen(), rng.gen())).collect();
    Genome::new(jaya_step(&genome.values, &best.values, &worst.values, &r))
}

/// Macro F1 of the masked majority vote over precomputed `preds[member][sample]`.
pub fn mask_fitness(preds: &[Vec<usize>], mask: &[bool], truth: &[usize], n_classes: usize) -> f64 {
    let voted: Vec<usize> = (0..truth.len()).map(|i| vote_from_predictions(preds, mask, n_classes, i)).collect();
    classification_metrics(&voted, truth, n_classes).map_or(0.0, |m| m.f_score)
}

#[derive(Clone, Debug)]
pub struct PrunedEnsemble<'a> {
    pub pool: &'a ClassifierPool,
    pub mask: Vec<bool>,
    pub fitness: f64,
    pub generations: usize,
    pub selected_count: usize,
    /// Best fitness in the population after each generation.
    pub history: Vec<f64>,
    pub initial_best: f64,
}

impl PrunedEnsemble<'_> {
    pub fn predict(&self, x: &[f64]) -> usize {
        crate::learners::majority_vote(self.pool, &self.mask, x).expect("pruned mask is never empty")
    }
}

fn argbest(pop: &[Genome], better: impl Fn(f64, f64) -> bool) -> usize {
    let mut best = 0;
    for (i, g) in pop.iter().enumerate() {
        if better(g.fitness.unwrap_or(0.0), pop[best].fitness.unwrap_or(0.0)) {
            best = i;
        }
    }
    best
}

/// Runs `params.iterations` generations of Jaya with greedy acceptance and returns
/// the best genome's mask. Fitness is the macro F1 of the masked vote on `fit`.
pub fn prune<'a>(pool: &'a ClassifierPool, fit: &Dataset, params: &JayaParams, rng: &mut StageRng) -> Result<PrunedEnsemble<'a>> {
    if params.population < 2 {
        return Err(Error::InvalidParameter("Jaya population must be at least 2".into()));
    }
    if params.iterations < 1 {
        return Err(Error::InvalidParameter("Jaya needs at least one iteration".into()));
    }
    if fit.is_empty() {
        return Err(Error::InvalidData("no fitness samples for pruning".into()));
    }
    if pool.is_empty() {
        return Err(Error::InvalidParameter("classifier pool is empty".into()));
    }
    if fit.n_features() != pool.n_features() {
        return Err(Error::DimensionMismatch { expected: pool.n_features(), found: fit.n_features() });
    }
    let preds = pool.predictions(fit);
    let n_classes = pool.n_classes();
    let evaluate = |pop: &mut Vec<Genome>| {
        let scores = exec::map_slice(pop, |g| mask_fitness(&preds, &digitize(&g.values), fit.labels(), n_classes));
        for (g, f) in pop.iter_mut().zip(scores) {
            g.fitness = Some(f);
        }
    };

    let m = pool.len();
    let mut pop: Vec<Genome> = (0..params.population).map(|_| Genome::random(m, rng)).collect();
    evaluate(&mut pop);
    let initial_best = pop[argbest(&pop, |a, b| a > b)].fitness.unwrap_or(0.0);

    let mut history = Vec::with_capacity(params.iterations);
    for _ in 0..params.iterations {
        let best = pop[argbest(&pop, |a, b| a > b)].clone();
        let worst = pop[argbest(&pop, |a, b| a < b)].clone();
        let mut candidates: Vec<Genome> = pop.iter().map(|g| jaya_update(g, &best, &worst, rng)).collect();
        evaluate(&mut candidates);
        for (g, c) in pop.iter_mut().zip(candidates) {
            if c.fitness > g.fitness {
                *g = c;
            }
        }
        history.push(pop[argbest(&pop, |a, b| a > b)].fitness.unwrap_or(0.0));
    }

    let best = &pop[argbest(&pop, |a, b| a > b)];
    let mask = digitize(&best.values);
    check_mask(m, &mask)?;
    Ok(PrunedEnsemble {
        pool,
        selected_count: mask.iter().filter(|&&b| b).count(),
        fitness: best.fitness.unwrap_or(0.0),
        mask,
        generations: params.iterations,
        history,
        initial_best,
    })
}
