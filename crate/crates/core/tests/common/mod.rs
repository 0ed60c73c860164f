//! Independent reference computations and fixtures shared by the integration tests.
#![allow(dead_code)]

use imovno::learners::ClassifierPool;
use imovno::{Classifier, Dataset};

/// Posterior by the textbook product of Gaussian densities, normalised at the end.
pub fn posterior_oracle(rows: &[Vec<f64>], labels: &[usize], n_classes: usize, x: &[f64]) -> Vec<f64> {
    let m = rows.len() as f64;
    let d = x.len();
    let mut max_var: f64 = 0.0;
    for j in 0..d {
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / m;
        let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / m;
        max_var = max_var.max(var);
    }
    let eps = (1e-9 * max_var).max(1e-12);
    let mut joint = vec![0.0; n_classes];
    for c in 0..n_classes {
        let members: Vec<&Vec<f64>> = rows.iter().zip(labels).filter(|(_, &l)| l == c).map(|(r, _)| r).collect();
        let k = members.len() as f64;
        let mut p = k / m;
        for j in 0..d {
            let mean = members.iter().map(|r| r[j]).sum::<f64>() / k;
            let var = members.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / k + eps;
            p *= (-(x[j] - mean).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
        }
        joint[c] = p;
    }
    let total: f64 = joint.iter().sum();
    joint.iter().map(|v| v / total).collect()
}

/// Per-class (precision, recall, f1) by direct counting, `None` when the class is
/// absent from the truth.
pub fn per_class_oracle(preds: &[usize], truth: &[usize], n_classes: usize) -> Vec<Option<(f64, f64, f64)>> {
    (0..n_classes)
        .map(|c| {
            let mut tp = 0.0;
            let mut fp = 0.0;
            let mut fneg = 0.0;
            for (&p, &t) in preds.iter().zip(truth) {
                match (p == c, t == c) {
                    (true, true) => tp += 1.0,
                    (true, false) => fp += 1.0,
                    (false, true) => fneg += 1.0,
                    _ => {}
                }
            }
            if tp + fneg == 0.0 {
                return None;
            }
            let precision = if tp + fp == 0.0 { 0.0 } else { tp / (tp + fp) };
            let recall = tp / (tp + fneg);
            let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
            Some((precision, recall, f1))
        })
        .collect()
}

pub fn macro_f1_oracle(preds: &[usize], truth: &[usize], n_classes: usize) -> f64 {
    let present: Vec<f64> = per_class_oracle(preds, truth, n_classes).into_iter().flatten().map(|s| s.2).collect();
    present.iter().sum::<f64>() / present.len() as f64
}

/// AUC by counting every positive/negative pair.
pub fn pairwise_auc(scores: &[f64], positive: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &pi) in positive.iter().enumerate() {
        for (j, &pj) in positive.iter().enumerate() {
            if pi && !pj {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

/// Gap mean, population std and z-scores of already sorted distances.
pub fn gap_stats(sorted: &[f64]) -> (Vec<f64>, f64, f64, Vec<f64>) {
    let gaps: Vec<f64> = (1..sorted.len()).map(|i| sorted[i] - sorted[i - 1]).collect();
    let n = gaps.len() as f64;
    let mean = gaps.iter().sum::<f64>() / n;
    let std = (gaps.iter().map(|g| (g - mean) * (g - mean)).sum::<f64>() / n).sqrt();
    let z = gaps.iter().map(|g| (g - mean) / std).collect();
    (gaps, mean, std, z)
}

/// Nearest own-class point no farther than the nearest other-class point, by brute force.
pub fn penalty_recheck(x: &[f64], own: &[&[f64]], others: &[&[f64]]) -> bool {
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    let own_min = own.iter().map(|p| dist(x, p)).fold(f64::INFINITY, f64::min);
    let other_min = others.iter().map(|p| dist(x, p)).fold(f64::INFINITY, f64::min);
    own_min <= other_min
}

/// Majority vote by counting, smallest label on ties.
pub fn vote_oracle(labels: &[usize], n_classes: usize) -> usize {
    let counts: Vec<usize> = (0..n_classes).map(|c| labels.iter().filter(|&&l| l == c).count()).collect();
    let top = *counts.iter().max().unwrap();
    counts.iter().position(|&n| n == top).unwrap()
}

/// Best macro F1 over every non-empty mask, with the mask that first reaches it.
pub fn exhaustive_best_mask(pool: &ClassifierPool, fit: &Dataset) -> (Vec<bool>, f64) {
    let m = pool.len();
    let preds: Vec<Vec<usize>> = pool.members().iter().map(|c| fit.rows().map(|x| c.predict(x)).collect()).collect();
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    for bits in 1u32..(1 << m) {
        let mask: Vec<bool> = (0..m).map(|i| bits >> i & 1 == 1).collect();
        let f = mask_fitness_oracle(&preds, &mask, fit.labels(), pool.n_classes());
        if f > best.1 {
            best = (mask, f);
        }
    }
    best
}

pub fn mask_fitness_oracle(preds: &[Vec<usize>], mask: &[bool], truth: &[usize], n_classes: usize) -> f64 {
    let voted: Vec<usize> = (0..truth.len())
        .map(|i| {
            let votes: Vec<usize> = preds.iter().zip(mask).filter(|(_, &on)| on).map(|(p, _)| p[i]).collect();
            vote_oracle(&votes, n_classes)
        })
        .collect();
    macro_f1_oracle(&voted, truth, n_classes)
}

/// Always predicts one label.
#[derive(Debug)]
pub struct Constant(pub usize);

impl Classifier for Constant {
    fn predict(&self, _: &[f64]) -> usize {
        self.0
    }

    fn name(&self) -> String {
        format!("constant({})", self.0)
    }
}

/// Perfect on a one-feature fixture whose class is `x >= cut`.
#[derive(Debug)]
pub struct Cut(pub f64);

impl Classifier for Cut {
    fn predict(&self, x: &[f64]) -> usize {
        usize::from(x[0] >= self.0)
    }

    fn name(&self) -> String {
        format!("cut({})", self.0)
    }
}

/// Deterministic pseudo-random numbers for fixtures (xorshift64*).
pub struct Lcg(u64);

impl Lcg {
    pub fn new(seed: u64) -> Self {
        Lcg(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) | 1)
    }

    pub fn next_f64(&mut self) -> f64 {
        self.0 ^= self.0 >> 12;
        self.0 ^= self.0 << 25;
        self.0 ^= self.0 >> 27;
        (self.0.wrapping_mul(0x2545_f491_4f6c_dd1d) >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn normal(&mut self) -> f64 {
        let u = self.next_f64().max(1e-300);
        let v = self.next_f64();
        (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
    }
}

/// Gaussian blobs: `counts[c]` points around `centers[c]` with unit-scaled `spread`.
pub fn blobs(counts: &[usize], centers: &[Vec<f64>], spread: f64, seed: u64) -> Dataset {
    let mut rng = Lcg::new(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (c, (&n, center)) in counts.iter().zip(centers).enumerate() {
        for _ in 0..n {
            rows.push(center.iter().map(|m| m + spread * rng.normal()).collect());
            labels.push(c);
        }
    }
    Dataset::new(rows, labels, (0..counts.len()).map(|c| format!("c{c}")).collect()).unwrap()
}

/// Two classes, IR 12, minority blob partly inside the majority blob.
pub fn imbalanced_overlap() -> Dataset {
    blobs(&[360, 30], &[vec![0.0, 0.0], vec![1.6, 1.6]], 1.0, 7)
}

/// Two far-apart clusters; everything is trivially separable.
pub fn separable() -> Dataset {
    blobs(&[40, 25], &[vec![0.0, 0.0], vec![50.0, 50.0]], 1.0, 3)
}

pub fn data_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}
