//! Classification measures, one-vs-rest AUC and neighbourhood overlap ratios.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::exec;
use crate::geometry::k_nearest;

/// Rows are true classes, columns predicted classes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    n_classes: usize,
    counts: Vec<usize>,
}

impl ConfusionMatrix {
    pub fn new(truth: &[usize], preds: &[usize], n_classes: usize) -> Result<Self> {
        if truth.len() != preds.len() {
            return Err(Error::DimensionMismatch { expected: truth.len(), found: preds.len() });
        }
        let mut counts = vec![0; n_classes * n_classes];
        for (&t, &p) in truth.iter().zip(preds) {
            if t >= n_classes || p >= n_classes {
                return Err(Error::InvalidData(format!("label {} outside 0..{n_classes}", t.max(p))));
            }
            counts[t * n_classes + p] += 1;
        }
        Ok(ConfusionMatrix { n_classes, counts })
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn get(&self, truth: usize, pred: usize) -> usize {
        self.counts[truth * self.n_classes + pred]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn row_total(&self, c: usize) -> usize {
        (0..self.n_classes).map(|p| self.get(c, p)).sum()
    }

    pub fn col_total(&self, c: usize) -> usize {
        (0..self.n_classes).map(|t| self.get(t, c)).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub g_mean: f64,
    /// `None` for classes absent from the truth vector.
    pub per_class: Vec<Option<ClassScores>>,
    pub warnings: Vec<String>,
}

/// Macro-averaged one-vs-rest precision, recall and F1, accuracy and G-mean.
///
/// Classes that never occur in `truth` are left out of every average.
pub fn classification_metrics(preds: &[usize], truth: &[usize], n_classes: usize) -> Result<ClassificationMetrics> {
    if truth.is_empty() {
        return Err(Error::InvalidData("no samples to evaluate".into()));
    }
    let cm = ConfusionMatrix::new(truth, preds, n_classes)?;
    let mut warnings = Vec::new();
    let mut per_class = Vec::with_capacity(n_classes);
    for c in 0..n_classes {
        let support = cm.row_total(c);
        if support == 0 {
            let msg = format!("class #{c} absent from evaluation labels; excluded from macro averages");
            warn!("{msg}");
            warnings.push(msg);
            per_class.push(None);
            continue;
        }
        let tp = cm.get(c, c) as f64;
        let predicted = cm.col_total(c);
        let precision = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
        let recall = tp / support as f64;
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        per_class.push(Some(ClassScores { precision, recall, f1 }));
    }
    let present: Vec<&ClassScores> = per_class.iter().flatten().collect();
    let n = present.len() as f64;
    let mean = |f: fn(&ClassScores) -> f64| present.iter().map(|s| f(s)).sum::<f64>() / n;
    let g_mean = present.iter().map(|s| s.recall).product::<f64>().powf(1.0 / n);
    let correct: usize = (0..n_classes).map(|c| cm.get(c, c)).sum();
    Ok(ClassificationMetrics {
        accuracy: correct as f64 / cm.total() as f64,
        precision: mean(|s| s.precision),
        recall: mean(|s| s.recall),
        f_score: mean(|s| s.f1),
        g_mean,
        per_class,
        warnings,
    })
}

/// Ranking AUC of `scores` for `positive`-vs-rest; ties count one half.
/// `None` when either side is empty.
pub fn ovr_auc(scores: &[f64], truth: &[usize], positive: usize) -> Option<f64> {
    let n_pos = truth.iter().filter(|&&t| t == positive).count();
    let n_neg = truth.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // midranks over tied blocks
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum_pos += midrank * order[i..=j].iter().filter(|&&k| truth[k] == positive).count() as f64;
        i = j + 1;
    }
    let (p, q) = (n_pos as f64, n_neg as f64);
    Some((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * q))
}

/// Unweighted mean of per-class one-vs-rest AUCs; `scores[i][c]` is the score of
/// sample `i` for class `c`. Classes absent from `truth` are skipped.
pub fn macro_ovr_auc(scores: &[Vec<f64>], truth: &[usize]) -> Result<f64> {
    if scores.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), found: scores.len() });
    }
    let n_classes = scores.first().map_or(0, Vec::len);
    if scores.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("non-finite score".into()));
    }
    let mut aucs = Vec::new();
    for c in 0..n_classes {
        let col: Vec<f64> = scores.iter().map(|r| r[c]).collect();
        match ovr_auc(&col, truth, c) {
            Some(a) => aucs.push(a),
            None => warn!("class #{c} has no positives or no negatives; skipped in AUC"),
        }
    }
    if aucs.is_empty() {
        return Err(Error::InvalidData("AUC undefined: fewer than two classes in truth".into()));
    }
    Ok(aucs.iter().sum::<f64>() / aucs.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapRatios {
    pub knn_k: usize,
    /// Fraction of each class flagged as overlapping.
    pub per_class: Vec<f64>,
    /// Symmetric pairwise ratios, zero diagonal.
    pub pairwise: Vec<Vec<f64>>,
    /// Mean of `per_class`.
    pub dataset: f64,
    #[serde(skip)]
    pub flagged: Vec<bool>,
}

/// A sample is flagged when at least `ceil(k / 2)` of its `k` nearest neighbours
/// carry another label. A flagged sample of class `i` counts towards pair `(i, j)`
/// where `j` is the most frequent foreign label among its neighbours.
pub fn overlap_ratios(ds: &Dataset, knn_k: usize) -> Result<OverlapRatios> {
    if knn_k == 0 {
        return Err(Error::InvalidParameter("overlap neighbour count must be at least 1".into()));
    }
    if ds.n_samples() < knn_k + 1 {
        return Err(Error::InvalidData(format!("{} samples cannot supply {knn_k} neighbours each", ds.n_samples())));
    }
    let n = ds.n_classes();
    let counts = ds.class_counts();
    if let Some(c) = counts.iter().position(|&k| k == 0) {
        return Err(Error::EmptyClass(ds.class_names()[c].clone()));
    }
    let need = knn_k.div_ceil(2);
    let per_sample: Vec<Option<usize>> = exec::map_indices(ds.n_samples(), |i| {
        let own = ds.label(i);
        let nn = k_nearest(ds.row(i), ds.rows().enumerate(), knn_k, Some(i));
        let mut foreign = vec![0; n];
        for j in nn {
            if ds.label(j) != own {
                foreign[ds.label(j)] += 1;
            }
        }
        if foreign.iter().sum::<usize>() < need {
            return None;
        }
        let mut best = 0;
        for (c, &v) in foreign.iter().enumerate() {
            if v > foreign[best] {
                best = c;
            }
        }
        Some(best)
    });

    let mut flagged_count = vec![0usize; n];
    let mut into = vec![vec![0usize; n]; n];
    for (i, target) in per_sample.iter().enumerate() {
        if let Some(j) = *target {
            flagged_count[ds.label(i)] += 1;
            into[ds.label(i)][j] += 1;
        }
    }
    let per_class: Vec<f64> = (0..n).map(|c| flagged_count[c] as f64 / counts[c] as f64).collect();
    let mut pairwise = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                pairwise[i][j] = 0.5 * (into[i][j] as f64 / counts[i] as f64 + into[j][i] as f64 / counts[j] as f64);
            }
        }
    }
    let dataset = per_class.iter().sum::<f64>() / n as f64;
    Ok(OverlapRatios { knn_k, per_class, pairwise, dataset, flagged: per_sample.iter().map(Option::is_some).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let m = classification_metrics(&[0, 1, 2, 1], &[0, 1, 2, 1], 3).unwrap();
        assert_eq!((m.accuracy, m.precision, m.recall, m.f_score, m.g_mean), (1.0, 1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn hand_case() {
        let m = classification_metrics(&[0, 0, 1, 0, 2, 2], &[0, 0, 1, 1, 2, 2], 3).unwrap();
        let recalls: Vec<f64> = m.per_class.iter().map(|s| s.as_ref().unwrap().recall).collect();
        assert_eq!(recalls, vec![1.0, 0.5, 1.0]);
        assert!((m.g_mean - 0.5f64.powf(1.0 / 3.0)).abs() < 1e-12);
        assert!((m.g_mean - 0.7937).abs() < 1e-4);
        assert!((m.recall - 2.5 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn two_class_gmean() {
        // recalls 1.0 and 0.25
        let m = classification_metrics(&[0, 0, 0, 0, 1, 0, 0, 0], &[0, 0, 0, 0, 1, 1, 1, 1], 2).unwrap();
        assert!((m.g_mean - 0.5).abs() < 1e-12);
    }

    #[test]
    fn absent_class_excluded() {
        let m = classification_metrics(&[0, 1, 2], &[0, 1, 1], 3).unwrap();
        assert!(m.per_class[2].is_none());
        assert_eq!(m.warnings.len(), 1);
        // class 1: tp 1, predicted 1, support 2
        assert!((m.recall - 0.75).abs() < 1e-12);
    }

    #[test]
    fn zero_predicted_positives_gives_zero_precision() {
        let m = classification_metrics(&[0, 0], &[0, 1], 2).unwrap();
        assert_eq!(m.per_class[1].as_ref().unwrap().precision, 0.0);
        assert_eq!(m.g_mean, 0.0);
    }

    #[test]
    fn length_mismatch() {
        assert!(classification_metrics(&[0], &[0, 1], 2).is_err());
    }

    #[test]
    fn auc_cases() {
        assert_eq!(ovr_auc(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1], 1), Some(1.0));
        assert_eq!(ovr_auc(&[0.5; 4], &[0, 0, 1, 1], 1), Some(0.5));
        // positives at 0.3 and 0.9, negatives at 0.1 and 0.4: one inversion of four pairs
        assert_eq!(ovr_auc(&[0.1, 0.3, 0.4, 0.9], &[0, 1, 0, 1], 1), Some(0.75));
        assert_eq!(ovr_auc(&[0.1, 0.3], &[0, 0], 1), None);
    }

    #[test]
    fn macro_auc_over_identical_scores() {
        let s = vec![vec![0.5, 0.5]; 4];
        assert_eq!(macro_ovr_auc(&s, &[0, 1, 0, 1]).unwrap(), 0.5);
    }

    #[test]
    fn separated_classes_have_no_overlap() {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..10 {
            rows.push(vec![i as f64 * 0.01]);
            labels.push(0);
            rows.push(vec![100.0 + i as f64 * 0.01]);
            labels.push(1);
        }
        let ds = Dataset::new(rows, labels, vec!["a".into(), "b".into()]).unwrap();
        let or = overlap_ratios(&ds, 5).unwrap();
        assert_eq!(or.dataset, 0.0);
        assert_eq!(or.pairwise, vec![vec![0.0; 2]; 2]);
    }

    #[test]
    fn too_small_for_k() {
        let ds = Dataset::new(vec![vec![0.0], vec![1.0], vec![2.0]], vec![0, 1, 1], vec!["a".into(), "b".into()]).unwrap();
        assert!(overlap_ratios(&ds, 5).is_err());
        assert!(overlap_ratios(&ds, 2).is_ok());
    }
}
