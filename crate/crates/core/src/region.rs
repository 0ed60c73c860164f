//! Class thresholds and the core / overlapping / noisy partition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::posterior::PosteriorMatrix;

/// How the per-class threshold combines the mean and maximum own-class posterior.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// `(mean + max) / 2`
    #[default]
    MeanMax,
    /// mean own-class posterior only
    Mean,
}

impl std::str::FromStr for ThresholdMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "mean_max" | "mean-max" => Ok(ThresholdMode::MeanMax),
            "mean" => Ok(ThresholdMode::Mean),
            other => Err(format!("unknown threshold mode `{other}` (expected mean_max or mean)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassThreshold {
    pub mean_own: f64,
    pub max_own: f64,
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassThresholds {
    pub mode: ThresholdMode,
    pub classes: Vec<ClassThreshold>,
}

impl ClassThresholds {
    pub fn threshold(&self, class: usize) -> f64 {
        self.classes[class].threshold
    }
}

pub fn class_thresholds(p: &PosteriorMatrix, labels: &[usize], mode: ThresholdMode) -> Result<ClassThresholds> {
    let n = p.n_classes();
    let mut sum = vec![0.0; n];
    let mut max = vec![f64::NEG_INFINITY; n];
    let mut count = vec![0usize; n];
    for (i, &l) in labels.iter().enumerate() {
        let v = p.get(i, l);
        sum[l] += v;
        max[l] = max[l].max(v);
        count[l] += 1;
    }
    let classes = (0..n)
        .map(|c| {
            if count[c] == 0 {
                return Err(Error::EmptyClass(format!("#{c}")));
            }
            // rounding can push the mean of equal values past their maximum
            let mean_own = (sum[c] / count[c] as f64).min(max[c]);
            let max_own = max[c];
            let threshold = match mode {
                ThresholdMode::MeanMax => 0.5 * (mean_own + max_own),
                ThresholdMode::Mean => mean_own,
            };
            Ok(ClassThreshold { mean_own, max_own, threshold })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ClassThresholds { mode, classes })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Core,
    Overlapping,
    Noisy,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::Core => "core",
            Region::Overlapping => "overlapping",
            Region::Noisy => "noisy",
        }
    }
}

/// Region tag per sample.
///
/// `confidence[i]` is the sample's posterior for its own label and ranks noisy
/// samples for partial removal.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionAssignment {
    pub tags: Vec<Region>,
    pub confidence: Vec<f64>,
    pub labels: Vec<usize>,
    pub thresholds: ClassThresholds,
}

impl RegionAssignment {
    pub fn n_classes(&self) -> usize {
        self.thresholds.classes.len()
    }

    pub fn indices(&self, region: Region) -> Vec<usize> {
        (0..self.tags.len()).filter(|&i| self.tags[i] == region).collect()
    }

    pub fn class_indices(&self, region: Region, class: usize) -> Vec<usize> {
        (0..self.tags.len())
            .filter(|&i| self.tags[i] == region && self.labels[i] == class)
            .collect()
    }

    pub fn count(&self, region: Region) -> usize {
        self.tags.iter().filter(|&&t| t == region).count()
    }
}

/// Core if the own posterior reaches the own threshold (inclusive); overlapping if
/// some other class's posterior strictly exceeds that class's threshold; noisy otherwise.
pub fn partition(p: &PosteriorMatrix, t: &ClassThresholds, labels: &[usize]) -> Result<RegionAssignment> {
    if p.n_samples() != labels.len() {
        return Err(Error::DimensionMismatch { expected: p.n_samples(), found: labels.len() });
    }
    if p.n_classes() != t.classes.len() {
        return Err(Error::DimensionMismatch { expected: p.n_classes(), found: t.classes.len() });
    }
    let mut tags = Vec::with_capacity(labels.len());
    let mut confidence = Vec::with_capacity(labels.len());
    for (i, &j) in labels.iter().enumerate() {
        let row = p.row(i);
        let tag = if row[j] >= t.threshold(j) {
            Region::Core
        } else if (0..row.len()).any(|k| k != j && row[k] > t.threshold(k)) {
            Region::Overlapping
        } else {
            Region::Noisy
        };
        tags.push(tag);
        confidence.push(row[j]);
    }
    Ok(RegionAssignment { tags, confidence, labels: labels.to_vec(), thresholds: t.clone() })
}

/// The `floor(fraction * |noisy|)` least confident noisy samples, ties by index.
pub fn noise_subset(assignment: &RegionAssignment, remove_fraction: f64) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&remove_fraction) {
        return Err(Error::InvalidParameter(format!("noise fraction {remove_fraction} outside [0, 1]")));
    }
    let mut noisy = assignment.indices(Region::Noisy);
    let take = (remove_fraction * noisy.len() as f64 + 1e-9).floor() as usize;
    noisy.sort_by(|&a, &b| assignment.confidence[a].total_cmp(&assignment.confidence[b]).then(a.cmp(&b)));
    noisy.truncate(take.min(noisy.len()));
    noisy.sort_unstable();
    Ok(noisy)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn thresholds(own: &[f64]) -> ClassThreshold {
        let p = PosteriorMatrix::from_rows(own.iter().map(|&v| vec![v]).collect());
        class_thresholds(&p, &vec![0; own.len()], ThresholdMode::MeanMax).unwrap().classes[0].clone()
    }

    #[test]
    fn mean_max_threshold() {
        // class 1 has no samples here, so build the two-class case by hand
        let p = PosteriorMatrix::from_rows(vec![vec![0.9, 0.1], vec![0.7, 0.3], vec![0.5, 0.5], vec![0.2, 0.8]]);
        let t = class_thresholds(&p, &[0, 0, 0, 1], ThresholdMode::MeanMax).unwrap();
        assert!((t.classes[0].mean_own - 0.7).abs() < 1e-12);
        assert_eq!(t.classes[0].max_own, 0.9);
        assert!((t.threshold(0) - 0.8).abs() < 1e-12);
        let mean_only = class_thresholds(&p, &[0, 0, 0, 1], ThresholdMode::Mean).unwrap();
        assert!((mean_only.threshold(0) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn degenerate_thresholds() {
        let p = PosteriorMatrix::from_rows(vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.4, 0.6]]);
        let t = class_thresholds(&p, &[0, 0, 1], ThresholdMode::MeanMax).unwrap();
        assert_eq!(t.threshold(0), 1.0);
        assert_eq!(t.threshold(1), 0.6);
    }

    #[test]
    fn empty_class_rejected() {
        let p = PosteriorMatrix::from_rows(vec![vec![1.0, 0.0]]);
        assert!(class_thresholds(&p, &[0], ThresholdMode::MeanMax).is_err());
    }

    #[test]
    fn boundary_sample_is_core() {
        let p = PosteriorMatrix::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let t = class_thresholds(&p, &[0, 1], ThresholdMode::MeanMax).unwrap();
        let a = partition(&p, &t, &[0, 1]).unwrap();
        assert_eq!(a.tags, vec![Region::Core, Region::Core]);
    }

    #[test]
    fn overlapping_and_noisy_cases() {
        let t = ClassThresholds {
            mode: ThresholdMode::MeanMax,
            classes: vec![
                ClassThreshold { mean_own: 0.6, max_own: 1.0, threshold: 0.8 },
                ClassThreshold { mean_own: 0.5, max_own: 0.9, threshold: 0.7 },
                ClassThreshold { mean_own: 0.5, max_own: 0.9, threshold: 0.7 },
            ],
        };
        let p = PosteriorMatrix::from_rows(vec![
            vec![0.85, 0.10, 0.05], // core
            vec![0.20, 0.75, 0.05], // own 0.2 < 0.8, class 1 0.75 > 0.7
            vec![0.50, 0.30, 0.20], // nothing passes
            vec![0.25, 0.05, 0.70], // equal to class 2 threshold is not enough
        ]);
        let a = partition(&p, &t, &[0, 0, 0, 0]).unwrap();
        assert_eq!(a.tags, vec![Region::Core, Region::Overlapping, Region::Noisy, Region::Noisy]);
    }

    #[test]
    fn noise_subset_ranking() {
        let t = ClassThresholds {
            mode: ThresholdMode::MeanMax,
            classes: vec![ClassThreshold { mean_own: 1.0, max_own: 1.0, threshold: 1.0 }],
        };
        let a = RegionAssignment {
            tags: vec![Region::Noisy, Region::Core, Region::Noisy, Region::Noisy, Region::Noisy],
            confidence: vec![0.1, 0.9, 0.4, 0.2, 0.3],
            labels: vec![0; 5],
            thresholds: t,
        };
        assert!(noise_subset(&a, 0.0).unwrap().is_empty());
        assert_eq!(noise_subset(&a, 1.0).unwrap(), vec![0, 2, 3, 4]);
        assert_eq!(noise_subset(&a, 0.5).unwrap(), vec![0, 3]);
        assert!(noise_subset(&a, 1.5).is_err());
    }

    #[test]
    fn single_sample_threshold_equals_posterior() {
        let t = thresholds(&[0.37]);
        assert_eq!(t.threshold, 0.37);
    }
}
