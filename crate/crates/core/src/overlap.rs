//! Overlap cleaning by big-jump detection on median-distance profiles.
//!
//! For every overlapping sample of a class, the median Euclidean distance to all core
//! and overlapping samples of the other classes is computed. Sorting these medians
//! and standardising the consecutive gaps exposes the first unusually large gap; the
//! samples beyond it sit well away from the other classes and are kept, the rest of
//! the overlapping region is dropped.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::exec;
use crate::geometry::{euclidean, median};
use crate::region::{Region, RegionAssignment};

/// Which side of the detected jump is kept.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeepMode {
    /// Samples past the jump, farthest from the other classes.
    #[default]
    After,
    /// Samples up to and including the jump position.
    Before,
}

impl std::str::FromStr for KeepMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "after" => Ok(KeepMode::After),
            "before" => Ok(KeepMode::Before),
            other => Err(format!("unknown keep mode `{other}` (expected after or before)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SorConfig {
    pub z_threshold: f64,
    pub fallback_fraction: f64,
    pub keep_mode: KeepMode,
}

impl Default for SorConfig {
    fn default() -> Self {
        SorConfig { z_threshold: 2.0, fallback_fraction: 0.30, keep_mode: KeepMode::After }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapProfile {
    pub class_id: usize,
    /// Overlapping samples of the class, ascending by median distance then index.
    pub ordered_samples: Vec<usize>,
    pub distances: Vec<f64>,
    pub gaps: Vec<f64>,
    pub gap_mean: f64,
    /// Population standard deviation of the gaps.
    pub gap_std: f64,
    pub z_scores: Vec<f64>,
    /// First gap whose z-score reaches the threshold.
    pub jump_index: Option<usize>,
}

impl GapProfile {
    /// Builds a profile from unsorted (sample, median distance) pairs.
    pub fn from_distances(class_id: usize, samples: &[usize], distances: &[f64], z_threshold: f64) -> Self {
        let mut pairs: Vec<(f64, usize)> = distances.iter().copied().zip(samples.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let ordered_samples: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let distances: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let gaps: Vec<f64> = distances.windows(2).map(|w| w[1] - w[0]).collect();

        let (gap_mean, gap_std) = if gaps.is_empty() {
            (0.0, 0.0)
        } else {
            let n = gaps.len() as f64;
            let mean = gaps.iter().sum::<f64>() / n;
            let var = gaps.iter().map(|g| (g - mean) * (g - mean)).sum::<f64>() / n;
            (mean, var.sqrt())
        };
        // Gaps that differ only by rounding count as identical.
        let degenerate = gap_std <= 1e-12 * gap_mean.abs();
        let z_scores: Vec<f64> = if degenerate {
            vec![0.0; gaps.len()]
        } else {
            gaps.iter().map(|g| (g - gap_mean) / gap_std).collect()
        };
        let jump_index = if degenerate { None } else { z_scores.iter().position(|&z| z >= z_threshold) };

        GapProfile { class_id, ordered_samples, distances, gaps, gap_mean, gap_std, z_scores, jump_index }
    }
}

pub fn gap_profile(ds: &Dataset, assignment: &RegionAssignment, class_id: usize, z_threshold: f64) -> Result<GapProfile> {
    if assignment.tags.len() != ds.n_samples() {
        return Err(Error::DimensionMismatch { expected: ds.n_samples(), found: assignment.tags.len() });
    }
    let overlap = assignment.class_indices(Region::Overlapping, class_id);
    if overlap.is_empty() {
        return Err(Error::EmptyReferenceSet(format!("class #{class_id} has no overlapping samples")));
    }
    let references: Vec<usize> = (0..ds.n_samples())
        .filter(|&i| ds.label(i) != class_id && matches!(assignment.tags[i], Region::Core | Region::Overlapping))
        .collect();
    if references.is_empty() {
        return Err(Error::EmptyReferenceSet(format!("no core or overlapping samples outside class #{class_id}")));
    }
    let medians = exec::map_slice(&overlap, |&i| {
        let x = ds.row(i);
        let mut d: Vec<f64> = references.iter().map(|&r| euclidean(x, ds.row(r))).collect();
        median(&mut d)
    });
    Ok(GapProfile::from_distances(class_id, &overlap, &medians, z_threshold))
}

/// Samples of the profile judged non-overlapping, ascending by index.
///
/// Without a jump the farthest `max(1, floor(fraction * n))` samples are kept.
pub fn select_non_overlapping(profile: &GapProfile, fallback_fraction: f64, keep_mode: KeepMode) -> Result<Vec<usize>> {
    if !(fallback_fraction > 0.0 && fallback_fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!("fallback fraction {fallback_fraction} outside (0, 1]")));
    }
    let n = profile.ordered_samples.len();
    let mut chosen: Vec<usize> = match (profile.jump_index, keep_mode) {
        (Some(j), KeepMode::After) => profile.ordered_samples[j + 1..].to_vec(),
        (Some(j), KeepMode::Before) => profile.ordered_samples[..=j].to_vec(),
        (None, _) => {
            if n == 0 {
                return Ok(Vec::new());
            }
            let q = ((fallback_fraction * n as f64 + 1e-9).floor() as usize).clamp(1, n);
            profile.ordered_samples[n - q..].to_vec()
        }
    };
    chosen.sort_unstable();
    Ok(chosen)
}

/// Per-class non-overlapping sets; classes without overlapping samples get an empty set.
pub fn sor_all(ds: &Dataset, assignment: &RegionAssignment, config: &SorConfig) -> Result<Vec<Vec<usize>>> {
    exec::map_indices(ds.n_classes(), |c| {
        if assignment.class_indices(Region::Overlapping, c).is_empty() {
            return Ok(Vec::new());
        }
        let profile = gap_profile(ds, assignment, c, config.z_threshold)?;
        select_non_overlapping(&profile, config.fallback_fraction, config.keep_mode)
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked() -> GapProfile {
        let d = [1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7, 1.8, 6.8];
        let samples: Vec<usize> = (100..110).collect();
        GapProfile::from_distances(0, &samples, &d, 2.0)
    }

    #[test]
    fn worked_profile_jumps_at_last_gap() {
        let p = worked();
        assert_eq!(p.gaps.len(), 9);
        assert_eq!(p.jump_index, Some(8));
        assert!(p.z_scores[..8].iter().all(|&z| z < 2.0));
        assert_eq!(select_non_overlapping(&p, 0.3, KeepMode::After).unwrap(), vec![109]);
        assert_eq!(select_non_overlapping(&p, 0.3, KeepMode::Before).unwrap(), (100..109).collect::<Vec<_>>());
    }

    #[test]
    fn single_sample_profile() {
        let p = GapProfile::from_distances(0, &[4], &[2.5], 2.0);
        assert!(p.gaps.is_empty());
        assert_eq!(p.jump_index, None);
        assert_eq!(select_non_overlapping(&p, 0.3, KeepMode::After).unwrap(), vec![4]);
    }

    #[test]
    fn equal_gaps_have_no_jump() {
        let p = GapProfile::from_distances(0, &[0, 1, 2, 3, 4, 5], &[1.0, 1.1, 1.2, 1.3, 1.4, 1.5], 2.0);
        assert_eq!(p.jump_index, None);
        assert!(p.z_scores.iter().all(|&z| z == 0.0));
    }

    #[test]
    fn fallback_fraction_counts() {
        let p = GapProfile::from_distances(0, &[0, 1, 2, 3, 4, 5, 6], &[1.0; 7], 2.0);
        assert_eq!(select_non_overlapping(&p, 0.3, KeepMode::After).unwrap(), vec![5, 6]);
        let two = GapProfile::from_distances(0, &[8, 9], &[1.0, 2.0], 2.0);
        assert_eq!(select_non_overlapping(&two, 0.1, KeepMode::After).unwrap(), vec![9]);
        assert!(select_non_overlapping(&two, 0.0, KeepMode::After).is_err());
    }

    #[test]
    fn ties_sorted_by_sample_index() {
        let p = GapProfile::from_distances(0, &[7, 3, 5], &[2.0, 2.0, 1.0], 2.0);
        assert_eq!(p.ordered_samples, vec![5, 3, 7]);
    }
}
