//! Balancing plan and penalty-constrained SMOTE oversampling.

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::exec;
use crate::geometry::{k_nearest, squared_distance};
use crate::seed::{self, StageRng};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalancePlan {
    pub base_counts: Vec<usize>,
    /// Synthetic samples each class needs to reach the largest class.
    pub k_remaining: Vec<usize>,
    pub max_class: usize,
}

pub fn balance_plan(class_base_counts: &[usize]) -> Result<BalancePlan> {
    if class_base_counts.len() < 2 {
        return Err(Error::TooFewClasses(class_base_counts.len()));
    }
    if let Some(c) = class_base_counts.iter().position(|&n| n == 0) {
        return Err(Error::EmptyClass(format!("#{c} (no core or non-overlapping samples left)")));
    }
    let max = *class_base_counts.iter().max().unwrap_or(&0);
    let max_class = class_base_counts.iter().position(|&n| n == max).unwrap_or(0);
    Ok(BalancePlan {
        base_counts: class_base_counts.to_vec(),
        k_remaining: class_base_counts.iter().map(|&n| max - n).collect(),
        max_class,
    })
}

fn nearest(x: &[f64], set: &[&[f64]]) -> f64 {
    set.iter().map(|p| squared_distance(x, p)).fold(f64::INFINITY, f64::min).sqrt()
}

/// Accepts a candidate when its nearest own-class point is no farther than its
/// nearest other-class point.
pub fn penalty_accept(x_prime: &[f64], own_class: &[&[f64]], other_classes: &[&[f64]]) -> Result<bool> {
    Ok(penalty_margin(x_prime, own_class, other_classes)? >= 0.0)
}

/// `min distance to other classes - min distance to own class`.
pub fn penalty_margin(x_prime: &[f64], own_class: &[&[f64]], other_classes: &[&[f64]]) -> Result<f64> {
    if own_class.is_empty() {
        return Err(Error::EmptyReferenceSet("own-class samples".into()));
    }
    if other_classes.is_empty() {
        return Err(Error::EmptyReferenceSet("other-class samples".into()));
    }
    Ok(nearest(x_prime, other_classes) - nearest(x_prime, own_class))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OmrpConfig {
    pub knn_k: usize,
    pub max_attempts_factor: usize,
}

impl Default for OmrpConfig {
    fn default() -> Self {
        OmrpConfig { knn_k: 5, max_attempts_factor: 50 }
    }
}

/// Where a synthetic sample came from: `x' = parent + alpha * (neighbor - parent)`,
/// with parent and neighbor as positions in the class sample set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub parent: usize,
    pub neighbor: usize,
    pub alpha: f64,
    /// False for shortfall filler taken from the best rejected candidates.
    pub accepted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticBatch {
    pub class_id: usize,
    pub samples: Vec<Vec<f64>>,
    pub provenance: Vec<Provenance>,
    pub attempts_used: usize,
    pub accepted_count: usize,
    /// needed - accepted
    pub shortfall: usize,
    pub warnings: Vec<String>,
}

struct Rejected {
    margin: f64,
    attempt: usize,
    x: Vec<f64>,
    prov: Provenance,
}

/// Generates `needed` synthetic samples for one class.
///
/// Parents are visited round-robin; each attempt interpolates towards a uniformly
/// chosen member of the parent's `knn_k` same-class neighbours with `alpha` in
/// `[0, 1)` and keeps the candidate only if [`penalty_accept`] holds. After
/// `max(factor * needed, 500)` attempts any remaining slots are filled with the
/// rejected candidates of largest margin and the shortfall is reported.
pub fn omrp(
    class_id: usize,
    class_data: &[&[f64]],
    others: &[&[f64]],
    needed: usize,
    config: &OmrpConfig,
    rng: &mut StageRng,
) -> Result<SyntheticBatch> {
    let mut batch = SyntheticBatch {
        class_id,
        samples: Vec::with_capacity(needed),
        provenance: Vec::with_capacity(needed),
        attempts_used: 0,
        accepted_count: 0,
        shortfall: 0,
        warnings: Vec::new(),
    };
    if needed == 0 {
        return Ok(batch);
    }
    if config.knn_k == 0 {
        return Err(Error::InvalidParameter("OMRP neighbour count must be at least 1".into()));
    }
    if class_data.is_empty() {
        return Err(Error::EmptyReferenceSet(format!("class #{class_id} has no samples to oversample")));
    }
    if others.is_empty() {
        return Err(Error::EmptyReferenceSet("other-class samples".into()));
    }
    if class_data.len() == 1 {
        let msg = format!("class #{class_id} has a single base sample; replicated it {needed} time(s)");
        warn!("{msg}");
        batch.warnings.push(msg);
        for _ in 0..needed {
            batch.samples.push(class_data[0].to_vec());
            batch.provenance.push(Provenance { parent: 0, neighbor: 0, alpha: 0.0, accepted: true });
        }
        batch.accepted_count = needed;
        return Ok(batch);
    }

    let neighbors: Vec<Vec<usize>> = (0..class_data.len())
        .map(|i| {
            k_nearest(
                class_data[i],
                class_data.iter().enumerate().map(|(j, p)| (j, *p)),
                config.knn_k,
                Some(i),
            )
        })
        .collect();

    let cap = (config.max_attempts_factor * needed).max(500);
    let mut rejected: Vec<Rejected> = Vec::new();
    let mut attempt = 0;
    while batch.accepted_count < needed && attempt < cap {
        let parent = attempt % class_data.len();
        let nbrs = &neighbors[parent];
        let neighbor = nbrs[rng.gen_range(0..nbrs.len())];
        let alpha: f64 = rng.gen();
        let (p, q) = (class_data[parent], class_data[neighbor]);
        let x: Vec<f64> = p.iter().zip(q).map(|(a, b)| a + alpha * (b - a)).collect();
        let margin = penalty_margin(&x, class_data, others)?;
        let prov = Provenance { parent, neighbor, alpha, accepted: margin >= 0.0 };
        if margin >= 0.0 {
            batch.samples.push(x);
            batch.provenance.push(prov);
            batch.accepted_count += 1;
        } else {
            rejected.push(Rejected { margin, attempt, x, prov });
        }
        attempt += 1;
    }
    batch.attempts_used = attempt;

    if batch.accepted_count < needed {
        batch.shortfall = needed - batch.accepted_count;
        rejected.sort_by(|a, b| b.margin.total_cmp(&a.margin).then(a.attempt.cmp(&b.attempt)));
        for r in rejected.into_iter().take(batch.shortfall) {
            batch.samples.push(r.x);
            batch.provenance.push(r.prov);
        }
        let msg = format!(
            "class #{class_id}: {} of {needed} candidates passed the penalty after {attempt} attempts; {} filled from best rejected",
            batch.accepted_count, batch.shortfall
        );
        warn!("{msg}");
        batch.warnings.push(msg);
    }
    Ok(batch)
}

/// Balanced training set plus per-row origin.
#[derive(Clone, Debug)]
pub struct Balanced {
    pub dataset: Dataset,
    /// Original index for base rows, `None` for synthetic rows.
    pub origin: Vec<Option<usize>>,
    pub plan: BalancePlan,
    pub batches: Vec<SyntheticBatch>,
    pub warnings: Vec<String>,
}

/// Oversamples every class of `base_sets` up to the largest one.
///
/// `base_sets[c]` lists the rows of `ds` retained for class `c` (core plus
/// non-overlapping). Output keeps base rows in ascending index order, followed by
/// each class's synthetic rows in class order. Classes draw from independent
/// streams derived from `seed` and the class id.
pub fn balanced_dataset(ds: &Dataset, base_sets: &[Vec<usize>], config: &OmrpConfig, seed: u64) -> Result<Balanced> {
    let counts: Vec<usize> = base_sets.iter().map(Vec::len).collect();
    let plan = balance_plan(&counts)?;

    let batches = exec::map_indices(base_sets.len(), |c| {
        let own: Vec<&[f64]> = base_sets[c].iter().map(|&i| ds.row(i)).collect();
        let others: Vec<&[f64]> = base_sets
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != c)
            .flat_map(|(_, s)| s.iter().map(|&i| ds.row(i)))
            .collect();
        let mut rng = seed::stream(seed, &[seed::STAGE_OMRP, c as u64]);
        omrp(c, &own, &others, plan.k_remaining[c], config, &mut rng)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut base: Vec<usize> = base_sets.iter().flatten().copied().collect();
    base.sort_unstable();
    let mut dataset = ds.subset(&base);
    let mut origin: Vec<Option<usize>> = base.iter().map(|&i| Some(i)).collect();
    let mut warnings = Vec::new();
    for b in &batches {
        dataset.extend(&b.samples, b.class_id);
        origin.extend(std::iter::repeat_n(None, b.samples.len()));
        warnings.extend(b.warnings.iter().cloned());
    }
    Ok(Balanced { dataset, origin, plan, batches, warnings })
}
