//! Cross-validated pipeline runs, ablations and report output.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::warn;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::{imbalance_ratio, load_csv, stratified_folds, Dataset, FoldPlan, LabelColumn, MinMaxScaler};
use crate::error::{Error, Result};
use crate::exec;
use crate::learners::{train_pool, vote_counts, ClassifierPool, LearnerSpec};
use crate::metrics::{classification_metrics, macro_ovr_auc, overlap_ratios, OverlapRatios};
use crate::overlap::{sor_all, SorConfig};
use crate::posterior::{fit_nb, posteriors, NbModel};
use crate::pruning::{prune, JayaParams};
use crate::region::{class_thresholds, noise_subset, partition, Region, RegionAssignment, ThresholdMode};
use crate::resample::{balanced_dataset, OmrpConfig};
use crate::seed;

/// Every tunable of a run. Missing fields take their defaults when deserialised.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub label_column: LabelColumn,
    pub seed: u64,
    pub folds: usize,
    pub repeats: usize,
    pub scale: bool,
    pub threshold_mode: ThresholdMode,
    pub noise_remove_fraction: f64,
    pub sor: SorConfig,
    pub omrp: OmrpConfig,
    pub jaya: JayaParams,
    pub pool: Vec<LearnerSpec>,
    pub use_balancing: bool,
    pub use_pruning: bool,
    /// Share of the balanced training fold held out for pruning fitness.
    pub fitness_fraction: f64,
    /// Neighbourhood size of the overlap-ratio measure.
    pub overlap_k: usize,
    pub record_timings: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: None,
            label_column: LabelColumn::default(),
            seed: 42,
            folds: 5,
            repeats: 10,
            scale: false,
            threshold_mode: ThresholdMode::MeanMax,
            noise_remove_fraction: 1.0,
            sor: SorConfig::default(),
            omrp: OmrpConfig::default(),
            jaya: JayaParams::default(),
            pool: LearnerSpec::default_pool(),
            use_balancing: true,
            use_pruning: true,
            fitness_fraction: 0.2,
            overlap_k: 5,
            record_timings: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.folds < 2 {
            return bad(format!("folds must be at least 2, got {}", self.folds));
        }
        if self.repeats == 0 {
            return bad("repeats must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.noise_remove_fraction) {
            return bad(format!("noise fraction {} outside [0, 1]", self.noise_remove_fraction));
        }
        if !(self.sor.fallback_fraction > 0.0 && self.sor.fallback_fraction <= 1.0) {
            return bad(format!("SOR fallback fraction {} outside (0, 1]", self.sor.fallback_fraction));
        }
        if !self.sor.z_threshold.is_finite() {
            return bad("z threshold must be finite".into());
        }
        if self.omrp.knn_k == 0 {
            return bad("OMRP neighbour count must be at least 1".into());
        }
        if self.use_pruning && (self.jaya.population < 2 || self.jaya.iterations < 1) {
            return bad("Jaya needs population >= 2 and iterations >= 1".into());
        }
        if !(self.fitness_fraction > 0.0 && self.fitness_fraction < 1.0) {
            return bad(format!("fitness fraction {} outside (0, 1)", self.fitness_fraction));
        }
        if self.pool.is_empty() {
            return bad("classifier pool is empty".into());
        }
        if self.overlap_k == 0 {
            return bad("overlap neighbour count must be at least 1".into());
        }
        Ok(())
    }

    /// Loads `data` with `label_column`.
    pub fn load_dataset(&self) -> Result<Dataset> {
        let path = self.data.as_ref().ok_or_else(|| Error::InvalidParameter("no dataset path configured".into()))?;
        load_csv(path, &self.label_column)
    }
}

/// Outcome of the partition and cleaning stages on one training set.
#[derive(Clone, Debug)]
pub struct Cleaned {
    pub model: NbModel,
    pub assignment: RegionAssignment,
    /// Noisy samples dropped, ascending.
    pub removed_noisy: Vec<usize>,
    /// Per class, overlapping samples that survived the gap test.
    pub non_overlapping: Vec<Vec<usize>>,
    /// Per class, core plus surviving overlapping plus retained noisy samples.
    pub base_sets: Vec<Vec<usize>>,
}

impl Cleaned {
    /// All retained rows, ascending.
    pub fn kept(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.base_sets.iter().flatten().copied().collect();
        all.sort_unstable();
        all
    }
}

/// Fits the class model on `ds`, partitions it, drops the configured share of noisy
/// samples and thins the overlapping region.
pub fn clean(ds: &Dataset, config: &RunConfig) -> Result<Cleaned> {
    let model = fit_nb(ds)?;
    let p = posteriors(&model, ds)?;
    let t = class_thresholds(&p, ds.labels(), config.threshold_mode)?;
    let assignment = partition(&p, &t, ds.labels())?;
    let removed_noisy = noise_subset(&assignment, config.noise_remove_fraction)?;
    let non_overlapping = sor_all(ds, &assignment, &config.sor)?;

    let mut base_sets: Vec<Vec<usize>> = non_overlapping.clone();
    for i in 0..ds.n_samples() {
        let keep = match assignment.tags[i] {
            Region::Core => true,
            Region::Noisy => removed_noisy.binary_search(&i).is_err(),
            Region::Overlapping => false,
        };
        if keep {
            base_sets[ds.label(i)].push(i);
        }
    }
    base_sets.iter_mut().for_each(|s| s.sort_unstable());
    Ok(Cleaned { model, assignment, removed_noisy, non_overlapping, base_sets })
}

/// Stratified split returning `(train, held_out)` positions, each ascending.
///
/// Every class with at least two rows puts `round(fraction * n)` of them, clamped to
/// `1..n`, in the held-out part; single-row classes stay in training.
pub fn stratified_split(ds: &Dataset, fraction: f64, rng: &mut seed::StageRng) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut held = Vec::new();
    for mut members in ds.class_indices() {
        members.shuffle(rng);
        let n = members.len();
        let take = if n < 2 { 0 } else { ((fraction * n as f64).round() as usize).clamp(1, n - 1) };
        held.extend_from_slice(&members[..take]);
        train.extend_from_slice(&members[take..]);
    }
    train.sort_unstable();
    held.sort_unstable();
    (train, held)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub g_mean: f64,
    pub auc: Option<f64>,
}

impl FoldMetrics {
    pub const NAMES: [&'static str; 6] = ["accuracy", "precision", "recall", "f_score", "g_mean", "auc"];

    pub fn values(&self) -> [Option<f64>; 6] {
        [Some(self.accuracy), Some(self.precision), Some(self.recall), Some(self.f_score), Some(self.g_mean), self.auc]
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RegionCounts {
    pub core: usize,
    pub overlapping: usize,
    pub noisy: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub repeat: usize,
    pub fold: usize,
    /// Why the fold was aborted, if it was.
    pub error: Option<String>,
    pub metrics: Option<FoldMetrics>,
    pub regions: RegionCounts,
    pub removed_noisy: usize,
    pub kept_overlapping: usize,
    pub base_counts: Vec<usize>,
    pub training_counts: Vec<usize>,
    pub mask: Vec<bool>,
    pub selected: Vec<String>,
    pub pruning_fitness: Option<f64>,
    pub overlap_before: Option<f64>,
    pub overlap_after: Option<f64>,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<BTreeMap<String, f64>>,
}

/// Original-dataset rows that reached each fitted stage of a fold.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LeakageTrace {
    pub class_model: Vec<usize>,
    pub sor_references: Vec<usize>,
    pub oversampling_parents: Vec<usize>,
    pub pool_training: Vec<usize>,
    pub pruning_fitness: Vec<usize>,
}

struct Stopwatch {
    on: bool,
    last: Instant,
    laps: BTreeMap<String, f64>,
}

impl Stopwatch {
    fn new(on: bool) -> Self {
        Stopwatch { on, last: Instant::now(), laps: BTreeMap::new() }
    }

    fn lap(&mut self, stage: &str) {
        if self.on {
            let now = Instant::now();
            *self.laps.entry(stage.to_string()).or_default() += (now - self.last).as_secs_f64();
            self.last = now;
        }
    }

    fn finish(self) -> Option<BTreeMap<String, f64>> {
        self.on.then_some(self.laps)
    }
}

fn or_value(ds: &Dataset, k: usize, what: &str, warnings: &mut Vec<String>) -> Option<f64> {
    match overlap_ratios(ds, k) {
        Ok(r) => Some(r.dataset),
        Err(e) => {
            warnings.push(format!("overlap ratio {what} unavailable: {e}"));
            None
        }
    }
}

/// Runs the whole pipeline on one train/test split of `ds`.
///
/// Everything that is fitted sees only `train_idx`; the test rows are only scaled
/// with the training scaler and then predicted.
pub fn run_fold(ds: &Dataset, train_idx: &[usize], test_idx: &[usize], config: &RunConfig, fold_seed: u64) -> Result<(FoldResult, LeakageTrace)> {
    let mut watch = Stopwatch::new(config.record_timings);
    let mut out = FoldResult::default();
    let mut trace = LeakageTrace { class_model: train_idx.to_vec(), ..Default::default() };

    let (train, test) = {
        let (tr, te) = (ds.subset(train_idx), ds.subset(test_idx));
        if config.scale {
            let s = MinMaxScaler::fit(&tr);
            (s.transform(&tr), s.transform(&te))
        } else {
            (tr, te)
        }
    };
    watch.lap("prepare");

    let cleaned = clean(&train, config)?;
    let a = &cleaned.assignment;
    out.regions = RegionCounts { core: a.count(Region::Core), overlapping: a.count(Region::Overlapping), noisy: a.count(Region::Noisy) };
    out.removed_noisy = cleaned.removed_noisy.len();
    out.kept_overlapping = cleaned.non_overlapping.iter().map(Vec::len).sum();
    out.base_counts = cleaned.base_sets.iter().map(Vec::len).collect();
    trace.sor_references = (0..train.n_samples())
        .filter(|&i| matches!(a.tags[i], Region::Core | Region::Overlapping))
        .map(|i| train_idx[i])
        .collect();
    watch.lap("clean");

    out.overlap_before = or_value(&train, config.overlap_k, "before cleaning", &mut out.warnings);
    out.overlap_after = or_value(&train.subset(&cleaned.kept()), config.overlap_k, "after cleaning", &mut out.warnings);
    watch.lap("overlap_ratio");

    // Each training row remembers the original rows it was built from.
    let (training, origins): (Dataset, Vec<Vec<usize>>) = if config.use_balancing {
        let b = balanced_dataset(&train, &cleaned.base_sets, &config.omrp, fold_seed)?;
        trace.oversampling_parents = cleaned.kept().iter().map(|&i| train_idx[i]).collect();
        let mut origins: Vec<Vec<usize>> = b.origin.iter().flatten().map(|&i| vec![train_idx[i]]).collect();
        for batch in &b.batches {
            let members = &cleaned.base_sets[batch.class_id];
            for p in &batch.provenance {
                origins.push(vec![train_idx[members[p.parent]], train_idx[members[p.neighbor]]]);
            }
        }
        out.warnings.extend(b.warnings.iter().cloned());
        (b.dataset, origins)
    } else {
        let kept = cleaned.kept();
        (train.subset(&kept), kept.iter().map(|&i| vec![train_idx[i]]).collect())
    };
    out.training_counts = training.class_counts();
    watch.lap("oversample");

    let collect = |rows: &[usize]| -> Vec<usize> {
        let mut v: Vec<usize> = rows.iter().flat_map(|&r| origins[r].iter().copied()).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let (pool, mask): (ClassifierPool, Vec<bool>) = if config.use_pruning {
        let (fit_rows, held_rows) = stratified_split(&training, config.fitness_fraction, &mut seed::stream(fold_seed, &[seed::STAGE_SPLIT]));
        trace.pool_training = collect(&fit_rows);
        trace.pruning_fitness = collect(&held_rows);
        let pool = train_pool(&training.subset(&fit_rows), &config.pool, fold_seed)?;
        watch.lap("train_pool");
        let pruned = prune(&pool, &training.subset(&held_rows), &config.jaya, &mut seed::stream(fold_seed, &[seed::STAGE_JAYA]))?;
        out.pruning_fitness = Some(pruned.fitness);
        let mask = pruned.mask.clone();
        watch.lap("prune");
        (pool, mask)
    } else {
        trace.pool_training = collect(&(0..training.n_samples()).collect::<Vec<_>>());
        let pool = train_pool(&training, &config.pool, fold_seed)?;
        watch.lap("train_pool");
        let m = pool.len();
        (pool, vec![true; m])
    };
    out.selected = pool.names().into_iter().zip(&mask).filter(|(_, &on)| on).map(|(n, _)| n).collect();

    let votes: Vec<Vec<usize>> = exec::map_indices(test.n_samples(), |i| vote_counts(&pool, &mask, test.row(i)));
    let preds: Vec<usize> = votes
        .iter()
        .map(|v| (0..v.len()).fold(0, |best, c| if v[c] > v[best] { c } else { best }))
        .collect();
    let selected = mask.iter().filter(|&&b| b).count() as f64;
    let scores: Vec<Vec<f64>> = votes.iter().map(|v| v.iter().map(|&c| c as f64 / selected).collect()).collect();
    let m = classification_metrics(&preds, test.labels(), test.n_classes())?;
    out.warnings.extend(m.warnings.iter().cloned());
    let auc = match macro_ovr_auc(&scores, test.labels()) {
        Ok(a) => Some(a),
        Err(e) => {
            out.warnings.push(format!("AUC unavailable: {e}"));
            None
        }
    };
    out.metrics = Some(FoldMetrics { accuracy: m.accuracy, precision: m.precision, recall: m.recall, f_score: m.f_score, g_mean: m.g_mean, auc });
    out.mask = mask;
    watch.lap("evaluate");
    out.timings = watch.finish();
    Ok((out, trace))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<MeanStd> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(MeanStd { mean, std: var.sqrt(), n: values.len() })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub accuracy: MeanStd,
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub f_score: MeanStd,
    pub g_mean: MeanStd,
    pub auc: Option<MeanStd>,
}

impl Aggregate {
    /// Mean and spread over the folds that finished; `None` if none did.
    pub fn from_folds(folds: &[FoldResult]) -> Option<Aggregate> {
        let done: Vec<&FoldMetrics> = folds.iter().filter_map(|f| f.metrics.as_ref()).collect();
        let col = |f: fn(&FoldMetrics) -> f64| MeanStd::of(&done.iter().map(|m| f(m)).collect::<Vec<_>>());
        Some(Aggregate {
            accuracy: col(|m| m.accuracy)?,
            precision: col(|m| m.precision)?,
            recall: col(|m| m.recall)?,
            f_score: col(|m| m.f_score)?,
            g_mean: col(|m| m.g_mean)?,
            auc: MeanStd::of(&done.iter().filter_map(|m| m.auc).collect::<Vec<_>>()),
        })
    }

    pub fn get(&self, metric: &str) -> Option<MeanStd> {
        match metric {
            "accuracy" => Some(self.accuracy),
            "precision" => Some(self.precision),
            "recall" => Some(self.recall),
            "f_score" => Some(self.f_score),
            "g_mean" => Some(self.g_mean),
            "auc" => self.auc,
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_samples: usize,
    pub n_features: usize,
    pub class_names: Vec<String>,
    pub class_counts: Vec<usize>,
    pub imbalance_ratio: f64,
}

impl DatasetSummary {
    pub fn of(ds: &Dataset) -> Self {
        DatasetSummary {
            n_samples: ds.n_samples(),
            n_features: ds.n_features(),
            class_names: ds.class_names().to_vec(),
            class_counts: ds.class_counts(),
            imbalance_ratio: imbalance_ratio(ds),
        }
    }
}

/// Overlap ratios of the whole dataset before and after partition and cleaning,
/// plus the training-fold means.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OverlapSummary {
    pub before: Option<OverlapRatios>,
    pub after: Option<OverlapRatios>,
    pub fold_mean_before: Option<f64>,
    pub fold_mean_after: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    pub partial: bool,
    pub dataset: DatasetSummary,
    pub fold_plan_id: String,
    pub folds: Vec<FoldResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aggregate: Option<Aggregate>,
    pub overlap_ratios: OverlapSummary,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<BTreeMap<String, f64>>,
}

fn dataset_overlap(ds: &Dataset, config: &RunConfig, warnings: &mut Vec<String>) -> (Option<OverlapRatios>, Option<OverlapRatios>) {
    let ds = if config.scale { MinMaxScaler::fit(ds).transform(ds) } else { ds.clone() };
    let before = overlap_ratios(&ds, config.overlap_k).map_err(|e| warnings.push(format!("dataset overlap ratio unavailable: {e}"))).ok();
    let after = match clean(&ds, config) {
        Ok(c) => overlap_ratios(&ds.subset(&c.kept()), config.overlap_k)
            .map_err(|e| warnings.push(format!("cleaned overlap ratio unavailable: {e}")))
            .ok(),
        Err(e) => {
            warnings.push(format!("cleaning the full dataset failed: {e}"));
            None
        }
    };
    (before, after)
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    MeanStd::of(&v).map(|m| m.mean)
}

/// Cross-validates `config` on `ds` over a precomputed fold plan.
pub fn run_cv_with_plan(ds: &Dataset, config: &RunConfig, plan: &FoldPlan) -> Result<ExperimentReport> {
    config.validate()?;
    let started = Instant::now();
    let results = exec::map_slice(&plan.folds, |f| {
        let fold_seed = seed::derive_seed(config.seed, &[f.repeat as u64, f.fold as u64]);
        match run_fold(ds, &f.train, &f.test, config, fold_seed) {
            Ok((mut r, _)) => {
                r.repeat = f.repeat;
                r.fold = f.fold;
                r
            }
            Err(e) => {
                warn!("repeat {} fold {} aborted: {e}", f.repeat, f.fold);
                FoldResult { repeat: f.repeat, fold: f.fold, error: Some(e.to_string()), ..Default::default() }
            }
        }
    });

    let mut warnings = plan.warnings.clone();
    for r in &results {
        if let Some(e) = &r.error {
            warnings.push(format!("repeat {} fold {}: aborted: {e}", r.repeat, r.fold));
        }
        warnings.extend(r.warnings.iter().map(|w| format!("repeat {} fold {}: {w}", r.repeat, r.fold)));
    }
    let (before, after) = dataset_overlap(ds, config, &mut warnings);
    let overlap = OverlapSummary {
        before,
        after,
        fold_mean_before: mean_of(results.iter().map(|r| r.overlap_before)),
        fold_mean_after: mean_of(results.iter().map(|r| r.overlap_after)),
    };
    let timings = config.record_timings.then(|| {
        let mut t: BTreeMap<String, f64> = BTreeMap::new();
        for r in &results {
            for (k, v) in r.timings.iter().flatten() {
                *t.entry(k.clone()).or_default() += v;
            }
        }
        t.insert("wall_clock".into(), started.elapsed().as_secs_f64());
        t
    });
    Ok(ExperimentReport {
        config: config.clone(),
        variant: None,
        partial: results.is_empty() || results.iter().any(|r| r.error.is_some()),
        dataset: DatasetSummary::of(ds),
        fold_plan_id: plan.id(),
        aggregate: Aggregate::from_folds(&results),
        folds: results,
        overlap_ratios: overlap,
        warnings,
        timings,
    })
}

/// Repeated stratified cross-validation of the full pipeline on `ds`.
pub fn run_cv(ds: &Dataset, config: &RunConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let plan = stratified_folds(ds, config.folds, config.repeats, config.seed)?;
    run_cv_with_plan(ds, config, &plan)
}

pub const DEFAULT_NOISE_FRACTIONS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// One report per noise-removal fraction, all on the same folds.
pub fn ablate_noise(ds: &Dataset, config: &RunConfig, fractions: &[f64]) -> Result<Vec<ExperimentReport>> {
    if let Some(f) = fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(Error::InvalidParameter(format!("noise fraction {f} outside [0, 1]")));
    }
    config.validate()?;
    let plan = stratified_folds(ds, config.folds, config.repeats, config.seed)?;
    fractions
        .iter()
        .map(|&f| {
            let cfg = RunConfig { noise_remove_fraction: f, ..config.clone() };
            let mut r = run_cv_with_plan(ds, &cfg, &plan)?;
            r.variant = Some(format!("noise_fraction={f}"));
            Ok(r)
        })
        .collect()
}

/// The component variants: without balancing, without pruning, and the full pipeline.
pub fn component_variants(config: &RunConfig) -> Vec<(&'static str, RunConfig)> {
    vec![
        ("no_balancing", RunConfig { use_balancing: false, use_pruning: true, ..config.clone() }),
        ("no_pruning", RunConfig { use_balancing: true, use_pruning: false, ..config.clone() }),
        ("full", RunConfig { use_balancing: true, use_pruning: true, ..config.clone() }),
    ]
}

pub fn ablate_components(ds: &Dataset, config: &RunConfig) -> Result<Vec<ExperimentReport>> {
    config.validate()?;
    let plan = stratified_folds(ds, config.folds, config.repeats, config.seed)?;
    component_variants(config)
        .into_iter()
        .map(|(name, cfg)| {
            let mut r = run_cv_with_plan(ds, &cfg, &plan)?;
            r.variant = Some(name.to_string());
            Ok(r)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(format!("unknown report format `{other}` (expected json or csv)")),
        }
    }
}

/// Pretty JSON with every float printed to six decimals.
struct FixedFloats(serde_json::ser::PrettyFormatter<'static>);

impl serde_json::ser::Formatter for FixedFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.6}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        write!(w, "{value:.6}")
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serialises any value as pretty JSON with six-decimal floats.
pub fn to_json<T: Serialize + ?Sized, W: Write>(value: &T, writer: W) -> Result<()> {
    let mut ser = serde_json::Serializer::with_formatter(writer, FixedFloats(serde_json::ser::PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    Ok(())
}

pub fn report_json(report: &ExperimentReport) -> Result<String> {
    let mut buf = Vec::new();
    to_json(report, &mut buf)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

/// `repeat,fold,metric,value` rows, six per fold; missing values are left empty.
pub fn report_csv<W: Write>(report: &ExperimentReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["repeat", "fold", "metric", "value"])?;
    for f in &report.folds {
        let values = f.metrics.as_ref().map(FoldMetrics::values).unwrap_or([None; 6]);
        for (name, v) in FoldMetrics::NAMES.iter().zip(values) {
            let v = v.filter(|x| x.is_finite()).map(|x| format!("{x:.6}")).unwrap_or_default();
            w.write_record([f.repeat.to_string(), f.fold.to_string(), name.to_string(), v])?;
        }
    }
    w.flush().map_err(|source| Error::Io { path: "<csv output>".into(), source })?;
    Ok(())
}

/// Several reports as `variant,repeat,fold,metric,value` rows.
pub fn reports_csv<W: Write>(reports: &[ExperimentReport], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["variant", "repeat", "fold", "metric", "value"])?;
    for r in reports {
        let variant = r.variant.clone().unwrap_or_default();
        for f in &r.folds {
            let values = f.metrics.as_ref().map(FoldMetrics::values).unwrap_or([None; 6]);
            for (name, v) in FoldMetrics::NAMES.iter().zip(values) {
                let v = v.filter(|x| x.is_finite()).map(|x| format!("{x:.6}")).unwrap_or_default();
                w.write_record([variant.clone(), f.repeat.to_string(), f.fold.to_string(), name.to_string(), v])?;
            }
        }
    }
    w.flush().map_err(|source| Error::Io { path: "<csv output>".into(), source })?;
    Ok(())
}

pub fn emit_report(report: &ExperimentReport, path: &Path, format: ReportFormat) -> Result<()> {
    let file = File::create(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    let mut w = BufWriter::new(file);
    match format {
        ReportFormat::Json => w.write_all(report_json(report)?.as_bytes()),
        ReportFormat::Csv => return report_csv(report, w),
    }
    .and_then(|_| w.flush())
    .map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable() -> Dataset {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..30 {
            let j = (i % 5) as f64 * 0.1;
            rows.push(vec![j, (i / 5) as f64 * 0.1]);
            labels.push(0);
            rows.push(vec![10.0 + j, 10.0 + (i / 5) as f64 * 0.1]);
            labels.push(1);
        }
        Dataset::new(rows, labels, vec!["a".into(), "b".into()]).unwrap()
    }

    fn quick() -> RunConfig {
        RunConfig { repeats: 2, jaya: JayaParams { population: 4, iterations: 3 }, ..RunConfig::default() }
    }

    #[test]
    fn separable_data_is_perfect() {
        let r = run_cv(&separable(), &quick()).unwrap();
        assert!(!r.partial);
        let g = r.aggregate.unwrap().g_mean;
        assert_eq!((g.mean, g.std, g.n), (1.0, 0.0, 10));
    }

    #[test]
    fn fixed_float_json() {
        let mut buf = Vec::new();
        to_json(&serde_json::json!({"a": 0.1, "b": 2.0, "c": [1]}), &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.contains("\"a\": 0.100000"));
        assert!(s.contains("\"b\": 2.000000"));
        assert!(s.contains("1\n"));
    }

    #[test]
    fn empty_report_omits_aggregate() {
        let r = ExperimentReport { partial: true, ..Default::default() };
        let s = report_json(&r).unwrap();
        assert!(!s.contains("\"aggregate\""));
        assert!(s.contains("\"partial\": true"));
    }

    #[test]
    fn split_keeps_every_class() {
        let ds = separable();
        let (tr, held) = stratified_split(&ds, 0.2, &mut seed::stream(1, &[]));
        assert_eq!(held.len(), 12);
        assert_eq!(tr.len() + held.len(), ds.n_samples());
        assert!(held.iter().any(|&i| ds.label(i) == 0) && held.iter().any(|&i| ds.label(i) == 1));
    }

    #[test]
    fn config_validation() {
        assert!(RunConfig::default().validate().is_ok());
        assert!(RunConfig { folds: 1, ..RunConfig::default() }.validate().is_err());
        assert!(RunConfig { noise_remove_fraction: 1.5, ..RunConfig::default() }.validate().is_err());
        assert!(RunConfig { pool: vec![], ..RunConfig::default() }.validate().is_err());
    }

    #[test]
    fn config_defaults_fill_missing_fields() {
        let c: RunConfig = serde_json::from_str(r#"{"folds": 3, "sor": {"z_threshold": 1.5}}"#).unwrap();
        assert_eq!(c.folds, 3);
        assert_eq!(c.repeats, 10);
        assert_eq!(c.sor.z_threshold, 1.5);
        assert_eq!(c.sor.fallback_fraction, 0.30);
    }
}
