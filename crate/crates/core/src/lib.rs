//! Imbalanced multi-class learning pipeline.
//!
//! The stages, in pipeline order:
//!
//! 1. [`posterior`]: Gaussian naive-Bayes membership probabilities for every training sample.
//! 2. [`region`]: per-class thresholds and the core / overlapping / noisy partition.
//! 3. [`overlap`]: median-distance gap profiles that keep only the well separated part of
//!    each class's overlapping region.
//! 4. [`resample`]: balancing plan and penalty-constrained SMOTE interpolation.
//! 5. [`learners`] and [`pruning`]: a pool of weak classifiers and a Jaya search over
//!    binary selection masks, combined by hard majority voting.
//!
//! [`harness`] wires the stages into repeated stratified cross-validation and the two
//! ablation studies; [`metrics`] holds the evaluation measures and overlap ratios.
//!
//! Data-parallel loops go through [`exec`], which uses rayon when the `parallel`
//! feature is enabled and can be switched to sequential execution at runtime.

pub mod dataset;
pub mod error;
pub mod exec;
pub mod harness;
pub mod learners;
pub mod metrics;
pub mod overlap;
pub mod posterior;
pub mod pruning;
pub mod region;
pub mod resample;
pub mod seed;

mod geometry;

pub use dataset::{feature_names, imbalance_ratio, load_csv, read_csv, stratified_folds, write_csv, Dataset, FoldPlan, LabelColumn, MinMaxScaler};
pub use error::{Error, Result};
pub use harness::{ablate_components, ablate_noise, clean, emit_report, run_cv, run_cv_with_plan, run_fold, Cleaned, ExperimentReport, ReportFormat, RunConfig};
pub use learners::{majority_vote, train_pool, Classifier, ClassifierPool, LearnerSpec};
pub use metrics::{classification_metrics, macro_ovr_auc, overlap_ratios, ClassificationMetrics, ConfusionMatrix, OverlapRatios};
pub use overlap::{gap_profile, select_non_overlapping, sor_all, GapProfile, KeepMode, SorConfig};
pub use posterior::{fit_nb, posteriors, NbModel, PosteriorMatrix};
pub use pruning::{digitize, jaya_update, prune, Genome, JayaParams, PrunedEnsemble};
pub use region::{class_thresholds, noise_subset, partition, ClassThresholds, Region, RegionAssignment, ThresholdMode};
pub use resample::{balance_plan, balanced_dataset, omrp, penalty_accept, BalancePlan, OmrpConfig, SyntheticBatch};
