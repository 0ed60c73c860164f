//! Weak classifier pool and hard majority voting.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::exec;
use crate::geometry::k_nearest;
use crate::posterior::{fit_nb, NbModel};
use crate::seed::{self, StageRng};

/// A trained classifier that maps a feature vector to a class index.
pub trait Classifier: Send + Sync + std::fmt::Debug {
    fn predict(&self, x: &[f64]) -> usize;

    fn name(&self) -> String;

    fn predict_all(&self, ds: &Dataset) -> Vec<usize> {
        ds.rows().map(|x| self.predict(x)).collect()
    }
}

/// One entry of the pool configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerSpec {
    Knn {
        #[serde(default = "default_knn_k")]
        k: usize,
    },
    GaussianNb,
    Tree {
        #[serde(default = "default_depth")]
        max_depth: usize,
    },
    ExtraTree {
        #[serde(default = "default_depth")]
        max_depth: usize,
    },
}

fn default_knn_k() -> usize {
    3
}

fn default_depth() -> usize {
    1
}

impl LearnerSpec {
    /// kNN (k = 3), Gaussian NB, a Gini stump and an extremely randomised stump.
    pub fn default_pool() -> Vec<LearnerSpec> {
        vec![
            LearnerSpec::Knn { k: 3 },
            LearnerSpec::GaussianNb,
            LearnerSpec::Tree { max_depth: 1 },
            LearnerSpec::ExtraTree { max_depth: 1 },
        ]
    }
}

fn argmax_smallest(votes: &[usize]) -> usize {
    let mut best = 0;
    for (c, &v) in votes.iter().enumerate() {
        if v > votes[best] {
            best = c;
        }
    }
    best
}

#[derive(Debug)]
pub struct Knn {
    k: usize,
    train: Dataset,
}

impl Knn {
    pub fn fit(train: &Dataset, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("kNN needs k >= 1".into()));
        }
        Ok(Knn { k, train: train.clone() })
    }
}

impl Classifier for Knn {
    fn predict(&self, x: &[f64]) -> usize {
        let nn = k_nearest(x, self.train.rows().enumerate(), self.k, None);
        let mut votes = vec![0; self.train.n_classes()];
        for i in nn {
            votes[self.train.label(i)] += 1;
        }
        argmax_smallest(&votes)
    }

    fn name(&self) -> String {
        format!("knn(k={})", self.k)
    }
}

#[derive(Debug)]
pub struct GaussianNb {
    model: NbModel,
}

impl GaussianNb {
    /// Classes absent from `train` get prior 0 and are never predicted.
    pub fn fit(train: &Dataset) -> Result<Self> {
        let present: Vec<usize> = train.class_counts().iter().enumerate().filter(|(_, &n)| n > 0).map(|(c, _)| c).collect();
        if present.len() == train.n_classes() {
            return Ok(GaussianNb { model: fit_nb(train)? });
        }
        // Refit on the present classes only, then widen back to the full label space.
        let remap: Vec<usize> = train.labels().iter().map(|l| present.iter().position(|p| p == l).unwrap_or(0)).collect();
        let rows: Vec<Vec<f64>> = train.rows().map(<[f64]>::to_vec).collect();
        let names = present.iter().map(|&c| train.class_names()[c].clone()).collect();
        let sub = fit_nb(&Dataset::new(rows, remap, names)?)?;
        let n = train.n_classes();
        let d = train.n_features();
        let mut model = NbModel { priors: vec![0.0; n], means: vec![vec![0.0; d]; n], variances: vec![vec![1.0; d]; n], smoothing: sub.smoothing };
        for (k, &c) in present.iter().enumerate() {
            model.priors[c] = sub.priors[k];
            model.means[c] = sub.means[k].clone();
            model.variances[c] = sub.variances[k].clone();
        }
        Ok(GaussianNb { model })
    }
}

impl Classifier for GaussianNb {
    fn predict(&self, x: &[f64]) -> usize {
        self.model.predict(x)
    }

    fn name(&self) -> String {
        "gaussian_nb".into()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Splitter {
    /// Best midpoint over every feature.
    Best,
    /// One uniform threshold per feature in `[min, max)`; best feature wins.
    Random,
}

#[derive(Debug)]
enum Node {
    Leaf(usize),
    Split { feature: usize, threshold: f64, left: Box<Node>, right: Box<Node> },
}

/// Depth-limited CART classifier with Gini impurity.
#[derive(Debug)]
pub struct DecisionTree {
    root: Node,
    max_depth: usize,
    splitter: Splitter,
}

fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

struct TreeBuilder<'a> {
    ds: &'a Dataset,
    max_depth: usize,
    splitter: Splitter,
    rng: Option<StageRng>,
}

impl TreeBuilder<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.ds.n_classes()];
        for &i in idx {
            c[self.ds.label(i)] += 1;
        }
        c
    }

    /// Weighted child impurity of splitting `idx` at `x[feature] <= threshold`.
    fn split_impurity(&self, idx: &[usize], feature: usize, threshold: f64) -> f64 {
        let n = self.ds.n_classes();
        let (mut l, mut r) = (vec![0; n], vec![0; n]);
        let (mut nl, mut nr) = (0, 0);
        for &i in idx {
            if self.ds.row(i)[feature] <= threshold {
                l[self.ds.label(i)] += 1;
                nl += 1;
            } else {
                r[self.ds.label(i)] += 1;
                nr += 1;
            }
        }
        if nl == 0 || nr == 0 {
            return f64::INFINITY;
        }
        let t = idx.len() as f64;
        nl as f64 / t * gini(&l, nl) + nr as f64 / t * gini(&r, nr)
    }

    fn best_split(&mut self, idx: &[usize]) -> Option<(usize, f64, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        let mut consider = |f: usize, thr: f64, imp: f64| {
            if imp.is_finite() && best.is_none_or(|b| imp < b.2) {
                best = Some((f, thr, imp));
            }
        };
        for f in 0..self.ds.n_features() {
            let mut values: Vec<f64> = idx.iter().map(|&i| self.ds.row(i)[f]).collect();
            values.sort_by(f64::total_cmp);
            values.dedup();
            if values.len() < 2 {
                continue;
            }
            match self.splitter {
                Splitter::Best => {
                    for w in values.windows(2) {
                        let thr = 0.5 * (w[0] + w[1]);
                        let imp = self.split_impurity(idx, f, thr);
                        consider(f, thr, imp);
                    }
                }
                Splitter::Random => {
                    let (lo, hi) = (values[0], values[values.len() - 1]);
                    let rng = self.rng.as_mut().expect("random splitter needs a stream");
                    let thr = rng.gen_range(lo..hi);
                    let imp = self.split_impurity(idx, f, thr);
                    consider(f, thr, imp);
                }
            }
        }
        best
    }

    fn build(&mut self, idx: &[usize], depth: usize) -> Node {
        let counts = self.counts(idx);
        let majority = argmax_smallest(&counts);
        let parent = gini(&counts, idx.len());
        if depth >= self.max_depth || idx.len() < 2 || parent == 0.0 {
            return Node::Leaf(majority);
        }
        match self.best_split(idx) {
            Some((feature, threshold, imp)) if imp < parent => {
                let (li, ri): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.ds.row(i)[feature] <= threshold);
                let left = Box::new(self.build(&li, depth + 1));
                let right = Box::new(self.build(&ri, depth + 1));
                Node::Split { feature, threshold, left, right }
            }
            _ => Node::Leaf(majority),
        }
    }
}

impl DecisionTree {
    pub fn fit(train: &Dataset, max_depth: usize, splitter: Splitter, rng: Option<StageRng>) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::InvalidData("cannot fit a tree on an empty dataset".into()));
        }
        let mut b = TreeBuilder { ds: train, max_depth, splitter, rng };
        let idx: Vec<usize> = (0..train.n_samples()).collect();
        let root = b.build(&idx, 0);
        Ok(DecisionTree { root, max_depth, splitter })
    }

    /// (feature, threshold) pairs in pre-order.
    pub fn splits(&self) -> Vec<(usize, f64)> {
        fn walk(n: &Node, out: &mut Vec<(usize, f64)>) {
            if let Node::Split { feature, threshold, left, right } = n {
                out.push((*feature, *threshold));
                walk(left, out);
                walk(right, out);
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }
}

impl Classifier for DecisionTree {
    fn predict(&self, x: &[f64]) -> usize {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf(c) => return *c,
                Node::Split { feature, threshold, left, right } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    fn name(&self) -> String {
        match self.splitter {
            Splitter::Best => format!("tree(depth={})", self.max_depth),
            Splitter::Random => format!("extra_tree(depth={})", self.max_depth),
        }
    }
}

/// Trained classifiers in a fixed order; mask position `i` selects member `i`.
#[derive(Debug)]
pub struct ClassifierPool {
    members: Vec<Box<dyn Classifier>>,
    n_classes: usize,
    n_features: usize,
}

impl ClassifierPool {
    pub fn from_members(members: Vec<Box<dyn Classifier>>, n_classes: usize, n_features: usize) -> Self {
        ClassifierPool { members, n_classes, n_features }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn members(&self) -> &[Box<dyn Classifier>] {
        &self.members
    }

    pub fn names(&self) -> Vec<String> {
        self.members.iter().map(|m| m.name()).collect()
    }

    /// `out[member][sample]` predictions over a dataset.
    pub fn predictions(&self, ds: &Dataset) -> Vec<Vec<usize>> {
        self.members
            .iter()
            .map(|m| exec::map_indices(ds.n_samples(), |i| m.predict(ds.row(i))))
            .collect()
    }
}

/// Trains one classifier per [`LearnerSpec`], in order. Stochastic members draw from a stream
/// derived from `seed` and their pool position.
pub fn train_pool(balanced: &Dataset, specs: &[LearnerSpec], seed: u64) -> Result<ClassifierPool> {
    let present = balanced.class_counts().iter().filter(|&&n| n > 0).count();
    if present < 2 {
        return Err(Error::TooFewClasses(present));
    }
    if specs.is_empty() {
        return Err(Error::InvalidParameter("classifier pool is empty".into()));
    }
    let members = exec::map_slice(&specs.iter().enumerate().collect::<Vec<_>>(), |&(pos, spec)| -> Result<Box<dyn Classifier>> {
        Ok(match *spec {
            LearnerSpec::Knn { k } => Box::new(Knn::fit(balanced, k)?),
            LearnerSpec::GaussianNb => Box::new(GaussianNb::fit(balanced)?),
            LearnerSpec::Tree { max_depth } => Box::new(DecisionTree::fit(balanced, max_depth, Splitter::Best, None)?),
            LearnerSpec::ExtraTree { max_depth } => {
                let rng = seed::stream(seed, &[seed::STAGE_POOL, pos as u64]);
                Box::new(DecisionTree::fit(balanced, max_depth, Splitter::Random, Some(rng))?)
            }
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(ClassifierPool { members, n_classes: balanced.n_classes(), n_features: balanced.n_features() })
}

/// Vote counts of the selected members for one sample.
pub fn vote_counts(pool: &ClassifierPool, mask: &[bool], x: &[f64]) -> Vec<usize> {
    let mut votes = vec![0; pool.n_classes()];
    for (m, _) in pool.members.iter().zip(mask).filter(|(_, &on)| on) {
        votes[m.predict(x)] += 1;
    }
    votes
}

/// Plurality of the selected members; ties go to the smallest label.
pub fn majority_vote(pool: &ClassifierPool, mask: &[bool], x: &[f64]) -> Result<usize> {
    check_mask(pool.len(), mask)?;
    Ok(argmax_smallest(&vote_counts(pool, mask, x)))
}

pub(crate) fn check_mask(pool_len: usize, mask: &[bool]) -> Result<()> {
    if mask.len() != pool_len {
        return Err(Error::DimensionMismatch { expected: pool_len, found: mask.len() });
    }
    if !mask.iter().any(|&b| b) {
        return Err(Error::InvalidParameter("selection mask selects no classifier".into()));
    }
    Ok(())
}

/// Majority vote over precomputed `preds[member][sample]`.
pub fn vote_from_predictions(preds: &[Vec<usize>], mask: &[bool], n_classes: usize, sample: usize) -> usize {
    let mut votes = vec![0; n_classes];
    for (p, _) in preds.iter().zip(mask).filter(|(_, &on)| on) {
        votes[p[sample]] += 1;
    }
    argmax_smallest(&votes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug)]
    struct Constant(usize);

    impl Classifier for Constant {
        fn predict(&self, _: &[f64]) -> usize {
            self.0
        }
        fn name(&self) -> String {
            format!("constant({})", self.0)
        }
    }

    fn pool_of(labels: &[usize], n_classes: usize) -> ClassifierPool {
        ClassifierPool::from_members(labels.iter().map(|&l| Box::new(Constant(l)) as Box<dyn Classifier>).collect(), n_classes, 1)
    }

    fn line(n: usize) -> Dataset {
        Dataset::new(
            (0..n).map(|i| vec![i as f64]).collect(),
            (0..n).map(|i| usize::from(i >= n / 2)).collect(),
            vec!["lo".into(), "hi".into()],
        )
        .unwrap()
    }

    #[test]
    fn default_pool_order() {
        let pool = train_pool(&line(10), &LearnerSpec::default_pool(), 1).unwrap();
        assert_eq!(pool.len(), 4);
        assert_eq!(pool.names(), vec!["knn(k=3)", "gaussian_nb", "tree(depth=1)", "extra_tree(depth=1)"]);
    }

    #[test]
    fn stump_separates_line() {
        let ds = line(20);
        let t = DecisionTree::fit(&ds, 1, Splitter::Best, None).unwrap();
        assert_eq!(t.splits(), vec![(0, 9.5)]);
        assert!(ds.rows().zip(ds.labels()).all(|(x, &y)| t.predict(x) == y));
    }

    #[test]
    fn extra_tree_is_seeded() {
        let ds = line(20);
        let a = DecisionTree::fit(&ds, 2, Splitter::Random, Some(seed::stream(5, &[]))).unwrap();
        let b = DecisionTree::fit(&ds, 2, Splitter::Random, Some(seed::stream(5, &[]))).unwrap();
        assert_eq!(a.splits(), b.splits());
        let (_, thr) = a.splits()[0];
        assert!((0.0..19.0).contains(&thr));
    }

    #[test]
    fn single_class_training_is_rejected() {
        let ds = line(10).subset(&[0, 1, 2]);
        assert!(matches!(train_pool(&ds, &LearnerSpec::default_pool(), 0), Err(Error::TooFewClasses(1))));
    }

    #[test]
    fn knn_ties_go_to_smallest_label() {
        let ds = Dataset::new(vec![vec![-1.0], vec![1.0]], vec![1, 0], vec!["a".into(), "b".into()]).unwrap();
        let knn = Knn::fit(&ds, 2).unwrap();
        assert_eq!(knn.predict(&[0.0]), 0);
    }

    #[test]
    fn voting_rules() {
        let pool = pool_of(&[1, 0, 1, 0], 2);
        assert_eq!(majority_vote(&pool, &[true, false, false, false], &[0.0]).unwrap(), 1);
        // two votes each, label 0 wins the tie
        assert_eq!(majority_vote(&pool, &[true; 4], &[0.0]).unwrap(), 0);
        let pool = pool_of(&[1, 1, 0, 1], 2);
        assert_eq!(majority_vote(&pool, &[true; 4], &[0.0]).unwrap(), 1);
        assert!(majority_vote(&pool, &[false; 4], &[0.0]).is_err());
        assert!(majority_vote(&pool, &[true; 3], &[0.0]).is_err());
    }

    #[test]
    fn nb_with_missing_class_never_predicts_it() {
        let ds = Dataset::new(
            vec![vec![0.0], vec![1.0], vec![5.0], vec![6.0]],
            vec![0, 0, 2, 2],
            vec!["a".into(), "b".into(), "c".into()],
        );
        // Dataset::new rejects the empty class; build it through subset instead.
        assert!(ds.is_err());
        let full = Dataset::new(
            vec![vec![0.0], vec![1.0], vec![3.0], vec![5.0], vec![6.0]],
            vec![0, 0, 1, 2, 2],
            vec!["a".into(), "b".into(), "c".into()],
        )
        .unwrap();
        let ds = full.subset(&[0, 1, 3, 4]);
        let nb = GaussianNb::fit(&ds).unwrap();
        assert_eq!(nb.predict(&[3.0]), 0);
        assert_eq!(nb.predict(&[5.5]), 2);
    }
}
