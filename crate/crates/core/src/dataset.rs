//! Dataset representation, CSV ingestion and stratified fold planning.

use std::fmt;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Numeric feature matrix with densely encoded class labels.
///
/// Labels are indices into `class_names`. A dataset built with [`Dataset::new`]
/// has at least one sample per class; [`Dataset::subset`] may leave a class empty
/// and downstream stages check for that themselves.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    n_features: usize,
    labels: Vec<usize>,
    class_names: Vec<String>,
}

/// Which CSV column holds the class label.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

impl Default for LabelColumn {
    fn default() -> Self {
        LabelColumn::Name("class".to_string())
    }
}

impl fmt::Display for LabelColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelColumn::Index(i) => write!(f, "#{i}"),
            LabelColumn::Name(n) => write!(f, "`{n}`"),
        }
    }
}

impl std::str::FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(s.to_string()),
        })
    }
}

impl Dataset {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch { expected: rows.len(), found: labels.len() });
        }
        let n_features = rows.first().map_or(0, Vec::len);
        let mut features = Vec::with_capacity(rows.len() * n_features);
        for row in &rows {
            if row.len() != n_features {
                return Err(Error::DimensionMismatch { expected: n_features, found: row.len() });
            }
            features.extend_from_slice(row);
        }
        let ds = Dataset { features, n_features, labels, class_names };
        ds.validate()?;
        Ok(ds)
    }

    fn validate(&self) -> Result<()> {
        if let Some(v) = self.features.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("non-finite feature value {v}")));
        }
        if let Some(&l) = self.labels.iter().find(|&&l| l >= self.n_classes()) {
            return Err(Error::InvalidData(format!("label {l} out of range for {} classes", self.n_classes())));
        }
        for (c, &count) in self.class_counts().iter().enumerate() {
            if count == 0 {
                return Err(Error::EmptyClass(self.class_names[c].clone()));
            }
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + Clone + '_ {
        (0..self.n_samples()).map(move |i| self.row(i))
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Sample indices grouped by class, ascending within each class.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.n_classes()];
        for (i, &l) in self.labels.iter().enumerate() {
            groups[l].push(i);
        }
        groups
    }

    /// Rows at `indices`, in that order. Class names (and therefore `n_classes`) are kept.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Dataset {
            features,
            n_features: self.n_features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
        }
    }

    /// Appends rows without re-validating class coverage.
    pub fn extend(&mut self, rows: &[Vec<f64>], label: usize) {
        for row in rows {
            debug_assert_eq!(row.len(), self.n_features);
            self.features.extend_from_slice(row);
            self.labels.push(label);
        }
    }

    pub fn map_features(&self, mut f: impl FnMut(usize, f64) -> f64) -> Dataset {
        let d = self.n_features.max(1);
        Dataset {
            features: self.features.iter().enumerate().map(|(k, &v)| f(k % d, v)).collect(),
            ..self.clone()
        }
    }
}

/// Per-feature min-max scaling fitted on one dataset and applied to others.
#[derive(Clone, Debug)]
pub struct MinMaxScaler {
    min: Vec<f64>,
    range: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(ds: &Dataset) -> Self {
        let d = ds.n_features();
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for row in ds.rows() {
            for (j, &v) in row.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        let range = min.iter().zip(&max).map(|(lo, hi)| hi - lo).collect();
        MinMaxScaler { min, range }
    }

    /// Constant columns map to 0.
    pub fn transform(&self, ds: &Dataset) -> Dataset {
        ds.map_features(|j, v| if self.range[j] > 0.0 { (v - self.min[j]) / self.range[j] } else { 0.0 })
    }
}

pub fn load_csv(path: impl AsRef<Path>, label_column: &LabelColumn) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    read_csv(file, label_column)
}

/// Reads a headed CSV. Labels are re-encoded 0..n-1 in order of first appearance.
pub fn read_csv<R: Read>(reader: R, label_column: &LabelColumn) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let label_idx = match label_column {
        LabelColumn::Index(i) if *i < header.len() => *i,
        LabelColumn::Name(name) => header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingLabelColumn(label_column.to_string()))?,
        _ => return Err(Error::MissingLabelColumn(label_column.to_string())),
    };

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut class_names: Vec<String> = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let mut row = Vec::with_capacity(header.len().saturating_sub(1));
        for (c, cell) in record.iter().enumerate() {
            if c == label_idx {
                continue;
            }
            let value: f64 = cell.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| Error::Parse {
                // 1-based data row, header excluded
                row: r + 1,
                column: header.get(c).cloned().unwrap_or_else(|| c.to_string()),
                value: cell.to_string(),
            })?;
            row.push(value);
        }
        let name = record.get(label_idx).unwrap_or_default();
        let label = match class_names.iter().position(|n| n == name) {
            Some(l) => l,
            None => {
                class_names.push(name.to_string());
                class_names.len() - 1
            }
        };
        rows.push(row);
        labels.push(label);
    }
    if class_names.len() < 2 {
        return Err(Error::TooFewClasses(class_names.len()));
    }
    Dataset::new(rows, labels, class_names)
}

/// Header names of the feature columns, label column excluded.
pub fn feature_names(path: impl AsRef<Path>, label_column: &LabelColumn) -> Result<Vec<String>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let skip = match label_column {
        LabelColumn::Index(i) => Some(*i),
        LabelColumn::Name(n) => header.iter().position(|h| h == n),
    }
    .filter(|&i| i < header.len())
    .ok_or_else(|| Error::MissingLabelColumn(label_column.to_string()))?;
    Ok(header.into_iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, h)| h).collect())
}

pub fn write_csv<W: std::io::Write>(
    writer: W,
    ds: &Dataset,
    feature_names: Option<&[String]>,
    provenance: Option<&[&str]>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = match feature_names {
        Some(names) => names.to_vec(),
        None => (0..ds.n_features()).map(|j| format!("f{j}")).collect(),
    };
    header.push("class".into());
    if provenance.is_some() {
        header.push("provenance".into());
    }
    w.write_record(&header)?;
    for i in 0..ds.n_samples() {
        let mut rec: Vec<String> = ds.row(i).iter().map(|v| v.to_string()).collect();
        rec.push(ds.class_names()[ds.label(i)].clone());
        if let Some(p) = provenance {
            rec.push(p[i].to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|source| Error::Io { path: "<csv output>".into(), source })?;
    Ok(())
}

/// Largest class count over smallest class count.
pub fn imbalance_ratio(ds: &Dataset) -> f64 {
    let counts = ds.class_counts();
    let max = counts.iter().copied().max().unwrap_or(0) as f64;
    let min = counts.iter().copied().min().unwrap_or(0) as f64;
    max / min
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub repeat: usize,
    pub fold: usize,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Train/test assignments for repeated stratified k-fold cross-validation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub repeats: usize,
    pub master_seed: u64,
    pub folds: Vec<Fold>,
    pub warnings: Vec<String>,
}

impl FoldPlan {
    /// FNV-1a digest of every assignment, used to show that reports share folds.
    pub fn id(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |v: u64| {
            for b in v.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100_0000_01b3);
            }
        };
        for f in &self.folds {
            feed(f.repeat as u64);
            feed(f.fold as u64);
            f.test.iter().for_each(|&i| feed(i as u64));
            feed(u64::MAX);
        }
        format!("{h:016x}")
    }

    pub fn fold(&self, repeat: usize, fold: usize) -> &Fold {
        &self.folds[repeat * self.k + fold]
    }
}

/// Repeated stratified k-fold split.
///
/// Each class is shuffled and dealt round-robin onto the folds, continuing the
/// fold counter across classes so fold sizes also stay within one of each other.
/// A class with fewer than `k` samples cannot appear in every test fold; it is
/// dealt as far as it goes (so it sits wholly in training for the remaining folds)
/// and a warning is recorded.
pub fn stratified_folds(ds: &Dataset, k: usize, repeats: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("fold count must be at least 2, got {k}")));
    }
    if repeats == 0 {
        return Err(Error::InvalidParameter("repeat count must be at least 1".into()));
    }
    let groups = ds.class_indices();
    let mut warnings = Vec::new();
    for (c, g) in groups.iter().enumerate() {
        if g.len() < k {
            warnings.push(format!(
                "class `{}` has {} sample(s), fewer than {k} folds; it stays wholly in training for {} fold(s)",
                ds.class_names()[c],
                g.len(),
                k - g.len()
            ));
        }
    }

    let mut folds = Vec::with_capacity(k * repeats);
    for repeat in 0..repeats {
        let mut rng = seed::stream(seed, &[seed::STAGE_FOLDS, repeat as u64]);
        let mut assignment = vec![0usize; ds.n_samples()];
        let mut cursor = 0usize;
        for g in &groups {
            let mut members = g.clone();
            members.shuffle(&mut rng);
            for i in members {
                assignment[i] = cursor % k;
                cursor += 1;
            }
        }
        for fold in 0..k {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..ds.n_samples()).partition(|&i| assignment[i] == fold);
            folds.push(Fold { repeat, fold, train, test });
        }
    }
    Ok(FoldPlan { k, repeats, master_seed: seed, folds, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv(text: &str) -> Result<Dataset> {
        read_csv(text.as_bytes(), &LabelColumn::Name("y".into()))
    }

    #[test]
    fn labels_encoded_by_first_appearance() {
        let ds = csv("x,y\n1,a\n2,b\n3,a\n").unwrap();
        assert_eq!(ds.labels(), &[0, 1, 0]);
        assert_eq!(ds.n_classes(), 2);
        assert_eq!(ds.class_names(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn label_column_by_index() {
        let ds = read_csv("y,x\nb,1\na,2\n".as_bytes(), &LabelColumn::Index(0)).unwrap();
        assert_eq!(ds.class_names(), &["b".to_string(), "a".to_string()]);
        assert_eq!(ds.row(1), &[2.0]);
    }

    #[test]
    fn unparsable_cell_names_row_and_column() {
        let err = csv("x,z,y\n1,2,a\n3,abc,b\n").unwrap_err();
        match err {
            Error::Parse { row, column, value } => {
                assert_eq!(row, 2);
                assert_eq!(column, "z");
                assert_eq!(value, "abc");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_values_are_rejected() {
        assert!(matches!(csv("x,y\n,a\n1,b\n"), Err(Error::Parse { .. })));
        assert!(matches!(csv("x,y\nNaN,a\n1,b\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn missing_label_column_and_single_class() {
        assert!(matches!(csv("x,z\n1,a\n"), Err(Error::MissingLabelColumn(_))));
        assert!(matches!(csv("x,y\n1,a\n2,a\n"), Err(Error::TooFewClasses(1))));
        assert!(matches!(
            read_csv("x,y\n1,a\n".as_bytes(), &LabelColumn::Index(5)),
            Err(Error::MissingLabelColumn(_))
        ));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(load_csv("/nonexistent/file.csv", &LabelColumn::default()), Err(Error::Io { .. })));
    }

    fn with_counts(counts: &[usize]) -> Dataset {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, &n) in counts.iter().enumerate() {
            for i in 0..n {
                rows.push(vec![i as f64, c as f64]);
                labels.push(c);
            }
        }
        let names = (0..counts.len()).map(|c| format!("c{c}")).collect();
        Dataset::new(rows, labels, names).unwrap()
    }

    #[test]
    fn imbalance_ratio_examples() {
        assert_eq!(imbalance_ratio(&with_counts(&[50, 50])), 1.0);
        assert_eq!(imbalance_ratio(&with_counts(&[90, 30, 10])), 9.0);
    }

    #[test]
    fn exact_stratification_50_50() {
        let ds = with_counts(&[50, 50]);
        let plan = stratified_folds(&ds, 5, 1, 3).unwrap();
        for f in &plan.folds {
            let ones = f.test.iter().filter(|&&i| ds.label(i) == 1).count();
            assert_eq!(f.test.len(), 20);
            assert_eq!(ones, 10);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let ds = with_counts(&[30, 17, 9]);
        assert_eq!(stratified_folds(&ds, 5, 3, 11).unwrap(), stratified_folds(&ds, 5, 3, 11).unwrap());
        assert_ne!(stratified_folds(&ds, 5, 1, 11).unwrap().folds, stratified_folds(&ds, 5, 1, 12).unwrap().folds);
    }

    #[test]
    fn small_class_falls_back_with_warning() {
        let ds = with_counts(&[20, 3]);
        let plan = stratified_folds(&ds, 5, 2, 1).unwrap();
        assert_eq!(plan.warnings.len(), 1);
        let small: Vec<usize> = (0..ds.n_samples()).filter(|&i| ds.label(i) == 1).collect();
        let mut lacking = 0;
        for f in &plan.folds {
            if !f.test.iter().any(|i| small.contains(i)) {
                lacking += 1;
                assert!(small.iter().all(|i| f.train.contains(i)));
            }
        }
        assert_eq!(lacking, 2 * 2);
    }

    #[test]
    fn rejects_k_below_two() {
        assert!(stratified_folds(&with_counts(&[5, 5]), 1, 1, 0).is_err());
    }

    #[test]
    fn min_max_scaling() {
        let ds = Dataset::new(vec![vec![0.0, 5.0], vec![10.0, 5.0]], vec![0, 1], vec!["a".into(), "b".into()]).unwrap();
        let scaled = MinMaxScaler::fit(&ds).transform(&ds);
        assert_eq!(scaled.row(0), &[0.0, 0.0]);
        assert_eq!(scaled.row(1), &[1.0, 0.0]);
    }
}
