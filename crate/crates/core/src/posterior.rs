//! Gaussian naive-Bayes class model and the sample membership probability matrix.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::exec;

/// Relative variance smoothing, scaled by the largest per-attribute variance.
pub const VAR_SMOOTHING: f64 = 1e-9;
/// Absolute floor on the smoothing term.
pub const MIN_SMOOTHING: f64 = 1e-12;

/// Per-class priors, means and smoothed variances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NbModel {
    pub priors: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
    pub smoothing: f64,
}

fn population_variance(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Fits priors as class frequencies and per-class Gaussians with population variance
/// plus `max(1e-9 * largest attribute variance, 1e-12)`.
pub fn fit_nb(train: &Dataset) -> Result<NbModel> {
    let groups = train.class_indices();
    if let Some(c) = groups.iter().position(Vec::is_empty) {
        return Err(Error::EmptyClass(train.class_names()[c].clone()));
    }
    let d = train.n_features();
    let m = train.n_samples() as f64;

    let max_var = (0..d)
        .map(|j| population_variance(train.rows().map(move |r| r[j])).1)
        .fold(0.0, f64::max);
    let smoothing = (VAR_SMOOTHING * max_var).max(MIN_SMOOTHING);

    let mut priors = Vec::with_capacity(groups.len());
    let mut means = Vec::with_capacity(groups.len());
    let mut variances = Vec::with_capacity(groups.len());
    for g in &groups {
        priors.push(g.len() as f64 / m);
        let (mu, var): (Vec<f64>, Vec<f64>) = (0..d)
            .map(|j| {
                let (mu, var) = population_variance(g.iter().map(|&i| train.row(i)[j]));
                (mu, var + smoothing)
            })
            .unzip();
        means.push(mu);
        variances.push(var);
    }
    Ok(NbModel { priors, means, variances, smoothing })
}

impl NbModel {
    pub fn n_classes(&self) -> usize {
        self.priors.len()
    }

    pub fn n_features(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    /// log P(C_j) + sum_d log N(x_d; mu_jd, var_jd) for every class.
    pub fn log_joint(&self, x: &[f64]) -> Vec<f64> {
        const LN_2PI: f64 = 1.837_877_066_409_345_3;
        (0..self.n_classes())
            .map(|c| {
                let ll: f64 = x
                    .iter()
                    .zip(&self.means[c])
                    .zip(&self.variances[c])
                    .map(|((&v, &mu), &var)| -0.5 * (LN_2PI + var.ln()) - (v - mu) * (v - mu) / (2.0 * var))
                    .sum();
                self.priors[c].ln() + ll
            })
            .collect()
    }

    /// Posterior over classes, normalised after shifting by the row maximum.
    pub fn posterior(&self, x: &[f64]) -> Vec<f64> {
        let mut row = self.log_joint(x);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        row.iter_mut().for_each(|v| *v /= total);
        row
    }

    /// Most probable class; ties go to the smallest index.
    pub fn predict(&self, x: &[f64]) -> usize {
        let lj = self.log_joint(x);
        let mut best = 0;
        for (c, &v) in lj.iter().enumerate() {
            if v > lj[best] {
                best = c;
            }
        }
        best
    }
}

/// Row-stochastic m x n matrix of P(C_j | X_i).
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorMatrix {
    n_classes: usize,
    values: Vec<f64>,
}

impl PosteriorMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let n_classes = rows.first().map_or(0, Vec::len);
        PosteriorMatrix { n_classes, values: rows.into_iter().flatten().collect() }
    }

    pub fn n_samples(&self) -> usize {
        self.values.len().checked_div(self.n_classes).unwrap_or(0)
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_classes..(i + 1) * self.n_classes]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_classes + j]
    }
}

pub fn posteriors(model: &NbModel, ds: &Dataset) -> Result<PosteriorMatrix> {
    if ds.n_features() != model.n_features() {
        return Err(Error::DimensionMismatch { expected: model.n_features(), found: ds.n_features() });
    }
    let rows = exec::map_indices(ds.n_samples(), |i| model.posterior(ds.row(i)));
    Ok(PosteriorMatrix { n_classes: model.n_classes(), values: rows.into_iter().flatten().collect() })
}
