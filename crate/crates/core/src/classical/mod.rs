//! Classical baselines on fixed-length feature vectors.

mod bayes;
mod ensemble;
mod forest;
mod knn;
mod logistic;
mod model;
mod svm;
mod tree;

pub use bayes::{fit_gnb, GaussianNb, VARIANCE_FLOOR};
pub use ensemble::{fit_committee, fit_stacking, majority_vote, stratified_folds, Committee, Stacking};
pub use forest::{fit_forest, ForestParams, RandomForest};
pub use knn::{knn_predict, Knn, DEFAULT_K};
pub use logistic::{fit_logistic, Logistic, LogisticParams};
pub use model::{fit_classifier, ClassicalModel, ClassifierSpec, Model, TABLE_METHODS};
pub use svm::{fit_linear_svm_ovr, LinearSvm, Standardizer, SvmParams};
pub use tree::{best_split, fit_tree, DecisionTree, MaxFeatures, SplitChoice, TreeNode, TreeParams};

use crate::{Error, Result, Scalar};

/// Row-major feature vectors with class ids.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet<T> {
    values: Vec<T>,
    dim: usize,
    labels: Vec<usize>,
    n_classes: usize,
}

impl<T: Scalar> FeatureSet<T> {
    pub fn new(values: Vec<T>, dim: usize, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if values.len() != dim * labels.len() {
            return Err(Error::shape(
                "features",
                format!("{} values for {} rows of width {dim}", values.len(), labels.len()),
            ));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::Label(format!("class id {l} outside {n_classes} classes")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Fit("non-finite feature value".into()));
        }
        Ok(Self {
            values,
            dim,
            labels,
            n_classes,
        })
    }

    pub fn from_rows(rows: &[Vec<T>], labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) || rows.len() != labels.len() {
            return Err(Error::shape("features", "ragged rows or label count mismatch"));
        }
        Self::new(rows.concat(), dim, labels, n_classes)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut values = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Self {
            values,
            dim: self.dim,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
        }
    }
}

/// Common prediction interface.
pub trait Classifier<T: Scalar>: Send + Sync {
    fn n_classes(&self) -> usize;

    /// Class scores summing to 1; not calibrated for every model.
    fn predict_proba(&self, x: &[T]) -> Vec<f64>;

    /// Argmax of [`Classifier::predict_proba`], ties to the lowest id.
    fn predict(&self, x: &[T]) -> usize {
        argmax_f64(&self.predict_proba(x))
    }
}

pub(crate) fn argmax_f64(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn softmax_f64(v: &[f64]) -> Vec<f64> {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}
