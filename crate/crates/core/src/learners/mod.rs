//! Classical classifiers written from scratch: Gaussian naive Bayes,
//! multinomial logistic regression, CART, random forest, k-nearest
//! neighbours and softmax gradient-boosted trees, plus stratified
//! splitting, z-score scaling and evaluation metrics.
//!
//! Every tie (vote, split score, argmax) resolves to the lowest class index
//! or feature index so results are reproducible across implementations.

pub mod boost;
pub mod cart;
pub mod forest;
pub mod knn;
pub mod logistic;
pub mod metrics;
mod model;
pub mod nb;
mod scale;
mod split;

use thiserror::Error;

use crate::features::{FeatureVector, FEATURE_COUNT};

pub use metrics::{evaluate, metrics_from_predictions, ClassMetrics, EvalMetrics};
pub use model::{fit, Algorithm, Fitted, HyperValue, ModelParams, ModelSpec, TrainedModel, MODEL_FORMAT_VERSION};
pub use scale::{standardize, Scaler};
pub use split::{stratified_split, stratified_split_indices};

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("empty dataset: {0}")]
    Empty(String),
    #[error("row {row} has {found} features, expected {expected}")]
    Arity { row: usize, expected: usize, found: usize },
    #[error("row {0} has no label")]
    MissingLabel(usize),
    #[error("row {row}: non-finite feature value")]
    NonFinite { row: usize },
    #[error("unknown hyperparameter `{name}` for {algorithm}")]
    UnknownHyperparameter { algorithm: &'static str, name: String },
    #[error("invalid hyperparameter `{name}`: {reason}")]
    InvalidHyperparameter { name: String, reason: String },
    #[error("train fraction must lie in (0, 1], got {0}")]
    TrainFraction(f64),
    #[error("k = {k} exceeds training set size {n}")]
    KTooLarge { k: usize, n: usize },
    #[error("loss became non-finite at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },
    #[error("label {0} is outside the model's class set")]
    UnknownLabel(u32),
    #[error("feature arity {found} does not match model arity {expected}")]
    ModelArity { expected: usize, found: usize },
    #[error("model document: {0}")]
    Document(String),
}

/// Row-major feature matrix with one class label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n_features: usize,
    values: Vec<f64>,
    labels: Vec<u32>,
    class_set: Vec<u32>,
}

fn distinct_sorted(labels: &[u32]) -> Vec<u32> {
    let mut c = labels.to_vec();
    c.sort_unstable();
    c.dedup();
    c
}

impl Dataset {
    /// Builds a dataset from rows of equal width. Learners accept any width;
    /// [`Dataset::from_vectors`] pins it to the 37-feature catalog.
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<u32>) -> Result<Self, LearnError> {
        let n_features = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * n_features);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_features {
                return Err(LearnError::Arity {
                    row: i + 1,
                    expected: n_features,
                    found: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::from_flat(n_features, values, labels)
    }

    pub fn from_flat(n_features: usize, values: Vec<f64>, labels: Vec<u32>) -> Result<Self, LearnError> {
        if n_features == 0 && !labels.is_empty() {
            return Err(LearnError::Arity {
                row: 1,
                expected: 1,
                found: 0,
            });
        }
        if values.len() != n_features * labels.len() {
            return Err(LearnError::Arity {
                row: labels.len(),
                expected: n_features,
                found: values.len() / labels.len().max(1),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(LearnError::NonFinite {
                row: pos / n_features + 1,
            });
        }
        let class_set = distinct_sorted(&labels);
        Ok(Self {
            n_features,
            values,
            labels,
            class_set,
        })
    }

    /// Labeled feature vectors; every vector must carry a label.
    pub fn from_vectors(vectors: &[FeatureVector]) -> Result<Self, LearnError> {
        let mut values = Vec::with_capacity(vectors.len() * FEATURE_COUNT);
        let mut labels = Vec::with_capacity(vectors.len());
        for (i, fv) in vectors.iter().enumerate() {
            labels.push(fv.label.ok_or(LearnError::MissingLabel(i + 1))?);
            values.extend_from_slice(&fv.values);
        }
        Self::from_flat(FEATURE_COUNT, values, labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn value(&self, i: usize, feature: usize) -> f64 {
        self.values[i * self.n_features + feature]
    }

    pub fn label(&self, i: usize) -> u32 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Distinct labels present, ascending.
    pub fn class_set(&self) -> &[u32] {
        &self.class_set
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.n_features.max(1)).take(self.len())
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut values = Vec::with_capacity(indices.len() * self.n_features);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            values.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        let class_set = distinct_sorted(&labels);
        Dataset {
            n_features: self.n_features,
            values,
            labels,
            class_set,
        }
    }

    /// Same rows with labels replaced through `map`.
    pub fn relabeled(&self, map: impl Fn(u32) -> u32) -> Dataset {
        let labels: Vec<u32> = self.labels.iter().map(|&l| map(l)).collect();
        let class_set = distinct_sorted(&labels);
        Dataset {
            n_features: self.n_features,
            values: self.values.clone(),
            labels,
            class_set,
        }
    }

    pub(crate) fn with_values(&self, values: Vec<f64>) -> Dataset {
        Dataset {
            n_features: self.n_features,
            values,
            labels: self.labels.clone(),
            class_set: self.class_set.clone(),
        }
    }

    /// Class indices of every row relative to `classes`.
    pub(crate) fn class_indices(&self, classes: &[u32]) -> Result<Vec<usize>, LearnError> {
        self.labels
            .iter()
            .map(|l| classes.binary_search(l).map_err(|_| LearnError::UnknownLabel(*l)))
            .collect()
    }
}

/// Index of the largest value; ties go to the lowest index.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Index of the largest count; ties go to the lowest index.
pub(crate) fn argmax_count<T: Ord + Copy>(counts: &[T]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate().skip(1) {
        if c > counts[best] {
            best = i;
        }
    }
    best
}
