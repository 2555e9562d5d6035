//! Multinomial logistic regression trained by full-batch gradient descent.

use serde::{Deserialize, Serialize};

use super::{argmax, Dataset, LearnError};

pub const DEFAULT_LEARNING_RATE: f64 = 0.1;
pub const DEFAULT_ITERATIONS: usize = 500;
pub const DEFAULT_L2: f64 = 1e-4;

/// Weights are `weights[class][feature]`; the L2 penalty skips the bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Logistic {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl Logistic {
    pub fn zeros(n_classes: usize, n_features: usize) -> Self {
        Self {
            weights: vec![vec![0.0; n_features]; n_classes],
            bias: vec![0.0; n_classes],
        }
    }

    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| b + w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>())
            .collect()
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.scores(x))
    }

    pub fn predict_index(&self, x: &[f64]) -> usize {
        argmax(&self.scores(x))
    }
}

pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}

/// Mean cross-entropy plus `l2 / 2 * |W|^2`, and its gradient laid out like
/// the parameters.
pub fn objective(model: &Logistic, data: &Dataset, targets: &[usize], l2: f64) -> (f64, Logistic) {
    let k = model.bias.len();
    let d = data.n_features();
    let n = data.len() as f64;
    let mut grad = Logistic::zeros(k, d);
    let mut loss = 0.0;
    for (i, &y) in targets.iter().enumerate() {
        let x = data.row(i);
        let p = model.probabilities(x);
        loss -= p[y].ln();
        for (c, pc) in p.iter().enumerate() {
            let r = pc - if c == y { 1.0 } else { 0.0 };
            grad.bias[c] += r;
            for (g, xv) in grad.weights[c].iter_mut().zip(x) {
                *g += r * xv;
            }
        }
    }
    loss /= n;
    grad.bias.iter_mut().for_each(|g| *g /= n);
    let mut penalty = 0.0;
    for (gw, w) in grad.weights.iter_mut().zip(&model.weights) {
        for (g, w) in gw.iter_mut().zip(w) {
            *g = *g / n + l2 * w;
            penalty += w * w;
        }
    }
    (loss + 0.5 * l2 * penalty, grad)
}

pub fn fit_logistic(
    train: &Dataset,
    classes: &[u32],
    learning_rate: f64,
    iterations: usize,
    l2: f64,
) -> Result<Logistic, LearnError> {
    if train.is_empty() {
        return Err(LearnError::Empty("logistic regression needs training rows".into()));
    }
    let targets = train.class_indices(classes)?;
    let mut model = Logistic::zeros(classes.len(), train.n_features());
    for iteration in 0..iterations {
        let (loss, grad) = objective(&model, train, &targets, l2);
        if !loss.is_finite() {
            return Err(LearnError::NonFiniteLoss { iteration });
        }
        for (w, g) in model.weights.iter_mut().zip(&grad.weights) {
            for (w, g) in w.iter_mut().zip(g) {
                *w -= learning_rate * g;
            }
        }
        for (b, g) in model.bias.iter_mut().zip(&grad.bias) {
            *b -= learning_rate * g;
        }
    }
    Ok(model)
}
