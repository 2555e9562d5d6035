//! Gaussian naive Bayes.

use serde::{Deserialize, Serialize};

use super::{argmax, Dataset, LearnError};

pub const DEFAULT_VAR_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    pub log_priors: Vec<f64>,
    /// `means[class][feature]`
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
}

pub fn fit_gaussian_nb(train: &Dataset, classes: &[u32], var_floor: f64) -> Result<GaussianNb, LearnError> {
    if train.is_empty() {
        return Err(LearnError::Empty("naive Bayes needs training rows".into()));
    }
    let k = classes.len();
    let d = train.n_features();
    let idx = train.class_indices(classes)?;
    let mut counts = vec![0usize; k];
    let mut means = vec![vec![0.0; d]; k];
    for (i, &c) in idx.iter().enumerate() {
        counts[c] += 1;
        for (m, x) in means[c].iter_mut().zip(train.row(i)) {
            *m += x;
        }
    }
    for (c, m) in means.iter_mut().enumerate() {
        if counts[c] == 0 {
            return Err(LearnError::Empty(format!("class {} has no training rows", classes[c])));
        }
        m.iter_mut().for_each(|x| *x /= counts[c] as f64);
    }
    let mut variances = vec![vec![0.0; d]; k];
    for (i, &c) in idx.iter().enumerate() {
        for ((v, x), m) in variances[c].iter_mut().zip(train.row(i)).zip(&means[c]) {
            *v += (x - m) * (x - m);
        }
    }
    for (c, v) in variances.iter_mut().enumerate() {
        v.iter_mut().for_each(|x| *x = (*x / counts[c] as f64).max(var_floor));
    }
    let n = train.len() as f64;
    let log_priors = counts.iter().map(|&c| (c as f64 / n).ln()).collect();
    Ok(GaussianNb {
        log_priors,
        means,
        variances,
    })
}

impl GaussianNb {
    /// Unnormalized log posterior per class.
    pub fn joint_log_likelihood(&self, x: &[f64]) -> Vec<f64> {
        let ln_2pi = (2.0 * std::f64::consts::PI).ln();
        self.log_priors
            .iter()
            .enumerate()
            .map(|(c, lp)| {
                lp + x
                    .iter()
                    .zip(&self.means[c])
                    .zip(&self.variances[c])
                    .map(|((x, m), v)| -0.5 * (ln_2pi + v.ln()) - (x - m) * (x - m) / (2.0 * v))
                    .sum::<f64>()
            })
            .collect()
    }

    pub fn predict_index(&self, x: &[f64]) -> usize {
        argmax(&self.joint_log_likelihood(x))
    }
}
