use serde::{Deserialize, Serialize};

use super::{Dataset, LearnError};

/// Per-feature z-score transform fit on a training set. Features with zero
/// variance map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    pub fn fit(train: &Dataset) -> Result<Self, LearnError> {
        if train.is_empty() {
            return Err(LearnError::Empty("standardization needs training rows".into()));
        }
        let d = train.n_features();
        let n = train.len() as f64;
        let mut mean = vec![0.0; d];
        for row in train.rows() {
            for (m, x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in train.rows() {
            for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let std = var.into_iter().map(|v| (v / n).sqrt()).collect();
        Ok(Self { mean, std })
    }

    pub fn transform_row(&self, row: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(row.iter().zip(&self.mean).zip(&self.std).map(
            |((x, m), s)| {
                if *s > 0.0 {
                    (x - m) / s
                } else {
                    0.0
                }
            },
        ));
    }

    pub fn transform(&self, data: &Dataset) -> Dataset {
        let mut values = Vec::with_capacity(data.len() * data.n_features());
        let mut buf = Vec::with_capacity(data.n_features());
        for row in data.rows() {
            self.transform_row(row, &mut buf);
            values.extend_from_slice(&buf);
        }
        data.with_values(values)
    }
}

/// Fits a scaler on `train` and applies it to `train` and every set in
/// `apply_to`.
pub fn standardize(train: &Dataset, apply_to: &[&Dataset]) -> Result<(Scaler, Dataset, Vec<Dataset>), LearnError> {
    let scaler = Scaler::fit(train)?;
    let train_t = scaler.transform(train);
    let others = apply_to.iter().map(|d| scaler.transform(d)).collect();
    Ok((scaler, train_t, others))
}
