//! k-nearest neighbours with Euclidean distance.

use serde::{Deserialize, Serialize};

use super::{argmax_count, Dataset, LearnError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub k: usize,
    pub n_features: usize,
    pub points: Vec<f64>,
    pub targets: Vec<usize>,
    pub n_classes: usize,
}

pub fn fit_knn(train: &Dataset, targets: &[usize], n_classes: usize, k: usize) -> Result<Knn, LearnError> {
    if k == 0 {
        return Err(LearnError::InvalidHyperparameter {
            name: "k".into(),
            reason: "must be at least 1".into(),
        });
    }
    if k > train.len() {
        return Err(LearnError::KTooLarge { k, n: train.len() });
    }
    let mut points = Vec::with_capacity(train.len() * train.n_features());
    for row in train.rows() {
        points.extend_from_slice(row);
    }
    Ok(Knn {
        k,
        n_features: train.n_features(),
        points,
        targets: targets.to_vec(),
        n_classes,
    })
}

impl Knn {
    /// Indices of the `k` nearest rows ordered by (distance, row index).
    pub fn neighbours(&self, x: &[f64]) -> Vec<usize> {
        let mut dist: Vec<(f64, usize)> = self
            .points
            .chunks(self.n_features.max(1))
            .take(self.targets.len())
            .enumerate()
            .map(|(i, p)| (p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, cmp);
            dist.truncate(self.k);
        }
        dist.sort_unstable_by(cmp);
        dist.into_iter().map(|(_, i)| i).collect()
    }

    pub fn predict_index(&self, x: &[f64]) -> usize {
        let mut votes = vec![0u32; self.n_classes];
        for i in self.neighbours(x) {
            votes[self.targets[i]] += 1;
        }
        argmax_count(&votes)
    }
}
