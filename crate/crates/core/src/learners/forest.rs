//! Random forest: bagged CART trees with per-split feature sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::argmax_count;
use super::cart::{grow_tree, CartParams, DecisionTree, FeatureChoice};
use super::Dataset;
use crate::seed::derive_indexed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub bootstrap: bool,
    /// `None` means `ceil(sqrt(n_features))`.
    pub features_per_split: Option<usize>,
    pub tree: CartParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
    pub n_classes: usize,
}

pub fn default_features_per_split(n_features: usize) -> usize {
    (n_features as f64).sqrt().ceil() as usize
}

/// Trees are grown independently from seeds derived from `(seed, tree
/// index)`, so the result does not depend on the thread schedule.
pub fn fit_random_forest(
    data: &Dataset,
    targets: &[usize],
    n_classes: usize,
    params: ForestParams,
    seed: u64,
) -> RandomForest {
    let per_split = params
        .features_per_split
        .unwrap_or_else(|| default_features_per_split(data.n_features()))
        .max(1);
    let n = data.len();
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_indexed(seed, t as u64));
            let mut weights = vec![0u64; n];
            if params.bootstrap {
                for _ in 0..n {
                    weights[rng.gen_range(0..n)] += 1;
                }
            } else {
                weights.iter_mut().for_each(|w| *w = 1);
            }
            grow_tree(
                data,
                targets,
                &weights,
                n_classes,
                params.tree,
                FeatureChoice::Sample {
                    rng: &mut rng,
                    per_split,
                },
            )
        })
        .collect();
    RandomForest { trees, n_classes }
}

impl RandomForest {
    pub fn votes(&self, x: &[f64]) -> Vec<u32> {
        let mut votes = vec![0u32; self.n_classes];
        for tree in &self.trees {
            votes[tree.predict_index(x)] += 1;
        }
        votes
    }

    pub fn predict_index(&self, x: &[f64]) -> usize {
        argmax_count(&self.votes(x))
    }
}
