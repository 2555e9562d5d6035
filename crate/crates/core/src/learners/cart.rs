//! CART classification trees with exact Gini split search.
//!
//! Candidate thresholds are midpoints between consecutive distinct values of
//! a feature. Split quality is compared exactly in integer arithmetic:
//! minimizing weighted Gini impurity is the same as maximizing
//! `sum(l_k^2) / n_l + sum(r_k^2) / n_r`, which is compared by
//! cross-multiplication. Ties go to the lowest feature index, then the
//! lowest threshold.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{argmax_count, Dataset};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartParams {
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_split: u64,
}

impl Default for CartParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        class: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn predict_index(&self, x: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { class } => return class,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

/// Midpoint of two consecutive distinct values, kept strictly below `hi`.
pub fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid < hi {
        mid
    } else {
        lo
    }
}

/// Exact split score `(A * n_r + B * n_l) / (n_l * n_r)` kept as a fraction.
#[derive(Clone, Copy)]
struct Score {
    num: u128,
    den: u128,
}

impl Score {
    fn new(sq_left: u64, n_left: u64, sq_right: u64, n_right: u64) -> Self {
        Score {
            num: sq_left as u128 * n_right as u128 + sq_right as u128 * n_left as u128,
            den: n_left as u128 * n_right as u128,
        }
    }

    fn beats(&self, other: &Score) -> bool {
        self.num * other.den > other.num * self.den
    }
}

/// How features are offered to each split search.
pub(crate) enum FeatureChoice<'a, R: Rng> {
    All,
    Sample { rng: &'a mut R, per_split: usize },
}

struct Builder<'a, 'r, R: Rng> {
    data: &'a Dataset,
    targets: &'a [usize],
    weights: &'a [u64],
    n_classes: usize,
    params: CartParams,
    features: FeatureChoice<'r, R>,
    nodes: Vec<Node>,
    buf: Vec<(f64, usize)>,
}

impl<R: Rng> Builder<'_, '_, R> {
    fn counts(&self, rows: &[usize]) -> Vec<u64> {
        let mut c = vec![0u64; self.n_classes];
        for &r in rows {
            c[self.targets[r]] += self.weights[r];
        }
        c
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.data.n_features();
        match &mut self.features {
            FeatureChoice::All => (0..d).collect(),
            FeatureChoice::Sample { rng, per_split } => {
                if *per_split >= d {
                    (0..d).collect()
                } else {
                    let mut f = rand::seq::index::sample(*rng, d, *per_split).into_vec();
                    f.sort_unstable();
                    f
                }
            }
        }
    }

    fn best_split(&mut self, rows: &[usize], counts: &[u64]) -> Option<(usize, f64)> {
        let total: u64 = counts.iter().sum();
        let mut best: Option<(Score, usize, f64)> = None;
        let mut left = vec![0u64; self.n_classes];
        for feature in self.candidate_features() {
            self.buf.clear();
            self.buf.extend(rows.iter().map(|&r| (self.data.value(r, feature), r)));
            self.buf.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            left.iter_mut().for_each(|c| *c = 0);
            let mut n_left = 0u64;
            for i in 0..self.buf.len() - 1 {
                let (value, row) = self.buf[i];
                left[self.targets[row]] += self.weights[row];
                n_left += self.weights[row];
                let next = self.buf[i + 1].0;
                if next <= value {
                    continue;
                }
                let n_right = total - n_left;
                let sq_left: u64 = left.iter().map(|c| c * c).sum();
                let sq_right: u64 = left.iter().zip(counts).map(|(l, c)| (c - l) * (c - l)).sum();
                let score = Score::new(sq_left, n_left, sq_right, n_right);
                if best.as_ref().is_none_or(|(b, _, _)| score.beats(b)) {
                    best = Some((score, feature, midpoint(value, next)));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let counts = self.counts(&rows);
        let majority = argmax_count(&counts);
        self.nodes.push(Node::Leaf { class: majority });
        let total: u64 = counts.iter().sum();
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || total < self.params.min_samples_split || self.params.max_depth.is_some_and(|m| depth >= m) {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(&rows, &counts) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&row| self.data.value(row, feature) <= threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

/// Grows a tree over the rows with non-zero `weights` (bootstrap
/// multiplicities; all ones for plain CART).
pub(crate) fn grow_tree<R: Rng>(
    data: &Dataset,
    targets: &[usize],
    weights: &[u64],
    n_classes: usize,
    params: CartParams,
    features: FeatureChoice<'_, R>,
) -> DecisionTree {
    let rows: Vec<usize> = (0..data.len()).filter(|&i| weights[i] > 0).collect();
    let mut builder = Builder {
        data,
        targets,
        weights,
        n_classes,
        params,
        features,
        nodes: Vec::new(),
        buf: Vec::with_capacity(rows.len()),
    };
    builder.grow(rows, 0);
    DecisionTree { nodes: builder.nodes }
}

/// Plain CART over every row and every feature. `targets` are class indices.
pub fn fit_cart(data: &Dataset, targets: &[usize], n_classes: usize, params: CartParams) -> DecisionTree {
    let weights = vec![1u64; data.len()];
    grow_tree::<rand_chacha::ChaCha8Rng>(data, targets, &weights, n_classes, params, FeatureChoice::All)
}
