//! Softmax gradient-boosted regression trees in the XGBoost style.
//!
//! Each round fits one regression tree per class to the per-row gradient
//! `g = p - y` and hessian `h = max(2 p (1 - p), 1e-16)` of the multinomial
//! log-loss. The factor 2 on the hessian matches XGBoost's `multi:softprob`
//! objective and makes every leaf a damped Newton step. Trees grow level by
//! level with an exact greedy search over presorted features; a split needs
//! positive gain and at least `min_child_weight` hessian mass on each side.
//!
//! Two-class problems use the binary logistic objective instead: one tree
//! per round on the class-1 margin (class 0 pinned at 0), hessian
//! `p (1 - p)`.

use serde::{Deserialize, Serialize};

use super::cart::midpoint;
use super::logistic::softmax;
use super::{argmax, Dataset};

pub const DEFAULT_ROUNDS: usize = 100;
pub const DEFAULT_LEARNING_RATE: f64 = 0.3;
pub const DEFAULT_MAX_DEPTH: usize = 3;
pub const DEFAULT_MIN_CHILD_WEIGHT: f64 = 1.0;
pub const DEFAULT_LAMBDA: f64 = 1.0;
const MIN_HESSIAN: f64 = 1e-16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_child_weight: f64,
    pub lambda: f64,
}

impl Default for BoostParams {
    fn default() -> Self {
        Self {
            n_rounds: DEFAULT_ROUNDS,
            learning_rate: DEFAULT_LEARNING_RATE,
            max_depth: DEFAULT_MAX_DEPTH,
            min_child_weight: DEFAULT_MIN_CHILD_WEIGHT,
            lambda: DEFAULT_LAMBDA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegNode {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegTree {
    pub nodes: Vec<RegNode>,
}

impl RegTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                RegNode::Leaf { value } => return value,
                RegNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Booster {
    pub base_scores: Vec<f64>,
    /// `rounds[r][class]`; binary boosters hold one class-1 tree per round.
    pub rounds: Vec<Vec<RegTree>>,
    /// Mean training log-loss before the first round and after each round.
    pub loss_trace: Vec<f64>,
}

impl Booster {
    pub fn is_binary(&self) -> bool {
        self.base_scores.len() == 2 && self.rounds.first().is_some_and(|r| r.len() == 1)
    }

    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        let mut s = self.base_scores.clone();
        let offset = usize::from(self.is_binary());
        for round in &self.rounds {
            for (s, tree) in s[offset..].iter_mut().zip(round) {
                *s += tree.predict(x);
            }
        }
        s
    }

    pub fn predict_index(&self, x: &[f64]) -> usize {
        argmax(&self.scores(x))
    }
}

/// Log-loss of one row given raw class scores.
pub fn softmax_loss(scores: &[f64], target: usize) -> f64 {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    lse - scores[target]
}

/// Gradient and (XGBoost-scaled) hessian of [`softmax_loss`] per class.
pub fn softmax_grad_hess(scores: &[f64], target: usize) -> (Vec<f64>, Vec<f64>) {
    let p = softmax(scores);
    let grad = p
        .iter()
        .enumerate()
        .map(|(c, p)| p - if c == target { 1.0 } else { 0.0 })
        .collect();
    let hess = p.iter().map(|p| (2.0 * p * (1.0 - p)).max(MIN_HESSIAN)).collect();
    (grad, hess)
}

/// Gradient and hessian of the binary log-loss at margin `m`, label `y`.
pub fn logistic_grad_hess(margin: f64, y: bool) -> (f64, f64) {
    let p = 1.0 / (1.0 + (-margin).exp());
    (p - f64::from(u8::from(y)), (p * (1.0 - p)).max(MIN_HESSIAN))
}

fn mean_loss(scores: &[Vec<f64>], targets: &[usize]) -> f64 {
    scores
        .iter()
        .zip(targets)
        .map(|(s, &t)| softmax_loss(s, t))
        .sum::<f64>()
        / targets.len() as f64
}

struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Grows one regression tree; `leaf_of` receives each row's leaf index.
fn grow_reg_tree(
    data: &Dataset,
    sorted: &[Vec<u32>],
    grad: &[f64],
    hess: &[f64],
    params: &BoostParams,
    leaf_of: &mut [usize],
) -> RegTree {
    let n = data.len();
    leaf_of.iter_mut().for_each(|l| *l = 0);
    let mut nodes = vec![RegNode::Leaf { value: 0.0 }];
    let mut sums = vec![(grad.iter().sum::<f64>(), hess.iter().sum::<f64>())];
    let mut open: Vec<usize> = vec![0];
    let score = |g: f64, h: f64| g * g / (h + params.lambda);

    for _ in 0..params.max_depth {
        // No child can reach min_child_weight on both sides.
        open.retain(|&node| sums[node].1 >= 2.0 * params.min_child_weight);
        if open.is_empty() {
            break;
        }
        let mut slot = vec![usize::MAX; nodes.len()];
        for (s, &node) in open.iter().enumerate() {
            slot[node] = s;
        }
        let mut best: Vec<Option<Candidate>> = (0..open.len()).map(|_| None).collect();
        let mut acc = vec![(0.0f64, 0.0f64); open.len()];
        let mut last: Vec<Option<f64>> = vec![None; open.len()];
        for (feature, order) in sorted.iter().enumerate() {
            acc.iter_mut().for_each(|a| *a = (0.0, 0.0));
            last.iter_mut().for_each(|l| *l = None);
            for &row in order {
                let row = row as usize;
                let s = slot[leaf_of[row]];
                if s == usize::MAX {
                    continue;
                }
                let value = data.value(row, feature);
                if let Some(prev) = last[s] {
                    if value > prev {
                        let (gl, hl) = acc[s];
                        let (g, h) = sums[open[s]];
                        let (gr, hr) = (g - gl, h - hl);
                        if hl >= params.min_child_weight && hr >= params.min_child_weight {
                            let gain = 0.5 * (score(gl, hl) + score(gr, hr) - score(g, h));
                            if gain > 0.0 && best[s].as_ref().is_none_or(|b| gain > b.gain) {
                                best[s] = Some(Candidate {
                                    gain,
                                    feature,
                                    threshold: midpoint(prev, value),
                                });
                            }
                        }
                    }
                }
                acc[s].0 += grad[row];
                acc[s].1 += hess[row];
                last[s] = Some(value);
            }
        }

        let mut next_open = Vec::new();
        let mut children = vec![None; open.len()];
        for (s, cand) in best.iter().enumerate() {
            if let Some(c) = cand {
                let left = nodes.len();
                nodes.push(RegNode::Leaf { value: 0.0 });
                nodes.push(RegNode::Leaf { value: 0.0 });
                sums.push((0.0, 0.0));
                sums.push((0.0, 0.0));
                nodes[open[s]] = RegNode::Split {
                    feature: c.feature,
                    threshold: c.threshold,
                    left,
                    right: left + 1,
                };
                children[s] = Some((left, c.feature, c.threshold));
                next_open.extend([left, left + 1]);
            }
        }
        if next_open.is_empty() {
            break;
        }
        for row in 0..n {
            let s = slot[leaf_of[row]];
            if s == usize::MAX {
                continue;
            }
            if let Some((left, feature, threshold)) = children[s] {
                let child = if data.value(row, feature) <= threshold {
                    left
                } else {
                    left + 1
                };
                leaf_of[row] = child;
                sums[child].0 += grad[row];
                sums[child].1 += hess[row];
            }
        }
        open = next_open;
    }

    for (node, &(g, h)) in nodes.iter_mut().zip(&sums) {
        if let RegNode::Leaf { value } = node {
            *value = -params.learning_rate * g / (h + params.lambda);
        }
    }
    RegTree { nodes }
}

/// `targets` are class indices into `n_classes`; every class must occur.
pub fn fit_gradient_boost(data: &Dataset, targets: &[usize], n_classes: usize, params: BoostParams) -> Booster {
    let n = data.len();
    let mut counts = vec![0usize; n_classes];
    for &t in targets {
        counts[t] += 1;
    }
    let prior = |c: usize| {
        if c == 0 {
            f64::MIN / 4.0
        } else {
            (c as f64 / n as f64).ln()
        }
    };
    let binary = n_classes == 2;
    let base_scores: Vec<f64> = if binary {
        vec![0.0, prior(counts[1]) - prior(counts[0])]
    } else {
        counts.iter().map(|&c| prior(c)).collect()
    };
    let sorted: Vec<Vec<u32>> = (0..data.n_features())
        .map(|f| {
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|&a, &b| data.value(a as usize, f).total_cmp(&data.value(b as usize, f)));
            idx
        })
        .collect();

    let fitted = if binary { 1 } else { n_classes };
    let offset = usize::from(binary);
    let mut scores = vec![base_scores.clone(); n];
    let mut loss_trace = vec![mean_loss(&scores, targets)];
    let mut rounds = Vec::with_capacity(params.n_rounds);
    let mut grad = vec![vec![0.0; n]; fitted];
    let mut hess = vec![vec![0.0; n]; fitted];
    let mut leaf_of = vec![0usize; n];
    for _ in 0..params.n_rounds {
        for (i, (s, &t)) in scores.iter().zip(targets).enumerate() {
            if binary {
                (grad[0][i], hess[0][i]) = logistic_grad_hess(s[1], t == 1);
            } else {
                let (g, h) = softmax_grad_hess(s, t);
                for c in 0..n_classes {
                    grad[c][i] = g[c];
                    hess[c][i] = h[c];
                }
            }
        }
        let mut round = Vec::with_capacity(fitted);
        for c in 0..fitted {
            let tree = grow_reg_tree(data, &sorted, &grad[c], &hess[c], &params, &mut leaf_of);
            for (s, &leaf) in scores.iter_mut().zip(&leaf_of) {
                if let RegNode::Leaf { value } = tree.nodes[leaf] {
                    s[c + offset] += value;
                }
            }
            round.push(tree);
        }
        rounds.push(round);
        loss_trace.push(mean_loss(&scores, targets));
    }
    Booster {
        base_scores,
        rounds,
        loss_trace,
    }
}
