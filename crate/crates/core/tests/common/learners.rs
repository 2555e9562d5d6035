//! Brute-force and closed-form references for the learners. Each check
//! panics on the first disagreement.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sicn_core::learners::boost::{logistic_grad_hess, softmax_grad_hess, softmax_loss};
use sicn_core::learners::cart::{fit_cart, CartParams};
use sicn_core::learners::forest::{fit_random_forest, ForestParams};
use sicn_core::learners::knn::fit_knn;
use sicn_core::learners::logistic::{objective, Logistic};
use sicn_core::learners::nb::fit_gaussian_nb;
use sicn_core::learners::{metrics_from_predictions, Dataset};

pub fn random_instance(rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<usize>) {
    let n = rng.gen_range(1..=8);
    let d = rng.gen_range(1..=2);
    let k = rng.gen_range(1..=3);
    let rows = (0..n)
        .map(|_| (0..d).map(|_| rng.gen_range(0..5) as f64).collect())
        .collect();
    let targets = (0..n).map(|_| rng.gen_range(0..k)).collect();
    (rows, targets)
}

pub fn to_dataset(rows: &[Vec<f64>], targets: &[usize]) -> Dataset {
    Dataset::new(rows.to_vec(), targets.iter().map(|&t| t as u32).collect()).unwrap()
}

/// Textbook recursive CART: minimizes weighted Gini written as an exact
/// rational, scanning features then thresholds in ascending order.
pub enum OracleTree {
    Leaf(usize),
    Split(usize, f64, Box<OracleTree>, Box<OracleTree>),
}

pub fn majority(targets: &[usize], rows: &[usize], k: usize) -> usize {
    let mut counts = vec![0; k];
    for &r in rows {
        counts[targets[r]] += 1;
    }
    let max = *counts.iter().max().unwrap();
    counts.iter().position(|&c| c == max).unwrap()
}

pub fn oracle_cart(x: &[Vec<f64>], y: &[usize], rows: Vec<usize>, k: usize) -> OracleTree {
    let leaf = majority(y, &rows, k);
    if rows.iter().all(|&r| y[r] == y[rows[0]]) || rows.len() < 2 {
        return OracleTree::Leaf(leaf);
    }
    // impurity(l, r) = n_l + n_r - S_l / n_l - S_r / n_r, compared as a
    // fraction over n_l * n_r.
    let mut best: Option<(i64, i64, usize, f64)> = None;
    for f in 0..x[0].len() {
        let mut values: Vec<f64> = rows.iter().map(|&r| x[r][f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let mut cl = vec![0i64; k];
            let mut cr = vec![0i64; k];
            for &r in &rows {
                if x[r][f] <= t {
                    cl[y[r]] += 1
                } else {
                    cr[y[r]] += 1
                }
            }
            let nl: i64 = cl.iter().sum();
            let nr: i64 = cr.iter().sum();
            let sl: i64 = cl.iter().map(|c| c * c).sum();
            let sr: i64 = cr.iter().map(|c| c * c).sum();
            let num = (nl + nr) * nl * nr - sl * nr - sr * nl;
            let den = nl * nr;
            if best.is_none_or(|(bn, bd, _, _)| num * bd < bn * den) {
                best = Some((num, den, f, t));
            }
        }
    }
    let Some((_, _, f, t)) = best else {
        return OracleTree::Leaf(leaf);
    };
    let (l, r): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&r| x[r][f] <= t);
    OracleTree::Split(
        f,
        t,
        Box::new(oracle_cart(x, y, l, k)),
        Box::new(oracle_cart(x, y, r, k)),
    )
}

pub fn oracle_predict(t: &OracleTree, x: &[f64]) -> usize {
    match t {
        OracleTree::Leaf(c) => *c,
        OracleTree::Split(f, th, l, r) => oracle_predict(if x[*f] <= *th { l } else { r }, x),
    }
}

pub fn cart_matches_brute_force_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let (x, y) = random_instance(&mut rng);
        let k = y.iter().max().unwrap() + 1;
        let data = to_dataset(&x, &y);
        let tree = fit_cart(&data, &y, k, CartParams::default());
        let oracle = oracle_cart(&x, &y, (0..x.len()).collect(), k);
        let probes: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..x[0].len()).map(|_| rng.gen_range(-1.0..5.0)).collect())
            .chain(x.iter().cloned())
            .collect();
        for p in &probes {
            assert_eq!(
                tree.predict_index(p),
                oracle_predict(&oracle, p),
                "rows {x:?} labels {y:?} probe {p:?}"
            );
        }
    }
}

pub fn knn_matches_brute_force_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let (x, y) = random_instance(&mut rng);
        let k_classes = y.iter().max().unwrap() + 1;
        let k = rng.gen_range(1..=x.len());
        let model = fit_knn(&to_dataset(&x, &y), &y, k_classes, k).unwrap();
        for _ in 0..10 {
            let p: Vec<f64> = (0..x[0].len()).map(|_| rng.gen_range(0..5) as f64 - 0.5).collect();
            let mut order: Vec<(f64, usize)> = x
                .iter()
                .enumerate()
                .map(|(i, r)| (r.iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt(), i))
                .collect();
            order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            let mut votes = vec![0; k_classes];
            for &(_, i) in &order[..k] {
                votes[y[i]] += 1;
            }
            let max = *votes.iter().max().unwrap();
            let expected = votes.iter().position(|&v| v == max).unwrap();
            assert_eq!(model.predict_index(&p), expected);
        }
    }
}

pub fn gaussian_nb_closed_form_posterior() {
    // A = {-1, 1}: mean 0, var 1. B = {9, 11}: mean 10, var 1. Equal priors,
    // so at x = 2 the log-ratio is ((2-10)^2 - (2-0)^2) / 2 = 30 in A's favour.
    let d = Dataset::new(vec![vec![-1.0], vec![1.0], vec![9.0], vec![11.0]], vec![0, 0, 1, 1]).unwrap();
    let m = fit_gaussian_nb(&d, &[0, 1], 1e-9).unwrap();
    let jll = m.joint_log_likelihood(&[2.0]);
    assert!((jll[0] - jll[1] - 30.0).abs() < 1e-9);
    assert_eq!(m.predict_index(&[2.0]), 0);
    assert_eq!(m.predict_index(&[5.0]), 0);
}

pub fn relative_close(analytic: f64, numeric: f64) -> bool {
    (analytic - numeric).abs() <= 1e-4 * analytic.abs().max(numeric.abs()).max(1e-4)
}

pub fn logistic_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for trial in 0..20 {
        let n = rng.gen_range(2..10);
        let d = rng.gen_range(1..4);
        let k = rng.gen_range(2..4);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let targets: Vec<usize> = (0..n).map(|i| i % k).collect();
        let data = to_dataset(&rows, &targets);
        let mut model = Logistic::zeros(k, d);
        if trial > 0 {
            model
                .weights
                .iter_mut()
                .flatten()
                .for_each(|w| *w = rng.gen_range(-1.0..1.0));
            model.bias.iter_mut().for_each(|b| *b = rng.gen_range(-1.0..1.0));
        }
        let l2 = 0.01;
        let (_, grad) = objective(&model, &data, &targets, l2);
        let h = 1e-6;
        for c in 0..k {
            for f in 0..=d {
                let bump = |delta: f64| {
                    let mut m = model.clone();
                    if f == d {
                        m.bias[c] += delta
                    } else {
                        m.weights[c][f] += delta
                    }
                    objective(&m, &data, &targets, l2).0
                };
                let numeric = (bump(h) - bump(-h)) / (2.0 * h);
                let analytic = if f == d { grad.bias[c] } else { grad.weights[c][f] };
                assert!(
                    relative_close(analytic, numeric),
                    "class {c} param {f}: {analytic} vs {numeric}"
                );
            }
        }
    }
}

pub fn boosting_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..100 {
        let k = rng.gen_range(2..6);
        let scores: Vec<f64> = (0..k).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let target = rng.gen_range(0..k);
        let (grad, hess) = softmax_grad_hess(&scores, target);
        let h = 1e-5;
        for c in 0..k {
            let at = |delta: f64| {
                let mut s = scores.clone();
                s[c] += delta;
                softmax_loss(&s, target)
            };
            let numeric = (at(h) - at(-h)) / (2.0 * h);
            assert!(relative_close(grad[c], numeric));
            // The stored hessian is twice the diagonal curvature.
            let curvature = (at(h) - 2.0 * at(0.0) + at(-h)) / (h * h);
            assert!((hess[c] / 2.0 - curvature).abs() < 1e-3);
        }
        // Binary problems boost a single margin under the logistic loss.
        let m = scores[0];
        let y = target == 0;
        let loss = |m: f64| {
            let p = 1.0 / (1.0 + (-m).exp());
            if y {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        };
        let (g, hs) = logistic_grad_hess(m, y);
        assert!(relative_close(g, (loss(m + h) - loss(m - h)) / (2.0 * h)));
        assert!((hs - (loss(m + h) - 2.0 * loss(m) + loss(m - h)) / (h * h)).abs() < 1e-3);
    }
}

pub fn forest_without_randomness_reduces_to_cart() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..100 {
        let (x, y) = random_instance(&mut rng);
        let k = y.iter().max().unwrap() + 1;
        let data = to_dataset(&x, &y);
        let forest = fit_random_forest(
            &data,
            &y,
            k,
            ForestParams {
                n_trees: 1,
                bootstrap: false,
                features_per_split: Some(x[0].len()),
                tree: CartParams::default(),
            },
            rng.gen(),
        );
        assert_eq!(forest.trees[0], fit_cart(&data, &y, k, CartParams::default()));
    }
}

/// Two-class example worked by hand: accuracy 3/4; F1 is 2/3 for A
/// (precision 1, recall 1/2) and 4/5 for B (precision 2/3, recall 1).
pub fn metrics_hand_example() {
    let m = metrics_from_predictions(&[0, 1], &[0, 0, 1, 1], &[0, 1, 1, 1]).unwrap();
    assert_eq!(m.accuracy, 0.75);
    assert!((m.macro_f1 - 11.0 / 15.0).abs() < 1e-9, "{}", m.macro_f1);
    assert!((m.macro_f1 - 0.7333).abs() < 1e-4);
    assert_eq!(m.confusion, vec![vec![1, 1], vec![0, 2]]);
}

pub fn macro_f1_is_invariant_under_relabeling() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    for _ in 0..50 {
        let n = rng.gen_range(1..30);
        let y_true: Vec<u32> = (0..n).map(|_| rng.gen_range(0..4)).collect();
        let y_pred: Vec<u32> = (0..n).map(|_| rng.gen_range(0..4)).collect();
        let perm = [2u32, 0, 3, 1];
        let a = metrics_from_predictions(&[0, 1, 2, 3], &y_true, &y_pred).unwrap();
        let pt: Vec<u32> = y_true.iter().map(|&l| perm[l as usize]).collect();
        let pp: Vec<u32> = y_pred.iter().map(|&l| perm[l as usize]).collect();
        let b = metrics_from_predictions(&[0, 1, 2, 3], &pt, &pp).unwrap();
        assert!((a.macro_f1 - b.macro_f1).abs() < 1e-12);
        assert_eq!(a.accuracy, b.accuracy);
        let trace: u64 = (0..4).map(|i| a.confusion[i][i]).sum();
        let total: u64 = a.confusion.iter().flatten().sum();
        assert_eq!(total, n as u64);
        assert_eq!(a.accuracy, trace as f64 / total as f64);
    }
}
