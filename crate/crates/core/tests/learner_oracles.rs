//! Learners checked against independent brute-force and closed-form oracles.

mod common;

use common::learners as oracle;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sicn_core::learners::{evaluate, fit, stratified_split, Algorithm, Dataset, ModelSpec};

#[test]
fn cart_matches_brute_force_oracle() {
    oracle::cart_matches_brute_force_oracle();
}

#[test]
fn knn_matches_brute_force_oracle() {
    oracle::knn_matches_brute_force_oracle();
}

#[test]
fn gaussian_nb_closed_form_posterior() {
    oracle::gaussian_nb_closed_form_posterior();
}

#[test]
fn logistic_gradient_matches_finite_differences() {
    oracle::logistic_gradient_matches_finite_differences();
}

#[test]
fn boosting_gradient_matches_finite_differences() {
    oracle::boosting_gradient_matches_finite_differences();
}

#[test]
fn forest_without_randomness_reduces_to_cart() {
    oracle::forest_without_randomness_reduces_to_cart();
}

#[test]
fn metrics_hand_example() {
    oracle::metrics_hand_example();
}

#[test]
fn macro_f1_is_invariant_under_relabeling() {
    oracle::macro_f1_is_invariant_under_relabeling();
}

fn wide_margin(rng: &mut ChaCha8Rng, n: usize) -> Dataset {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let class = (i % 3) as u32;
        let centre = class as f64 * 100.0;
        rows.push((0..5).map(|_| centre + rng.gen_range(-5.0..5.0)).collect());
        labels.push(class);
    }
    Dataset::new(rows, labels).unwrap()
}

#[test]
fn forest_separates_wide_margin_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let data = wide_margin(&mut rng, 150);
    let (train, test) = stratified_split(&data, 0.6, 3).unwrap();
    let spec = ModelSpec::default_for(Algorithm::RandomForest, 8)
        .with("n_estimators", 200.0)
        .unwrap();
    let model = fit(&spec, &train).unwrap();
    assert_eq!(evaluate(&model, &test).unwrap().accuracy, 1.0);
}

#[test]
fn forest_is_schedule_independent() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let data = wide_margin(&mut rng, 90);
    let spec = ModelSpec::default_for(Algorithm::RandomForest, 21)
        .with("n_estimators", 40.0)
        .unwrap();
    let models: Vec<_> = [1, 4]
        .into_iter()
        .map(|threads| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| fit(&spec, &data).unwrap())
        })
        .collect();
    assert_eq!(models[0].to_json(), models[1].to_json());
}

#[test]
fn boosting_loss_never_increases() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..300 {
        let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let label = if x[0] + 0.5 * x[1] > 0.3 {
            2
        } else if x[2] > 0.0 {
            1
        } else {
            0
        };
        rows.push(x);
        labels.push(label);
    }
    let data = Dataset::new(rows, labels).unwrap();
    let spec = ModelSpec::default_for(Algorithm::GradientBoost, 0);
    let model = fit(&spec, &data).unwrap();
    let sicn_core::learners::Fitted::GradientBoost(b) = &model.fitted else {
        panic!("expected a booster")
    };
    assert_eq!(b.loss_trace.len(), 101);
    assert!(b.loss_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    assert!(b.loss_trace.last().unwrap() < &b.loss_trace[0]);
}
