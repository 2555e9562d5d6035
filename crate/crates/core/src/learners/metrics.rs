use serde::{Deserialize, Serialize};

use super::{Dataset, LearnError, TrainedModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: u32,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub classes: Vec<u32>,
    pub per_class: Vec<ClassMetrics>,
    /// `confusion[true][predicted]`, indexed like `classes`.
    pub confusion: Vec<Vec<u64>>,
    /// Seconds spent fitting the evaluated model.
    pub training_time: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Metrics over `classes` (sorted ascending). Any label outside it is an
/// error; classes absent from both sides still count toward macro-F1.
pub fn metrics_from_predictions(classes: &[u32], y_true: &[u32], y_pred: &[u32]) -> Result<EvalMetrics, LearnError> {
    if y_true.is_empty() {
        return Err(LearnError::Empty("evaluation needs test rows".into()));
    }
    if y_true.len() != y_pred.len() {
        return Err(LearnError::Arity {
            row: y_true.len().min(y_pred.len()) + 1,
            expected: y_true.len(),
            found: y_pred.len(),
        });
    }
    let index = |l: u32| classes.binary_search(&l).map_err(|_| LearnError::UnknownLabel(l));
    let k = classes.len();
    let mut confusion = vec![vec![0u64; k]; k];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        confusion[index(t)?][index(p)?] += 1;
    }
    let total = y_true.len() as u64;
    let trace: u64 = (0..k).map(|i| confusion[i][i]).sum();
    let per_class: Vec<ClassMetrics> = classes
        .iter()
        .enumerate()
        .map(|(c, &label)| {
            let tp = confusion[c][c];
            let support: u64 = confusion[c].iter().sum();
            let predicted: u64 = confusion.iter().map(|row| row[c]).sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassMetrics {
                label,
                precision,
                recall,
                f1,
                support,
            }
        })
        .collect();
    let macro_f1 = per_class.iter().map(|m| m.f1).sum::<f64>() / k as f64;
    Ok(EvalMetrics {
        accuracy: ratio(trace, total),
        macro_f1,
        classes: classes.to_vec(),
        per_class,
        confusion,
        training_time: 0.0,
    })
}

pub fn evaluate(model: &TrainedModel, test: &Dataset) -> Result<EvalMetrics, LearnError> {
    let predicted = model.predict_dataset(test)?;
    let mut m = metrics_from_predictions(&model.classes, test.labels(), &predicted)?;
    m.training_time = model.training_time;
    Ok(m)
}
