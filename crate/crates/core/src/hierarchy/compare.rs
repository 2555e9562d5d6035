use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::HierarchyError;
use crate::classes::WindowClass;
use crate::features::FeatureVector;
use crate::learners::{evaluate, fit, stratified_split, Algorithm, Dataset, EvalMetrics, ModelSpec, TrainedModel};

pub const COMPARISON_CSV_HEADER: &str = "algorithm,hier_acc,flat_acc,acc_pct,hier_f1,flat_f1,f1_pct,time_pct";

/// Merges Step 1 and Step 2 windows into the six-class space. Windows are
/// matched by start time; a Step 2 label replaces a Step 1 `0`, and a
/// window carrying an incident in Step 1 and a Step 2 row is a conflict.
/// Unlabeled vectors are skipped. Output is ordered by window start.
pub fn flat_vectors(ni: &[FeatureVector], na: &[FeatureVector]) -> Result<Vec<FeatureVector>, HierarchyError> {
    let mut merged: BTreeMap<u64, FeatureVector> = BTreeMap::new();
    for fv in ni {
        if let Some(label) = fv.label {
            if label > 3 {
                return Err(HierarchyError::Label {
                    step: super::Step::One,
                    label,
                });
            }
            merged.insert(fv.window_start, fv.clone());
        }
    }
    for fv in na {
        let Some(label) = fv.label else { continue };
        if label > 2 {
            return Err(HierarchyError::Label {
                step: super::Step::Two,
                label,
            });
        }
        let flat = if label == 0 { 0 } else { 3 + label };
        match merged.get(&fv.window_start).and_then(|m| m.label) {
            Some(l) if l != 0 => {
                return Err(HierarchyError::Conflict {
                    window: fv.window_start,
                })
            }
            _ => {
                merged.insert(fv.window_start, fv.clone().with_label(flat));
            }
        }
    }
    Ok(merged.into_values().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatResult {
    pub algorithm: Algorithm,
    pub metrics: EvalMetrics,
}

/// Trains one model on the merged six-class data with the standard split.
pub fn run_flat(
    spec: &ModelSpec,
    ni: &[FeatureVector],
    na: &[FeatureVector],
    train_fraction: f64,
    seed: u64,
) -> Result<(TrainedModel, FlatResult), HierarchyError> {
    let flat = Dataset::from_vectors(&flat_vectors(ni, na)?)?;
    debug_assert!(flat
        .class_set()
        .iter()
        .all(|&l| WindowClass::from_flat_label(l).is_some()));
    let (train, test) = stratified_split(&flat, train_fraction, seed)?;
    let model = fit(spec, &train)?;
    let metrics = evaluate(&model, &test)?;
    Ok((
        model,
        FlatResult {
            algorithm: spec.algorithm(),
            metrics,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierResult {
    pub algorithm: Algorithm,
    pub step1: EvalMetrics,
    pub step2: EvalMetrics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SideMetrics {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub training_time: f64,
}

impl HierResult {
    /// Mean of the two steps' test metrics; time is the sum of both fits.
    pub fn summary(&self) -> SideMetrics {
        SideMetrics {
            accuracy: (self.step1.accuracy + self.step2.accuracy) / 2.0,
            macro_f1: (self.step1.macro_f1 + self.step2.macro_f1) / 2.0,
            training_time: self.step1.training_time + self.step2.training_time,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmComparison {
    pub algorithm: Algorithm,
    pub hierarchical: SideMetrics,
    pub flat: SideMetrics,
    /// `None` when the denominator is zero.
    pub accuracy_pct: Option<f64>,
    pub f1_pct: Option<f64>,
    pub time_efficiency_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<AlgorithmComparison>,
}

fn pct(num: f64, den: f64) -> Option<f64> {
    if den == 0.0 {
        None
    } else {
        Some((1000.0 * num / den).round() / 10.0)
    }
}

/// Pairs results by algorithm, in the order of `hier`.
pub fn compare(hier: &[HierResult], flat: &[FlatResult]) -> Result<ComparisonReport, HierarchyError> {
    if let Some(f) = flat.iter().find(|f| !hier.iter().any(|h| h.algorithm == f.algorithm)) {
        return Err(HierarchyError::Unpaired(f.algorithm.to_string()));
    }
    let rows = hier
        .iter()
        .map(|h| {
            let f = flat
                .iter()
                .find(|f| f.algorithm == h.algorithm)
                .ok_or_else(|| HierarchyError::Unpaired(h.algorithm.to_string()))?;
            let hs = h.summary();
            let fs = SideMetrics {
                accuracy: f.metrics.accuracy,
                macro_f1: f.metrics.macro_f1,
                training_time: f.metrics.training_time,
            };
            Ok(AlgorithmComparison {
                algorithm: h.algorithm,
                hierarchical: hs,
                flat: fs,
                accuracy_pct: pct(hs.accuracy, fs.accuracy),
                f1_pct: pct(hs.macro_f1, fs.macro_f1),
                time_efficiency_pct: pct(fs.training_time, hs.training_time),
            })
        })
        .collect::<Result<Vec<_>, HierarchyError>>()?;
    Ok(ComparisonReport { rows })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.1}"))
}

impl ComparisonReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{COMPARISON_CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{:.6},{:.6},{},{:.6},{:.6},{},{}",
                r.algorithm,
                r.hierarchical.accuracy,
                r.flat.accuracy,
                cell(r.accuracy_pct),
                r.hierarchical.macro_f1,
                r.flat.macro_f1,
                cell(r.f1_pct),
                cell(r.time_efficiency_pct),
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::metrics_from_predictions;

    fn metrics(accuracy: f64, f1: f64, time: f64) -> EvalMetrics {
        let mut m = metrics_from_predictions(&[0], &[0], &[0]).unwrap();
        m.accuracy = accuracy;
        m.macro_f1 = f1;
        m.training_time = time;
        m
    }

    fn hier(acc: f64, f1: f64, time: f64) -> HierResult {
        HierResult {
            algorithm: Algorithm::GradientBoost,
            step1: metrics(acc, f1, time / 2.0),
            step2: metrics(acc, f1, time / 2.0),
        }
    }

    fn flat(acc: f64, f1: f64, time: f64) -> FlatResult {
        FlatResult {
            algorithm: Algorithm::GradientBoost,
            metrics: metrics(acc, f1, time),
        }
    }

    #[test]
    fn ratio_arithmetic() {
        let r = compare(&[hier(0.555, 0.9, 1.0)], &[flat(0.5, 0.9, 1.411)]).unwrap();
        assert_eq!(r.rows[0].accuracy_pct, Some(111.0));
        assert_eq!(r.rows[0].f1_pct, Some(100.0));
        assert_eq!(r.rows[0].time_efficiency_pct, Some(141.1));
    }

    #[test]
    fn identical_sides_give_hundred() {
        let r = compare(&[hier(0.8, 0.7, 2.0)], &[flat(0.8, 0.7, 2.0)]).unwrap();
        let row = &r.rows[0];
        assert_eq!(
            (row.accuracy_pct, row.f1_pct, row.time_efficiency_pct),
            (Some(100.0), Some(100.0), Some(100.0))
        );
    }

    #[test]
    fn zero_denominator_is_undefined() {
        let r = compare(&[hier(0.5, 0.5, 1.0)], &[flat(0.0, 0.0, 1.0)]).unwrap();
        assert_eq!(r.rows[0].accuracy_pct, None);
        let mut csv = Vec::new();
        r.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with(COMPARISON_CSV_HEADER));
        assert!(text.lines().nth(1).unwrap().contains(",NA,"));
    }

    #[test]
    fn unpaired_algorithms_rejected() {
        let mut f = flat(0.5, 0.5, 1.0);
        f.algorithm = Algorithm::Knn;
        assert!(matches!(
            compare(&[hier(0.5, 0.5, 1.0)], &[f]),
            Err(HierarchyError::Unpaired(_))
        ));
    }

    #[test]
    fn flat_merge_remaps_labels() {
        let ni = vec![
            FeatureVector::zeros(0).with_label(3),
            FeatureVector::zeros(60).with_label(0),
            FeatureVector::zeros(120).with_label(0),
        ];
        let na = vec![
            FeatureVector::zeros(60).with_label(2),
            FeatureVector::zeros(120).with_label(0),
        ];
        let flat = flat_vectors(&ni, &na).unwrap();
        let labels: Vec<_> = flat.iter().map(|f| f.label.unwrap()).collect();
        assert_eq!(labels, [3, 5, 0]);
        let clash = vec![FeatureVector::zeros(0).with_label(1)];
        assert!(matches!(
            flat_vectors(&ni, &clash),
            Err(HierarchyError::Conflict { window: 0 })
        ));
    }
}
