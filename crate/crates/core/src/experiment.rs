//! End-to-end experiments: simulate → featurize → label → split → train
//! (hierarchical and flat) → evaluate → compare → diagnose → plan.
//!
//! Every stage reads and writes plain files under the output directory, so
//! the CLI subcommands can run stages one at a time and reach the same
//! outputs as [`run_experiment`]. Output layout:
//!
//! ```text
//! stream.mrt  stream.txt  ground_truth.csv
//! datasets/{ni,na,flat}.csv
//! models/<algorithm>.pipeline.json  models/<algorithm>.flat.json  models/training_times.json
//! evaluation.json  metrics.csv  metrics.json
//! comparison.csv  comparison.json
//! diagnoses.jsonl  mitigation.jsonl
//! timings.json
//! ```
//!
//! Wall-clock measurements live in `timings.json`,
//! `models/training_times.json`, `evaluation.json` and the time columns of
//! the comparison; everything else is a pure function of the config.
//!
//! Seeds: the simulator takes the config seed; the split uses
//! `derive_seed(seed, "split")`; each model uses
//! `derive_seed(seed, "<algorithm>/<step1|step2|flat>")`.

use std::collections::{BTreeMap, BTreeSet};
use std::error::Error as StdError;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bgp::{parse_mrt, serialize_mrt, write_update_text, BgpUpdateRecord};
use crate::classes::WindowClass;
use crate::features::{
    featurize_stream, label_windows, read_dataset_file, read_ground_truth_file, to_file_precision, write_dataset_file,
    write_ground_truth, FeatureVector, GroundTruthInterval,
};
use crate::hierarchy::{
    compare, diagnose, flat_vectors, run_flat, train_pipeline, ComparisonReport, Diagnosis, FlatResult, HierResult,
    PipelineModel, PipelineSpec, RootCause, Verdict,
};
use crate::learners::{
    evaluate, metrics_from_predictions, stratified_split_indices, Algorithm, ClassMetrics, Dataset, EvalMetrics,
    HyperValue, ModelSpec, TrainedModel,
};
use crate::mitigation::{plan, MitigationPlan};
use crate::seed::derive_seed;
use crate::simnet::{generate_stream, Scenario, Topology};

pub const DEFAULT_WINDOW_SECONDS: i64 = 60;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.6;
pub const METRICS_CSV_HEADER: &str =
    "algorithm,step1_accuracy,step1_f1,step2_accuracy,step2_f1,flat_accuracy,flat_f1,e2e_accuracy,e2e_f1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Simulate,
    Featurize,
    Train,
    Evaluate,
    Compare,
    Pipeline,
    Mitigate,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Simulate => "simulate",
            Stage::Featurize => "featurize",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Compare => "compare",
            Stage::Pipeline => "pipeline",
            Stage::Mitigate => "mitigate",
        })
    }
}

#[derive(Debug, Error)]
#[error("{stage} stage failed: {source}")]
pub struct ExperimentError {
    pub stage: Stage,
    #[source]
    pub source: Box<dyn StdError + Send + Sync>,
}

impl ExperimentError {
    pub fn new(stage: Stage, source: impl Into<Box<dyn StdError + Send + Sync>>) -> Self {
        Self {
            stage,
            source: source.into(),
        }
    }
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, ExperimentError>;
}

impl<T, E: Into<Box<dyn StdError + Send + Sync>>> AtStage<T> for Result<T, E> {
    fn at(self, stage: Stage) -> Result<T, ExperimentError> {
        self.map_err(|e| ExperimentError::new(stage, e))
    }
}

fn default_window() -> i64 {
    DEFAULT_WINDOW_SECONDS
}

fn default_fraction() -> f64 {
    DEFAULT_TRAIN_FRACTION
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn yes() -> bool {
    true
}

/// One algorithm and its per-step hyperparameters. Omitted maps fall back
/// to the pipeline defaults; `flat` defaults to `step1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub name: String,
    #[serde(default)]
    pub step1: BTreeMap<String, HyperValue>,
    #[serde(default)]
    pub step2: BTreeMap<String, HyperValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flat: Option<BTreeMap<String, HyperValue>>,
}

impl AlgorithmConfig {
    pub fn named(name: &str) -> Self {
        Self {
            name: name.to_string(),
            step1: BTreeMap::new(),
            step2: BTreeMap::new(),
            flat: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Topology document; the built-in reference topology when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology: Option<PathBuf>,
    pub scenario: PathBuf,
    #[serde(default = "default_window")]
    pub window_seconds: i64,
    #[serde(default = "default_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    pub algorithms: Vec<AlgorithmConfig>,
    /// Algorithm whose pipeline produces the diagnosis and mitigation logs;
    /// `random_forest` when listed, else the first algorithm.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnose_with: Option<String>,
    /// Write `stream.mrt` / `stream.txt`.
    #[serde(default = "yes")]
    pub write_stream: bool,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ExperimentError> {
        toml::from_str(text).at(Stage::Config)
    }

    pub fn from_json_str(text: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(text).at(Stage::Config)
    }

    /// Reads `.json` as JSON and anything else as TOML. Relative paths are
    /// resolved against the config file's directory.
    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ExperimentError::new(Stage::Config, format!("{}: {e}", path.display())))?;
        let mut cfg = if path.extension().is_some_and(|e| e == "json") {
            Self::from_json_str(&text)?
        } else {
            Self::from_toml_str(&text)?
        };
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(t) = cfg.topology.as_mut() {
            resolve(t);
        }
        resolve(&mut cfg.scenario);
        resolve(&mut cfg.output_dir);
        Ok(cfg)
    }

    /// Checks everything that can be checked without running a stage.
    pub fn validate(&self) -> Result<Vec<AlgorithmPlan>, ExperimentError> {
        let bad = |msg: String| ExperimentError::new(Stage::Config, msg);
        for p in self.topology.iter().chain([&self.scenario]) {
            if !p.is_file() {
                return Err(bad(format!("{} does not exist", p.display())));
            }
        }
        if self.window_seconds <= 0 {
            return Err(bad(format!(
                "window_seconds must be positive, got {}",
                self.window_seconds
            )));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(bad(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if self.algorithms.is_empty() {
            return Err(bad("no algorithms configured".into()));
        }
        let plans = self.algorithm_plans()?;
        let mut seen = BTreeSet::new();
        for p in &plans {
            if !seen.insert(p.algorithm) {
                return Err(bad(format!("algorithm {} listed twice", p.algorithm)));
            }
        }
        if let Some(d) = &self.diagnose_with {
            if !plans.iter().any(|p| p.algorithm.name() == d) {
                return Err(bad(format!("diagnose_with names {d}, which is not configured")));
            }
        }
        Ok(plans)
    }

    pub fn algorithm_plans(&self) -> Result<Vec<AlgorithmPlan>, ExperimentError> {
        self.algorithms
            .iter()
            .map(|a| AlgorithmPlan::from_config(a, self.seed))
            .collect()
    }

    pub fn diagnosis_algorithm(&self, plans: &[AlgorithmPlan]) -> Algorithm {
        if let Some(a) = self.diagnose_with.as_deref().and_then(|d| d.parse().ok()) {
            return a;
        }
        plans
            .iter()
            .map(|p| p.algorithm)
            .find(|&a| a == Algorithm::RandomForest)
            .unwrap_or(plans[0].algorithm)
    }

    pub fn load_topology(&self) -> Result<Topology, ExperimentError> {
        match &self.topology {
            Some(p) => Topology::load(p).at(Stage::Config),
            None => Ok(Topology::reference()),
        }
    }

    /// The scenario with the generator seed replaced by the config seed.
    pub fn load_scenario(&self) -> Result<Scenario, ExperimentError> {
        let mut s = Scenario::load(&self.scenario).at(Stage::Config)?;
        s.gen.seed = self.seed;
        Ok(s)
    }

    pub fn split_seed(&self) -> u64 {
        derive_seed(self.seed, "split")
    }
}

/// Per-step defaults used when a config leaves a step's map empty.
pub fn pipeline_defaults(algorithm: Algorithm) -> [BTreeMap<String, HyperValue>; 2] {
    let map = |pairs: &[(&str, f64)]| -> BTreeMap<String, HyperValue> {
        pairs
            .iter()
            .map(|&(k, v)| (k.to_string(), HyperValue::Number(v)))
            .collect()
    };
    match algorithm {
        Algorithm::Knn => [map(&[("k", 6.0)]), map(&[("k", 3.0)])],
        Algorithm::RandomForest => [map(&[("n_estimators", 200.0)]), map(&[("n_estimators", 60.0)])],
        Algorithm::GradientBoost => [
            map(&[("n_estimators", 100.0), ("max_depth", 3.0), ("min_child_weight", 1.0)]),
            map(&[("n_estimators", 100.0), ("max_depth", 1.0), ("min_child_weight", 3.0)]),
        ],
        _ => [BTreeMap::new(), BTreeMap::new()],
    }
}

/// Resolved specs for one configured algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmPlan {
    pub algorithm: Algorithm,
    pub pipeline: PipelineSpec,
    pub flat: ModelSpec,
}

impl AlgorithmPlan {
    pub fn from_config(cfg: &AlgorithmConfig, seed: u64) -> Result<Self, ExperimentError> {
        let algorithm: Algorithm = cfg.name.parse().map_err(|_| {
            let names: Vec<&str> = Algorithm::ALL.iter().map(|a| a.name()).collect();
            ExperimentError::new(
                Stage::Config,
                format!("unsupported algorithm `{}` (supported: {})", cfg.name, names.join(", ")),
            )
        })?;
        let [d1, d2] = pipeline_defaults(algorithm);
        let merged = |defaults: BTreeMap<String, HyperValue>, given: &BTreeMap<String, HyperValue>| {
            let mut m = defaults;
            m.extend(given.iter().map(|(k, v)| (k.clone(), *v)));
            m
        };
        let h1 = merged(d1, &cfg.step1);
        let h2 = merged(d2, &cfg.step2);
        let hf = cfg.flat.clone().unwrap_or_else(|| h1.clone());
        let spec = |map, tag: &str| {
            ModelSpec::new(
                algorithm,
                map,
                derive_seed(seed, &format!("{}/{tag}", algorithm.name())),
            )
            .map_err(|e| ExperimentError::new(Stage::Config, format!("{algorithm} {tag}: {e}")))
        };
        let pipeline = PipelineSpec::new(spec(h1, "step1")?, spec(h2, "step2")?).at(Stage::Config)?;
        Ok(Self {
            algorithm,
            pipeline,
            flat: spec(hf, "flat")?,
        })
    }
}

fn create_dir(path: &Path, stage: Stage) -> Result<(), ExperimentError> {
    fs::create_dir_all(path).map_err(|e| ExperimentError::new(stage, format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str, stage: Stage) -> Result<(), ExperimentError> {
    if let Some(dir) = path.parent() {
        create_dir(dir, stage)?;
    }
    fs::write(path, text).map_err(|e| ExperimentError::new(stage, format!("{}: {e}", path.display())))
}

fn read_text(path: &Path, stage: Stage) -> Result<String, ExperimentError> {
    fs::read_to_string(path).map_err(|e| ExperimentError::new(stage, format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

// ---------------------------------------------------------------- simulate

pub fn write_stream(out: &Path, records: &[BgpUpdateRecord], stage: Stage) -> Result<(), ExperimentError> {
    create_dir(out, stage)?;
    let mut mrt = BufWriter::new(fs::File::create(out.join("stream.mrt")).at(stage)?);
    for r in records {
        mrt.write_all(&serialize_mrt(r).at(stage)?).at(stage)?;
    }
    mrt.flush().at(stage)?;
    let txt = BufWriter::new(fs::File::create(out.join("stream.txt")).at(stage)?);
    write_update_text(txt, records).at(stage)
}

/// Generates the stream and ground truth; writes `stream.*` and
/// `ground_truth.csv`.
pub fn stage_simulate(
    cfg: &ExperimentConfig,
    topology: &Topology,
) -> Result<(Vec<BgpUpdateRecord>, Vec<GroundTruthInterval>), ExperimentError> {
    let scenario = cfg.load_scenario()?;
    let (records, truth) = generate_stream(topology, &scenario).at(Stage::Simulate)?;
    create_dir(&cfg.output_dir, Stage::Simulate)?;
    if cfg.write_stream {
        write_stream(&cfg.output_dir, &records, Stage::Simulate)?;
    }
    let gt = fs::File::create(cfg.output_dir.join("ground_truth.csv")).at(Stage::Simulate)?;
    write_ground_truth(gt, &truth).at(Stage::Simulate)?;
    Ok((records, truth))
}

pub fn load_stream(out: &Path) -> Result<(Vec<BgpUpdateRecord>, Vec<GroundTruthInterval>), ExperimentError> {
    let bytes = fs::read(out.join("stream.mrt")).at(Stage::Featurize)?;
    let (records, stats) = parse_mrt(&bytes);
    if stats.total() != stats.records_emitted || stats.abort.is_some() {
        return Err(ExperimentError::new(
            Stage::Featurize,
            format!(
                "stream.mrt: {} of {} records unreadable",
                stats.total() - stats.records_emitted,
                stats.total()
            ),
        ));
    }
    let truth = read_ground_truth_file(&out.join("ground_truth.csv")).at(Stage::Featurize)?;
    Ok((records, truth))
}

// ---------------------------------------------------------------- featurize

/// Labeled views of one featurized stream, in window order.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledWindows {
    /// Every window, Step 1 labels.
    pub ni: Vec<FeatureVector>,
    /// Non-intrusion windows, Step 2 labels.
    pub na: Vec<FeatureVector>,
    /// Every window, six-class labels.
    pub flat: Vec<FeatureVector>,
}

pub fn build_datasets(
    records: Vec<BgpUpdateRecord>,
    truth: &[GroundTruthInterval],
    window_seconds: i64,
    t0: u64,
) -> Result<LabeledWindows, ExperimentError> {
    let mut vectors = featurize_stream(records, window_seconds, t0).at(Stage::Featurize)?;
    // Train on exactly what the dataset files hold, so staged runs match.
    for fv in &mut vectors {
        fv.values.iter_mut().for_each(|v| *v = to_file_precision(*v));
    }
    let classes = label_windows(&vectors, window_seconds as u64, truth).at(Stage::Featurize)?;
    let mut out = LabeledWindows {
        ni: Vec::with_capacity(vectors.len()),
        na: Vec::with_capacity(vectors.len()),
        flat: Vec::with_capacity(vectors.len()),
    };
    for (fv, class) in vectors.into_iter().zip(classes) {
        if let Some(l2) = class.step2_label() {
            out.na.push(fv.clone().with_label(l2));
        }
        out.flat.push(fv.clone().with_label(class.flat_label()));
        out.ni.push(fv.with_label(class.step1_label()));
    }
    Ok(out)
}

pub fn stage_featurize(
    cfg: &ExperimentConfig,
    records: Vec<BgpUpdateRecord>,
    truth: &[GroundTruthInterval],
) -> Result<LabeledWindows, ExperimentError> {
    let t0 = cfg.load_scenario()?.start;
    let data = build_datasets(records, truth, cfg.window_seconds, t0)?;
    let dir = cfg.output_dir.join("datasets");
    create_dir(&dir, Stage::Featurize)?;
    for (name, set) in [("ni", &data.ni), ("na", &data.na), ("flat", &data.flat)] {
        write_dataset_file(&dir.join(format!("{name}.csv")), set).at(Stage::Featurize)?;
    }
    Ok(data)
}

pub fn load_datasets(out: &Path, stage: Stage) -> Result<(Vec<FeatureVector>, Vec<FeatureVector>), ExperimentError> {
    let dir = out.join("datasets");
    let ni = read_dataset_file(&dir.join("ni.csv")).at(stage)?;
    let na = read_dataset_file(&dir.join("na.csv")).at(stage)?;
    Ok((ni, na))
}

// ---------------------------------------------------------------- split

/// One window partition shared by both steps and the flat baseline: a
/// stratified split of the six-class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitViews {
    pub ni_train: Vec<FeatureVector>,
    pub ni_test: Vec<FeatureVector>,
    pub na_train: Vec<FeatureVector>,
    pub na_test: Vec<FeatureVector>,
    pub flat_train: Vec<FeatureVector>,
    pub flat_test: Vec<FeatureVector>,
}

pub fn split_views(
    ni: &[FeatureVector],
    na: &[FeatureVector],
    train_fraction: f64,
    seed: u64,
) -> Result<SplitViews, ExperimentError> {
    let flat = flat_vectors(ni, na).at(Stage::Train)?;
    let labels: Vec<u32> = flat.iter().map(|f| f.label.unwrap_or(0)).collect();
    let (train, test) = stratified_split_indices(&labels, train_fraction, seed).at(Stage::Train)?;
    let train_windows: BTreeSet<u64> = train.iter().map(|&i| flat[i].window_start).collect();
    let part = |set: &[FeatureVector]| -> (Vec<FeatureVector>, Vec<FeatureVector>) {
        set.iter()
            .filter(|f| f.label.is_some())
            .cloned()
            .partition(|f| train_windows.contains(&f.window_start))
    };
    let (ni_train, ni_test) = part(ni);
    let (na_train, na_test) = part(na);
    Ok(SplitViews {
        ni_train,
        ni_test,
        na_train,
        na_test,
        flat_train: train.iter().map(|&i| flat[i].clone()).collect(),
        flat_test: test.iter().map(|&i| flat[i].clone()).collect(),
    })
}

// ---------------------------------------------------------------- train

#[derive(Debug)]
pub struct TrainedAlgorithm {
    pub algorithm: Algorithm,
    pub pipeline: PipelineModel,
    pub flat: TrainedModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingTimes {
    pub step1: f64,
    pub step2: f64,
    pub flat: f64,
}

impl TrainedAlgorithm {
    pub fn times(&self) -> TrainingTimes {
        TrainingTimes {
            step1: self.pipeline.step1.training_time,
            step2: self.pipeline.step2.training_time,
            flat: self.flat.training_time,
        }
    }
}

/// Trains the hierarchical pipeline and the flat baseline of one algorithm
/// on the shared partition.
pub fn train_algorithm(
    plan: &AlgorithmPlan,
    views: &SplitViews,
    ni: &[FeatureVector],
    na: &[FeatureVector],
    train_fraction: f64,
    split_seed: u64,
) -> Result<TrainedAlgorithm, ExperimentError> {
    let ni_train = Dataset::from_vectors(&views.ni_train).at(Stage::Train)?;
    let na_train = Dataset::from_vectors(&views.na_train).at(Stage::Train)?;
    let pipeline = train_pipeline(&ni_train, &na_train, &plan.pipeline).at(Stage::Train)?;
    let (flat, _) = run_flat(&plan.flat, ni, na, train_fraction, split_seed).at(Stage::Train)?;
    Ok(TrainedAlgorithm {
        algorithm: plan.algorithm,
        pipeline,
        flat,
    })
}

fn model_path(out: &Path, algorithm: Algorithm, kind: &str) -> PathBuf {
    out.join("models").join(format!("{}.{kind}.json", algorithm.name()))
}

pub fn stage_train(
    cfg: &ExperimentConfig,
    plans: &[AlgorithmPlan],
    ni: &[FeatureVector],
    na: &[FeatureVector],
) -> Result<Vec<TrainedAlgorithm>, ExperimentError> {
    let views = split_views(ni, na, cfg.train_fraction, cfg.split_seed())?;
    let mut trained = Vec::with_capacity(plans.len());
    let mut times = BTreeMap::new();
    for plan in plans {
        log::info!("training {}", plan.algorithm);
        let t = train_algorithm(plan, &views, ni, na, cfg.train_fraction, cfg.split_seed())?;
        write_text(
            &model_path(&cfg.output_dir, t.algorithm, "pipeline"),
            &t.pipeline.to_json(),
            Stage::Train,
        )?;
        write_text(
            &model_path(&cfg.output_dir, t.algorithm, "flat"),
            &t.flat.to_json(),
            Stage::Train,
        )?;
        times.insert(t.algorithm.name().to_string(), t.times());
        trained.push(t);
    }
    write_text(
        &cfg.output_dir.join("models/training_times.json"),
        &to_json(&times),
        Stage::Train,
    )?;
    Ok(trained)
}

/// Reads the models written by [`stage_train`], with their fit times.
pub fn load_models(
    out: &Path,
    plans: &[AlgorithmPlan],
    stage: Stage,
) -> Result<Vec<TrainedAlgorithm>, ExperimentError> {
    let times: BTreeMap<String, TrainingTimes> =
        serde_json::from_str(&read_text(&out.join("models/training_times.json"), stage)?).at(stage)?;
    plans
        .iter()
        .map(|p| {
            let mut pipeline =
                PipelineModel::from_json(&read_text(&model_path(out, p.algorithm, "pipeline"), stage)?).at(stage)?;
            let mut flat =
                TrainedModel::from_json(&read_text(&model_path(out, p.algorithm, "flat"), stage)?).at(stage)?;
            if let Some(t) = times.get(p.algorithm.name()) {
                pipeline.step1.training_time = t.step1;
                pipeline.step2.training_time = t.step2;
                flat.training_time = t.flat;
            }
            Ok(TrainedAlgorithm {
                algorithm: p.algorithm,
                pipeline,
                flat,
            })
        })
        .collect()
}

// ---------------------------------------------------------------- evaluate

/// Test-set scores without timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub classes: Vec<u32>,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: Vec<Vec<u64>>,
}

impl From<&EvalMetrics> for Scores {
    fn from(m: &EvalMetrics) -> Self {
        Self {
            accuracy: m.accuracy,
            macro_f1: m.macro_f1,
            classes: m.classes.clone(),
            per_class: m.per_class.clone(),
            confusion: m.confusion.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmMetrics {
    pub algorithm: Algorithm,
    pub step1: EvalMetrics,
    pub step2: EvalMetrics,
    pub flat: EvalMetrics,
    /// The whole pipeline scored on the six-class test windows.
    pub end_to_end: EvalMetrics,
}

#[derive(Serialize)]
struct MetricsDoc {
    algorithm: Algorithm,
    step1: Scores,
    step2: Scores,
    flat: Scores,
    end_to_end: Scores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub hierarchical: Vec<HierResult>,
    pub flat: Vec<FlatResult>,
}

fn end_to_end(
    pipeline: &PipelineModel,
    test: &[FeatureVector],
    topology: &Topology,
) -> Result<EvalMetrics, ExperimentError> {
    let mut truth = Vec::with_capacity(test.len());
    let mut pred = Vec::with_capacity(test.len());
    for fv in test {
        truth.push(fv.label.unwrap_or(0));
        pred.push(
            diagnose(pipeline, fv, topology)
                .at(Stage::Evaluate)?
                .verdict
                .flat_label(),
        );
    }
    let classes: Vec<u32> = truth
        .iter()
        .chain(&pred)
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    metrics_from_predictions(&classes, &truth, &pred).at(Stage::Evaluate)
}

pub fn evaluate_algorithm(
    t: &TrainedAlgorithm,
    views: &SplitViews,
    topology: &Topology,
) -> Result<AlgorithmMetrics, ExperimentError> {
    let ds = |v: &[FeatureVector]| Dataset::from_vectors(v).at(Stage::Evaluate);
    Ok(AlgorithmMetrics {
        algorithm: t.algorithm,
        step1: evaluate(&t.pipeline.step1, &ds(&views.ni_test)?).at(Stage::Evaluate)?,
        step2: evaluate(&t.pipeline.step2, &ds(&views.na_test)?).at(Stage::Evaluate)?,
        flat: evaluate(&t.flat, &ds(&views.flat_test)?).at(Stage::Evaluate)?,
        end_to_end: end_to_end(&t.pipeline, &views.flat_test, topology)?,
    })
}

pub fn write_metrics_csv<W: Write>(mut out: W, metrics: &[AlgorithmMetrics]) -> std::io::Result<()> {
    writeln!(out, "{METRICS_CSV_HEADER}")?;
    for m in metrics {
        writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            m.algorithm,
            m.step1.accuracy,
            m.step1.macro_f1,
            m.step2.accuracy,
            m.step2.macro_f1,
            m.flat.accuracy,
            m.flat.macro_f1,
            m.end_to_end.accuracy,
            m.end_to_end.macro_f1,
        )?;
    }
    Ok(())
}

pub fn stage_evaluate(
    cfg: &ExperimentConfig,
    trained: &[TrainedAlgorithm],
    ni: &[FeatureVector],
    na: &[FeatureVector],
    topology: &Topology,
) -> Result<Vec<AlgorithmMetrics>, ExperimentError> {
    let views = split_views(ni, na, cfg.train_fraction, cfg.split_seed()).map_err(|e| ExperimentError {
        stage: Stage::Evaluate,
        ..e
    })?;
    let metrics = trained
        .iter()
        .map(|t| evaluate_algorithm(t, &views, topology))
        .collect::<Result<Vec<_>, _>>()?;
    let mut csv = Vec::new();
    write_metrics_csv(&mut csv, &metrics).at(Stage::Evaluate)?;
    write_text(
        &cfg.output_dir.join("metrics.csv"),
        &String::from_utf8_lossy(&csv),
        Stage::Evaluate,
    )?;
    let docs: Vec<MetricsDoc> = metrics
        .iter()
        .map(|m| MetricsDoc {
            algorithm: m.algorithm,
            step1: (&m.step1).into(),
            step2: (&m.step2).into(),
            flat: (&m.flat).into(),
            end_to_end: (&m.end_to_end).into(),
        })
        .collect();
    write_text(&cfg.output_dir.join("metrics.json"), &to_json(&docs), Stage::Evaluate)?;
    write_text(
        &cfg.output_dir.join("evaluation.json"),
        &to_json(&evaluation_of(&metrics)),
        Stage::Evaluate,
    )?;
    Ok(metrics)
}

pub fn evaluation_of(metrics: &[AlgorithmMetrics]) -> Evaluation {
    Evaluation {
        hierarchical: metrics
            .iter()
            .map(|m| HierResult {
                algorithm: m.algorithm,
                step1: m.step1.clone(),
                step2: m.step2.clone(),
            })
            .collect(),
        flat: metrics
            .iter()
            .map(|m| FlatResult {
                algorithm: m.algorithm,
                metrics: m.flat.clone(),
            })
            .collect(),
    }
}

// ---------------------------------------------------------------- compare

pub fn stage_compare(cfg: &ExperimentConfig, evaluation: &Evaluation) -> Result<ComparisonReport, ExperimentError> {
    let report = compare(&evaluation.hierarchical, &evaluation.flat).at(Stage::Compare)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv).at(Stage::Compare)?;
    write_text(
        &cfg.output_dir.join("comparison.csv"),
        &String::from_utf8_lossy(&csv),
        Stage::Compare,
    )?;
    write_text(
        &cfg.output_dir.join("comparison.json"),
        &to_json(&report),
        Stage::Compare,
    )?;
    Ok(report)
}

pub fn load_evaluation(out: &Path) -> Result<Evaluation, ExperimentError> {
    serde_json::from_str(&read_text(&out.join("evaluation.json"), Stage::Compare)?).at(Stage::Compare)
}

// ---------------------------------------------------------------- diagnose & plan

/// One diagnosed test window, as logged (latency is kept out of the log).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisEntry {
    pub t: u64,
    pub truth: WindowClass,
    pub verdict: WindowClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root_cause: Option<RootCause>,
}

impl DiagnosisEntry {
    pub fn diagnosis(&self) -> Diagnosis {
        Diagnosis {
            verdict: Verdict::from(self.verdict),
            root_cause: self.root_cause.clone(),
            identification_latency: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub t: u64,
    #[serde(flatten)]
    pub plan: MitigationPlan,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub windows: usize,
    pub step2_invocations: u64,
    pub mean_seconds: f64,
    pub max_seconds: f64,
}

fn jsonl<T: Serialize>(items: &[T]) -> String {
    let mut s = String::new();
    for item in items {
        s.push_str(&serde_json::to_string(item).expect("log entry serializes"));
        s.push('\n');
    }
    s
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path, stage: Stage) -> Result<Vec<T>, ExperimentError> {
    read_text(path, stage)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).at(stage))
        .collect()
}

/// Runs every test window through one pipeline; writes `diagnoses.jsonl`.
pub fn stage_pipeline(
    cfg: &ExperimentConfig,
    pipeline: &PipelineModel,
    ni: &[FeatureVector],
    na: &[FeatureVector],
    topology: &Topology,
) -> Result<(Vec<DiagnosisEntry>, LatencyStats), ExperimentError> {
    let views = split_views(ni, na, cfg.train_fraction, cfg.split_seed()).map_err(|e| ExperimentError {
        stage: Stage::Pipeline,
        ..e
    })?;
    let before = pipeline.step2_invocations();
    let mut entries = Vec::with_capacity(views.flat_test.len());
    let (mut total, mut max) = (0.0f64, 0.0f64);
    for fv in &views.flat_test {
        let d = diagnose(pipeline, fv, topology).at(Stage::Pipeline)?;
        total += d.identification_latency;
        max = max.max(d.identification_latency);
        let truth = fv
            .label
            .and_then(WindowClass::from_flat_label)
            .unwrap_or(WindowClass::Normal);
        entries.push(DiagnosisEntry {
            t: fv.window_start,
            truth,
            verdict: d.verdict.class(),
            root_cause: d.root_cause,
        });
    }
    write_text(
        &cfg.output_dir.join("diagnoses.jsonl"),
        &jsonl(&entries),
        Stage::Pipeline,
    )?;
    let stats = LatencyStats {
        windows: entries.len(),
        step2_invocations: pipeline.step2_invocations() - before,
        mean_seconds: if entries.is_empty() {
            0.0
        } else {
            total / entries.len() as f64
        },
        max_seconds: max,
    };
    Ok((entries, stats))
}

pub fn load_diagnoses(out: &Path) -> Result<Vec<DiagnosisEntry>, ExperimentError> {
    read_jsonl(&out.join("diagnoses.jsonl"), Stage::Mitigate)
}

/// Plans every non-normal diagnosis; writes `mitigation.jsonl`.
pub fn stage_mitigate(
    cfg: &ExperimentConfig,
    diagnoses: &[DiagnosisEntry],
    topology: &Topology,
) -> Result<Vec<PlanEntry>, ExperimentError> {
    let plans = diagnoses
        .iter()
        .filter(|d| d.verdict != WindowClass::Normal)
        .map(|d| {
            Ok(PlanEntry {
                t: d.t,
                plan: plan(&d.diagnosis(), topology).at(Stage::Mitigate)?,
            })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    write_text(
        &cfg.output_dir.join("mitigation.jsonl"),
        &jsonl(&plans),
        Stage::Mitigate,
    )?;
    Ok(plans)
}

// ---------------------------------------------------------------- run

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    /// Wall-clock seconds per stage.
    pub stages: BTreeMap<String, f64>,
    pub training: BTreeMap<String, TrainingTimes>,
    pub identification_latency: LatencyStats,
}

#[derive(Debug)]
pub struct ExperimentReport {
    pub records: usize,
    pub windows: usize,
    pub metrics: Vec<AlgorithmMetrics>,
    pub comparison: ComparisonReport,
    pub diagnosed_with: Algorithm,
    pub diagnoses: Vec<DiagnosisEntry>,
    pub plans: Vec<PlanEntry>,
    pub timings: Timings,
}

/// Runs every stage. The config is validated before anything runs; on a
/// stage failure the files written so far are left in place.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    let plans = cfg.validate()?;
    let topology = cfg.load_topology()?;
    cfg.load_scenario()?;
    let mut stages = BTreeMap::new();
    let mut clock = Instant::now();
    let mut lap = |name: &str, stages: &mut BTreeMap<String, f64>| {
        stages.insert(name.to_string(), clock.elapsed().as_secs_f64());
        clock = Instant::now();
    };

    let (records, truth) = stage_simulate(cfg, &topology)?;
    let n_records = records.len();
    lap("simulate", &mut stages);
    let data = stage_featurize(cfg, records, &truth)?;
    lap("featurize", &mut stages);
    let trained = stage_train(cfg, &plans, &data.ni, &data.na)?;
    lap("train", &mut stages);
    let metrics = stage_evaluate(cfg, &trained, &data.ni, &data.na, &topology)?;
    lap("evaluate", &mut stages);
    let comparison = stage_compare(cfg, &evaluation_of(&metrics))?;
    lap("compare", &mut stages);
    let diagnosed_with = cfg.diagnosis_algorithm(&plans);
    let chosen = trained
        .iter()
        .find(|t| t.algorithm == diagnosed_with)
        .expect("diagnosis algorithm is configured");
    let (diagnoses, latency) = stage_pipeline(cfg, &chosen.pipeline, &data.ni, &data.na, &topology)?;
    lap("pipeline", &mut stages);
    let plans_log = stage_mitigate(cfg, &diagnoses, &topology)?;
    lap("mitigate", &mut stages);

    let timings = Timings {
        stages,
        training: trained
            .iter()
            .map(|t| (t.algorithm.name().to_string(), t.times()))
            .collect(),
        identification_latency: latency,
    };
    write_text(
        &cfg.output_dir.join("timings.json"),
        &to_json(&timings),
        Stage::Mitigate,
    )?;
    Ok(ExperimentReport {
        records: n_records,
        windows: data.ni.len(),
        metrics,
        comparison,
        diagnosed_with,
        diagnoses,
        plans: plans_log,
        timings,
    })
}
