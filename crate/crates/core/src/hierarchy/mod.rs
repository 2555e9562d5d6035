//! Two-step identification: Step 1 separates intrusion incidents from
//! everything else; windows it calls `0` go to Step 2, which separates
//! normal traffic from link outages and localizes the failed link.

mod compare;

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classes::{FaultClass, IncidentClass, WindowClass};
use crate::features::FeatureVector;
use crate::learners::{fit, Dataset, LearnError, ModelSpec, TrainedModel};
use crate::simnet::Topology;

pub use compare::{
    compare, flat_vectors, run_flat, AlgorithmComparison, ComparisonReport, FlatResult, HierResult, SideMetrics,
    COMPARISON_CSV_HEADER,
};

/// Step 1 labels: 0 other, 1-3 incidents.
pub const STEP1_CLASSES: [u32; 4] = [0, 1, 2, 3];
/// Step 2 labels: 0 normal, 1-2 outages.
pub const STEP2_CLASSES: [u32; 3] = [0, 1, 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Step {
    One,
    Two,
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::One => f.write_str("Step 1"),
            Step::Two => f.write_str("Step 2"),
        }
    }
}

#[derive(Debug, Error)]
pub enum HierarchyError {
    #[error("{step} training set is empty")]
    EmptyStep { step: Step },
    #[error("{step}: label {label} is outside the step's class set")]
    Label { step: Step, label: u32 },
    #[error("{step}: {source}")]
    Learn {
        step: Step,
        #[source]
        source: LearnError,
    },
    #[error(transparent)]
    Model(#[from] LearnError),
    #[error("pipeline steps use different algorithms ({0} and {1})")]
    MixedFamilies(String, String),
    #[error("localization needs a fault class (1 or 2), got {0}")]
    NotAFault(u32),
    #[error("topology has no link between {a} and {b} for fault class {class}")]
    TopologyMismatch { class: u32, a: String, b: String },
    #[error("window {window} is labeled in both datasets")]
    Conflict { window: u64 },
    #[error("algorithm {0} is missing from one side of the comparison")]
    Unpaired(String),
    #[error("pipeline document: {0}")]
    Document(String),
}

/// Per-step model specs; both steps must use the same algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub step1: ModelSpec,
    pub step2: ModelSpec,
}

impl PipelineSpec {
    pub fn new(step1: ModelSpec, step2: ModelSpec) -> Result<Self, HierarchyError> {
        if step1.algorithm() != step2.algorithm() {
            return Err(HierarchyError::MixedFamilies(
                step1.algorithm().to_string(),
                step2.algorithm().to_string(),
            ));
        }
        Ok(Self { step1, step2 })
    }
}

/// The trained Step 1 / Step 2 pair. Counts Step 2 invocations so the
/// short-circuit is observable.
#[derive(Debug, Serialize, Deserialize)]
pub struct PipelineModel {
    pub step1: TrainedModel,
    pub step2: TrainedModel,
    #[serde(skip)]
    step2_calls: AtomicU64,
}

impl PartialEq for PipelineModel {
    fn eq(&self, other: &Self) -> bool {
        self.step1 == other.step1 && self.step2 == other.step2
    }
}

impl PipelineModel {
    pub fn step2_invocations(&self) -> u64 {
        self.step2_calls.load(Ordering::Relaxed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("pipeline serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, HierarchyError> {
        let p: PipelineModel = serde_json::from_str(text).map_err(|e| HierarchyError::Document(e.to_string()))?;
        for (step, model, allowed) in [
            (Step::One, &p.step1, &STEP1_CLASSES[..]),
            (Step::Two, &p.step2, &STEP2_CLASSES[..]),
        ] {
            if let Some(&label) = model.classes.iter().find(|c| !allowed.contains(c)) {
                return Err(HierarchyError::Label { step, label });
            }
        }
        Ok(p)
    }
}

fn check_step(step: Step, data: &Dataset, allowed: &[u32]) -> Result<(), HierarchyError> {
    if data.is_empty() {
        return Err(HierarchyError::EmptyStep { step });
    }
    match data.class_set().iter().find(|c| !allowed.contains(c)) {
        Some(&label) => Err(HierarchyError::Label { step, label }),
        None => Ok(()),
    }
}

/// Trains both steps. Per-step training times are kept on the models.
pub fn train_pipeline(
    ni_train: &Dataset,
    na_train: &Dataset,
    spec: &PipelineSpec,
) -> Result<PipelineModel, HierarchyError> {
    check_step(Step::One, ni_train, &STEP1_CLASSES)?;
    check_step(Step::Two, na_train, &STEP2_CLASSES)?;
    let step1 = fit(&spec.step1, ni_train).map_err(|source| HierarchyError::Learn {
        step: Step::One,
        source,
    })?;
    let step2 = fit(&spec.step2, na_train).map_err(|source| HierarchyError::Learn {
        step: Step::Two,
        source,
    })?;
    Ok(PipelineModel {
        step1,
        step2,
        step2_calls: AtomicU64::new(0),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Component {
    pub router: String,
    pub interface: String,
}

/// The failed link and the interfaces that terminate it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootCause {
    pub link: String,
    pub endpoints: [String; 2],
    pub components: Vec<Component>,
    /// Set when telemetry points at weather rather than equipment.
    #[serde(default)]
    pub weather_suspected: bool,
}

impl RootCause {
    pub fn for_link(topology: &Topology, link: &str) -> Option<Self> {
        let l = topology.link(link)?;
        Some(Self {
            link: l.id.clone(),
            endpoints: [l.a.router.clone(), l.b.router.clone()],
            components: [&l.a, &l.b]
                .into_iter()
                .map(|e| Component {
                    router: e.router.clone(),
                    interface: e.interface.clone(),
                })
                .collect(),
            weather_suspected: false,
        })
    }
}

/// Maps a Step 2 fault class to the link it names in the topology.
pub fn localize(step2_class: u32, topology: &Topology) -> Result<RootCause, HierarchyError> {
    let fault = FaultClass::from_label(step2_class).ok_or(HierarchyError::NotAFault(step2_class))?;
    let (a, b) = fault.link_endpoints();
    let mismatch = || HierarchyError::TopologyMismatch {
        class: step2_class,
        a: a.to_string(),
        b: b.to_string(),
    };
    let link = topology.link_between(a, b).ok_or_else(mismatch)?;
    RootCause::for_link(topology, &link.id).ok_or_else(mismatch)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "class", rename_all = "snake_case")]
pub enum Verdict {
    Intrusion(IncidentClass),
    Fault(FaultClass),
    Normal,
}

impl Verdict {
    /// Label in the merged six-class space.
    pub fn flat_label(self) -> u32 {
        match self {
            Verdict::Normal => 0,
            Verdict::Intrusion(c) => c.label(),
            Verdict::Fault(f) => 3 + f.label(),
        }
    }

    pub fn name(self) -> &'static str {
        self.class().name()
    }

    pub fn class(self) -> WindowClass {
        match self {
            Verdict::Normal => WindowClass::Normal,
            Verdict::Intrusion(c) => WindowClass::Intrusion(c),
            Verdict::Fault(f) => WindowClass::Outage(f),
        }
    }
}

impl From<WindowClass> for Verdict {
    fn from(c: WindowClass) -> Self {
        match c {
            WindowClass::Normal => Verdict::Normal,
            WindowClass::Intrusion(i) => Verdict::Intrusion(i),
            WindowClass::Outage(f) => Verdict::Fault(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnosis {
    #[serde(flatten)]
    pub verdict: Verdict,
    pub root_cause: Option<RootCause>,
    /// Seconds spent identifying: Step 1, Step 2 when invoked, localization.
    pub identification_latency: f64,
}

/// Runs one window through the pipeline. Step 2 runs only when Step 1
/// answers `0`.
pub fn diagnose(
    pipeline: &PipelineModel,
    fv: &FeatureVector,
    topology: &Topology,
) -> Result<Diagnosis, HierarchyError> {
    let started = Instant::now();
    let step1 = pipeline.step1.predict(&fv.values)?;
    let (verdict, root_cause) = match IncidentClass::from_label(step1) {
        Some(incident) => (Verdict::Intrusion(incident), None),
        None => {
            pipeline.step2_calls.fetch_add(1, Ordering::Relaxed);
            let step2 = pipeline.step2.predict(&fv.values)?;
            match FaultClass::from_label(step2) {
                Some(fault) => (Verdict::Fault(fault), Some(localize(step2, topology)?)),
                None => (Verdict::Normal, None),
            }
        }
    };
    Ok(Diagnosis {
        verdict,
        root_cause,
        identification_latency: started.elapsed().as_secs_f64(),
    })
}
