use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::boost::{fit_gradient_boost, BoostParams, Booster};
use super::cart::{fit_cart, CartParams, DecisionTree};
use super::forest::{fit_random_forest, ForestParams, RandomForest};
use super::knn::{fit_knn, Knn};
use super::logistic::{self, fit_logistic, Logistic};
use super::nb::{fit_gaussian_nb, GaussianNb, DEFAULT_VAR_FLOOR};
use super::{Dataset, LearnError, Scaler};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    GaussianNb,
    Logistic,
    Cart,
    RandomForest,
    Knn,
    GradientBoost,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::GaussianNb,
        Algorithm::Logistic,
        Algorithm::Cart,
        Algorithm::RandomForest,
        Algorithm::Knn,
        Algorithm::GradientBoost,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::GaussianNb => "gaussian_nb",
            Algorithm::Logistic => "logistic",
            Algorithm::Cart => "cart",
            Algorithm::RandomForest => "random_forest",
            Algorithm::Knn => "knn",
            Algorithm::GradientBoost => "gradient_boost",
        }
    }

    pub fn hyperparameter_names(self) -> &'static [&'static str] {
        match self {
            Algorithm::GaussianNb => &["var_floor"],
            Algorithm::Logistic => &["learning_rate", "iterations", "l2"],
            Algorithm::Cart => &["max_depth", "min_samples_split"],
            Algorithm::RandomForest => &[
                "n_estimators",
                "bootstrap",
                "features_per_split",
                "max_depth",
                "min_samples_split",
            ],
            Algorithm::Knn => &["k"],
            Algorithm::GradientBoost => &[
                "n_estimators",
                "learning_rate",
                "max_depth",
                "min_child_weight",
                "lambda",
            ],
        }
    }

    /// Whether inputs are z-scored before fitting and prediction.
    pub fn standardizes(self) -> bool {
        matches!(self, Algorithm::Logistic | Algorithm::Knn)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = LearnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| LearnError::Document(format!("unknown algorithm `{s}`")))
    }
}

/// A hyperparameter value as written in a config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HyperValue {
    Bool(bool),
    Number(f64),
}

impl HyperValue {
    fn as_f64(self) -> f64 {
        match self {
            HyperValue::Bool(b) => f64::from(u8::from(b)),
            HyperValue::Number(x) => x,
        }
    }
}

impl From<f64> for HyperValue {
    fn from(x: f64) -> Self {
        HyperValue::Number(x)
    }
}

impl From<bool> for HyperValue {
    fn from(b: bool) -> Self {
        HyperValue::Bool(b)
    }
}

/// Fully resolved hyperparameters, defaults filled in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum ModelParams {
    GaussianNb {
        var_floor: f64,
    },
    Logistic {
        learning_rate: f64,
        iterations: usize,
        l2: f64,
    },
    Cart(CartParams),
    RandomForest(ForestParams),
    Knn {
        k: usize,
    },
    GradientBoost(BoostParams),
}

#[derive(Deserialize)]
struct RawSpec {
    algorithm: Algorithm,
    #[serde(default)]
    hyperparameters: BTreeMap<String, HyperValue>,
    #[serde(default)]
    seed: u64,
}

/// Algorithm choice, hyperparameter overrides and seed. Unknown or invalid
/// hyperparameters are rejected when the spec is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec")]
pub struct ModelSpec {
    algorithm: Algorithm,
    hyperparameters: BTreeMap<String, HyperValue>,
    seed: u64,
    #[serde(skip_serializing)]
    params: ModelParams,
}

impl TryFrom<RawSpec> for ModelSpec {
    type Error = LearnError;

    fn try_from(raw: RawSpec) -> Result<Self, Self::Error> {
        ModelSpec::new(raw.algorithm, raw.hyperparameters, raw.seed)
    }
}

struct Lookup<'a> {
    map: &'a BTreeMap<String, HyperValue>,
}

impl Lookup<'_> {
    fn real(&self, name: &str, default: f64, min: f64, inclusive: bool) -> Result<f64, LearnError> {
        let Some(v) = self.map.get(name) else {
            return Ok(default);
        };
        let x = v.as_f64();
        let ok = x.is_finite() && if inclusive { x >= min } else { x > min };
        if !ok {
            let op = if inclusive { ">=" } else { ">" };
            return Err(LearnError::InvalidHyperparameter {
                name: name.into(),
                reason: format!("expected a finite value {op} {min}, got {x}"),
            });
        }
        Ok(x)
    }

    fn count(&self, name: &str, default: Option<usize>, min: usize) -> Result<Option<usize>, LearnError> {
        let Some(v) = self.map.get(name) else {
            return Ok(default);
        };
        let x = v.as_f64();
        if !(x.is_finite() && x.fract() == 0.0 && x >= min as f64 && x <= u32::MAX as f64) {
            return Err(LearnError::InvalidHyperparameter {
                name: name.into(),
                reason: format!("expected an integer >= {min}, got {x}"),
            });
        }
        Ok(Some(x as usize))
    }

    fn flag(&self, name: &str, default: bool) -> Result<bool, LearnError> {
        match self.map.get(name) {
            None => Ok(default),
            Some(HyperValue::Bool(b)) => Ok(*b),
            Some(HyperValue::Number(x)) if *x == 0.0 || *x == 1.0 => Ok(*x == 1.0),
            Some(HyperValue::Number(x)) => Err(LearnError::InvalidHyperparameter {
                name: name.into(),
                reason: format!("expected true/false, got {x}"),
            }),
        }
    }

    /// `0` means unlimited.
    fn depth(&self) -> Result<Option<usize>, LearnError> {
        Ok(self.count("max_depth", Some(0), 0)?.filter(|&d| d > 0))
    }
}

fn resolve(algorithm: Algorithm, map: &BTreeMap<String, HyperValue>) -> Result<ModelParams, LearnError> {
    if let Some(name) = map
        .keys()
        .find(|k| !algorithm.hyperparameter_names().contains(&k.as_str()))
    {
        return Err(LearnError::UnknownHyperparameter {
            algorithm: algorithm.name(),
            name: name.clone(),
        });
    }
    let h = Lookup { map };
    let tree = |h: &Lookup| -> Result<CartParams, LearnError> {
        Ok(CartParams {
            max_depth: h.depth()?,
            min_samples_split: h.count("min_samples_split", Some(2), 2)?.unwrap_or(2) as u64,
        })
    };
    Ok(match algorithm {
        Algorithm::GaussianNb => ModelParams::GaussianNb {
            var_floor: h.real("var_floor", DEFAULT_VAR_FLOOR, 0.0, false)?,
        },
        Algorithm::Logistic => ModelParams::Logistic {
            learning_rate: h.real("learning_rate", logistic::DEFAULT_LEARNING_RATE, 0.0, false)?,
            iterations: h
                .count("iterations", Some(logistic::DEFAULT_ITERATIONS), 1)?
                .unwrap_or(1),
            l2: h.real("l2", logistic::DEFAULT_L2, 0.0, true)?,
        },
        Algorithm::Cart => ModelParams::Cart(tree(&h)?),
        Algorithm::RandomForest => ModelParams::RandomForest(ForestParams {
            n_trees: h.count("n_estimators", Some(100), 1)?.unwrap_or(1),
            bootstrap: h.flag("bootstrap", true)?,
            features_per_split: h.count("features_per_split", None, 1)?,
            tree: tree(&h)?,
        }),
        Algorithm::Knn => ModelParams::Knn {
            k: h.count("k", Some(5), 1)?.unwrap_or(1),
        },
        Algorithm::GradientBoost => {
            let d = BoostParams::default();
            ModelParams::GradientBoost(BoostParams {
                n_rounds: h.count("n_estimators", Some(d.n_rounds), 1)?.unwrap_or(1),
                learning_rate: h.real("learning_rate", d.learning_rate, 0.0, true)?,
                max_depth: h.count("max_depth", Some(d.max_depth), 1)?.unwrap_or(1),
                min_child_weight: h.real("min_child_weight", d.min_child_weight, 0.0, true)?,
                lambda: h.real("lambda", d.lambda, 0.0, true)?,
            })
        }
    })
}

impl ModelSpec {
    pub fn new(
        algorithm: Algorithm,
        hyperparameters: BTreeMap<String, HyperValue>,
        seed: u64,
    ) -> Result<Self, LearnError> {
        let params = resolve(algorithm, &hyperparameters)?;
        Ok(Self {
            algorithm,
            hyperparameters,
            seed,
            params,
        })
    }

    /// All defaults.
    pub fn default_for(algorithm: Algorithm, seed: u64) -> Self {
        Self::new(algorithm, BTreeMap::new(), seed).expect("defaults are valid")
    }

    /// Returns a copy with one hyperparameter set.
    pub fn with(&self, name: &str, value: impl Into<HyperValue>) -> Result<Self, LearnError> {
        let mut map = self.hyperparameters.clone();
        map.insert(name.to_string(), value.into());
        Self::new(self.algorithm, map, self.seed)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn hyperparameters(&self) -> &BTreeMap<String, HyperValue> {
        &self.hyperparameters
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> ModelParams {
        self.params
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fitted {
    GaussianNb(GaussianNb),
    Logistic(Logistic),
    Cart(DecisionTree),
    RandomForest(RandomForest),
    Knn(Knn),
    GradientBoost(Booster),
}

/// A fitted classifier. Serializes to a versioned JSON document; the
/// training time is a measurement, not model state, and is not serialized.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub algorithm: Algorithm,
    pub classes: Vec<u32>,
    pub n_features: usize,
    pub scaler: Option<Scaler>,
    pub fitted: Fitted,
    #[serde(skip)]
    pub training_time: f64,
}

impl PartialEq for TrainedModel {
    fn eq(&self, other: &Self) -> bool {
        self.format_version == other.format_version
            && self.algorithm == other.algorithm
            && self.classes == other.classes
            && self.n_features == other.n_features
            && self.scaler == other.scaler
            && self.fitted == other.fitted
    }
}

impl TrainedModel {
    fn predict_index(&self, x: &[f64]) -> usize {
        match &self.fitted {
            Fitted::GaussianNb(m) => m.predict_index(x),
            Fitted::Logistic(m) => m.predict_index(x),
            Fitted::Cart(m) => m.predict_index(x),
            Fitted::RandomForest(m) => m.predict_index(x),
            Fitted::Knn(m) => m.predict_index(x),
            Fitted::GradientBoost(m) => m.predict_index(x),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<u32, LearnError> {
        if x.len() != self.n_features {
            return Err(LearnError::ModelArity {
                expected: self.n_features,
                found: x.len(),
            });
        }
        let idx = match &self.scaler {
            Some(s) => {
                let mut z = Vec::with_capacity(x.len());
                s.transform_row(x, &mut z);
                self.predict_index(&z)
            }
            None => self.predict_index(x),
        };
        Ok(self.classes[idx])
    }

    pub fn predict_dataset(&self, data: &Dataset) -> Result<Vec<u32>, LearnError> {
        if data.n_features() != self.n_features && !data.is_empty() {
            return Err(LearnError::ModelArity {
                expected: self.n_features,
                found: data.n_features(),
            });
        }
        data.rows().map(|r| self.predict(r)).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, LearnError> {
        let model: TrainedModel = serde_json::from_str(text).map_err(|e| LearnError::Document(e.to_string()))?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(LearnError::Document(format!(
                "format version {} is not supported (expected {MODEL_FORMAT_VERSION})",
                model.format_version
            )));
        }
        Ok(model)
    }
}

/// Fits `spec` on `train`. The class set is the labels present in `train`;
/// `training_time` covers scaling and fitting.
pub fn fit(spec: &ModelSpec, train: &Dataset) -> Result<TrainedModel, LearnError> {
    if train.is_empty() {
        return Err(LearnError::Empty(format!("{} needs training rows", spec.algorithm)));
    }
    let started = Instant::now();
    let classes = train.class_set().to_vec();
    let (scaler, scaled);
    let data = if spec.algorithm.standardizes() {
        let s = Scaler::fit(train)?;
        scaled = s.transform(train);
        scaler = Some(s);
        &scaled
    } else {
        scaler = None;
        train
    };
    let targets = data.class_indices(&classes)?;
    let k = classes.len();
    let fitted = match spec.params {
        ModelParams::GaussianNb { var_floor } => Fitted::GaussianNb(fit_gaussian_nb(data, &classes, var_floor)?),
        ModelParams::Logistic {
            learning_rate,
            iterations,
            l2,
        } => Fitted::Logistic(fit_logistic(data, &classes, learning_rate, iterations, l2)?),
        ModelParams::Cart(p) => Fitted::Cart(fit_cart(data, &targets, k, p)),
        ModelParams::RandomForest(p) => Fitted::RandomForest(fit_random_forest(data, &targets, k, p, spec.seed)),
        ModelParams::Knn { k: neighbours } => Fitted::Knn(fit_knn(data, &targets, k, neighbours)?),
        ModelParams::GradientBoost(p) => Fitted::GradientBoost(fit_gradient_boost(data, &targets, k, p)),
    };
    Ok(TrainedModel {
        format_version: MODEL_FORMAT_VERSION,
        algorithm: spec.algorithm,
        classes,
        n_features: train.n_features(),
        scaler,
        fitted,
        training_time: started.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_hyperparameter_rejected() {
        let spec = ModelSpec::default_for(Algorithm::Knn, 0);
        assert!(matches!(
            spec.with("n_estimators", 3.0),
            Err(LearnError::UnknownHyperparameter { algorithm: "knn", .. })
        ));
        assert!(matches!(
            spec.with("k", 2.5),
            Err(LearnError::InvalidHyperparameter { .. })
        ));
        assert_eq!(spec.with("k", 3.0).unwrap().params(), ModelParams::Knn { k: 3 });
    }

    #[test]
    fn spec_from_toml() {
        let spec: ModelSpec = toml::from_str(
            "algorithm = \"random_forest\"\nseed = 9\n[hyperparameters]\nn_estimators = 60\nbootstrap = false\n",
        )
        .unwrap();
        let ModelParams::RandomForest(p) = spec.params() else {
            panic!("wrong params")
        };
        assert_eq!((p.n_trees, p.bootstrap, spec.seed()), (60, false, 9));
        let bad = toml::from_str::<ModelSpec>("algorithm = \"cart\"\n[hyperparameters]\nk = 3\n");
        assert!(bad.is_err());
    }

    #[test]
    fn json_round_trip_every_algorithm() {
        let d = Dataset::new(
            (0..12).map(|i| vec![i as f64, (i % 3) as f64]).collect(),
            (0..12).map(|i| u32::from(i >= 6) * 2).collect(),
        )
        .unwrap();
        for a in Algorithm::ALL {
            let spec = match a {
                Algorithm::RandomForest => ModelSpec::default_for(a, 1).with("n_estimators", 5.0).unwrap(),
                Algorithm::GradientBoost => ModelSpec::default_for(a, 1).with("n_estimators", 5.0).unwrap(),
                Algorithm::Knn => ModelSpec::default_for(a, 1).with("k", 3.0).unwrap(),
                _ => ModelSpec::default_for(a, 1),
            };
            let m = fit(&spec, &d).unwrap();
            assert_eq!(m.classes, vec![0, 2]);
            let back = TrainedModel::from_json(&m.to_json()).unwrap();
            assert_eq!(back, m, "{a}");
            assert_eq!(back.predict_dataset(&d).unwrap(), m.predict_dataset(&d).unwrap());
            assert!(m.predict(&[1.0]).is_err());
        }
    }

    #[test]
    fn version_mismatch_rejected() {
        let d = Dataset::new(vec![vec![0.0], vec![1.0]], vec![0, 1]).unwrap();
        let m = fit(&ModelSpec::default_for(Algorithm::Cart, 0), &d).unwrap();
        let doc = m.to_json().replace("\"format_version\": 1", "\"format_version\": 99");
        assert!(matches!(TrainedModel::from_json(&doc), Err(LearnError::Document(_))));
    }
}
