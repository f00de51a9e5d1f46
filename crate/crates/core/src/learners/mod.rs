//! Binary classifiers behind one fit / predict interface.
//!
//! A [`LearnerSpec`] names a [`LearnerKind`] plus hyperparameters and a seed.
//! [`fit`] validates a `LearnerSpec` against the kind's schema and returns an
//! immutable [`FittedModel`]. Every kind produces scores in `[0, 1]`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{data, invalid, Error, Result};

pub mod ensemble;
pub mod kmeans;
pub mod knn;
pub mod linear;
pub mod mlp;
pub mod naive_bayes;
pub mod tree;

pub use tree::{Node, Tree};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    LogisticRegression,
    DecisionTree,
    RandomForest,
    Bagging,
    Adaboost,
    GradientBoosting,
    Rusboost,
    GaussianNb,
    Knn,
    LinearSvm,
    Mlp,
    SelfTraining,
    KmeansAnomaly,
}

/// One hyperparameter in a kind's schema.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParamDef {
    pub name: &'static str,
    pub default: f64,
    pub min: f64,
    pub max: f64,
    pub integer: bool,
}

const fn p(name: &'static str, default: f64, min: f64, max: f64, integer: bool) -> ParamDef {
    ParamDef {
        name,
        default,
        min,
        max,
        integer,
    }
}

const LOGISTIC: &[ParamDef] = &[
    p("l2", 1e-3, 0.0, 1e6, false),
    p("max_iter", 100.0, 1.0, 1e5, true),
    p("tol", 1e-8, 0.0, 1.0, false),
];
const TREE: &[ParamDef] = &[
    p("max_depth", 8.0, 1.0, 64.0, true),
    p("min_samples_leaf", 1.0, 1.0, 1e7, true),
];
const FOREST: &[ParamDef] = &[
    p("n_estimators", 100.0, 1.0, 1e4, true),
    p("max_depth", 16.0, 1.0, 64.0, true),
    p("min_samples_leaf", 1.0, 1.0, 1e7, true),
    // 0 means ceil(sqrt(d))
    p("max_features", 0.0, 0.0, 1e6, true),
];
const BAGGING: &[ParamDef] = &[
    p("n_estimators", 25.0, 1.0, 1e4, true),
    p("max_depth", 8.0, 1.0, 64.0, true),
    p("min_samples_leaf", 1.0, 1.0, 1e7, true),
    p("bootstrap", 1.0, 0.0, 1.0, true),
];
const BOOST: &[ParamDef] = &[
    p("n_estimators", 50.0, 1.0, 1e4, true),
    p("max_depth", 1.0, 1.0, 16.0, true),
    p("learning_rate", 1.0, 1e-6, 10.0, false),
];
const GBM: &[ParamDef] = &[
    p("n_rounds", 100.0, 1.0, 1e4, true),
    p("learning_rate", 0.1, 1e-6, 1.0, false),
    p("max_depth", 3.0, 1.0, 16.0, true),
    p("min_samples_leaf", 1.0, 1.0, 1e7, true),
    p("reg_lambda", 1.0, 0.0, 1e6, false),
];
const NB: &[ParamDef] = &[p("var_floor", 1e-9, 1e-12, 1e6, false)];
const KNN: &[ParamDef] = &[p("k", 5.0, 1.0, 1e6, true)];
const SVM: &[ParamDef] = &[
    p("l2", 1e-3, 1e-9, 1e6, false),
    p("epochs", 50.0, 1.0, 1e5, true),
];
const MLP: &[ParamDef] = &[
    p("hidden", 32.0, 1.0, 4096.0, true),
    p("learning_rate", 0.1, 1e-6, 10.0, false),
    p("max_iter", 500.0, 1.0, 1e6, true),
    p("l2", 1e-4, 0.0, 1e3, false),
];
const SELF_TRAINING: &[ParamDef] = &[
    p("confidence", 0.95, 0.5, 1.0, false),
    p("max_rounds", 10.0, 0.0, 1e4, true),
];
const KMEANS: &[ParamDef] = &[
    p("n_clusters", 8.0, 1.0, 1e5, true),
    p("max_iter", 100.0, 1.0, 1e5, true),
];

impl LearnerKind {
    pub const ALL: [LearnerKind; 13] = [
        LearnerKind::LogisticRegression,
        LearnerKind::DecisionTree,
        LearnerKind::RandomForest,
        LearnerKind::Bagging,
        LearnerKind::Adaboost,
        LearnerKind::GradientBoosting,
        LearnerKind::Rusboost,
        LearnerKind::GaussianNb,
        LearnerKind::Knn,
        LearnerKind::LinearSvm,
        LearnerKind::Mlp,
        LearnerKind::SelfTraining,
        LearnerKind::KmeansAnomaly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::LogisticRegression => "logistic_regression",
            LearnerKind::DecisionTree => "decision_tree",
            LearnerKind::RandomForest => "random_forest",
            LearnerKind::Bagging => "bagging",
            LearnerKind::Adaboost => "adaboost",
            LearnerKind::GradientBoosting => "gradient_boosting",
            LearnerKind::Rusboost => "rusboost",
            LearnerKind::GaussianNb => "gaussian_nb",
            LearnerKind::Knn => "knn",
            LearnerKind::LinearSvm => "linear_svm",
            LearnerKind::Mlp => "mlp",
            LearnerKind::SelfTraining => "self_training",
            LearnerKind::KmeansAnomaly => "kmeans_anomaly",
        }
    }

    pub fn schema(self) -> &'static [ParamDef] {
        match self {
            LearnerKind::LogisticRegression => LOGISTIC,
            LearnerKind::DecisionTree => TREE,
            LearnerKind::RandomForest => FOREST,
            LearnerKind::Bagging => BAGGING,
            LearnerKind::Adaboost | LearnerKind::Rusboost => BOOST,
            LearnerKind::GradientBoosting => GBM,
            LearnerKind::GaussianNb => NB,
            LearnerKind::Knn => KNN,
            LearnerKind::LinearSvm => SVM,
            LearnerKind::Mlp => MLP,
            LearnerKind::SelfTraining => SELF_TRAINING,
            LearnerKind::KmeansAnomaly => KMEANS,
        }
    }

    /// Kinds that accept unlabeled rows in `fit`.
    pub fn accepts_unlabeled(self) -> bool {
        matches!(self, LearnerKind::SelfTraining | LearnerKind::KmeansAnomaly)
    }

    pub fn is_supervised(self) -> bool {
        self != LearnerKind::KmeansAnomaly
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LearnerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        LearnerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| invalid(format!("unknown learner kind `{s}`")))
    }
}

pub type Hyperparams = BTreeMap<String, f64>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    #[serde(default)]
    pub params: Hyperparams,
    #[serde(default)]
    pub seed: u64,
    /// Base learner for `self_training`; logistic regression when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<Box<LearnerSpec>>,
}

impl LearnerSpec {
    pub fn new(kind: LearnerKind) -> Self {
        LearnerSpec {
            kind,
            params: BTreeMap::new(),
            seed: 0,
            base: None,
        }
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_base(mut self, base: LearnerSpec) -> Self {
        self.base = Some(Box::new(base));
        self
    }

    /// Hyperparameter value, falling back to the schema default.
    pub fn param(&self, name: &str) -> f64 {
        if let Some(v) = self.params.get(name) {
            return *v;
        }
        self.kind
            .schema()
            .iter()
            .find(|d| d.name == name)
            .map_or(f64::NAN, |d| d.default)
    }

    pub fn usize_param(&self, name: &str) -> usize {
        self.param(name).round().max(0.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        let schema = self.kind.schema();
        for (name, &value) in &self.params {
            let def = schema.iter().find(|d| d.name == name).ok_or_else(|| {
                invalid(format!("unknown hyperparameter `{name}` for {}", self.kind))
            })?;
            if !value.is_finite() || value < def.min || value > def.max {
                return Err(invalid(format!(
                    "hyperparameter `{name}` = {value} outside [{}, {}] for {}",
                    def.min, def.max, self.kind
                )));
            }
            if def.integer && value.fract() != 0.0 {
                return Err(invalid(format!(
                    "hyperparameter `{name}` must be an integer for {}",
                    self.kind
                )));
            }
        }
        if let Some(base) = &self.base {
            if self.kind != LearnerKind::SelfTraining {
                return Err(invalid("only self_training takes a base learner"));
            }
            if !base.kind.is_supervised() || base.kind == LearnerKind::SelfTraining {
                return Err(invalid("self_training base must be a supervised learner"));
            }
            base.validate()?;
        }
        Ok(())
    }
}

/// Kind-specific learned state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    Logistic(linear::LogisticModel),
    Tree { tree: Tree },
    /// Mean of member probabilities.
    Forest { trees: Vec<Tree> },
    /// Fraction of members voting positive.
    Vote { trees: Vec<Tree> },
    Boost(ensemble::BoostModel),
    GradientBoosting(ensemble::GbmModel),
    GaussianNb(naive_bayes::GaussianNbModel),
    Knn(knn::KnnModel),
    LinearSvm(linear::SvmModel),
    Mlp(mlp::MlpModel),
    SelfTraining {
        base: Box<FittedModel>,
        rounds: usize,
        pseudo_labeled: usize,
    },
    Kmeans(kmeans::KmeansModel),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FittedModel {
    pub spec: LearnerSpec,
    pub params: ModelParams,
    pub feature_names: Vec<String>,
    pub fit_seconds: f64,
}

/// Equality of learned state; wall-clock timing is ignored.
impl PartialEq for FittedModel {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec && self.params == other.params && self.feature_names == other.feature_names
    }
}

impl FittedModel {
    pub fn from_parts(spec: LearnerSpec, params: ModelParams, feature_names: Vec<String>) -> Self {
        FittedModel {
            spec,
            params,
            feature_names,
            fit_seconds: 0.0,
        }
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Self {
        self.feature_names = names;
        self
    }

    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.n_features() {
            return Err(invalid(format!(
                "model expects {} features, got {}",
                self.n_features(),
                x.ncols()
            )));
        }
        Ok(self.scores(x))
    }

    /// Scores without the width check.
    pub(crate) fn scores(&self, x: ArrayView2<f64>) -> Vec<f64> {
        let rows = x.axis_iter(Axis(0));
        let out: Vec<f64> = match &self.params {
            ModelParams::Logistic(m) => m.predict(x),
            ModelParams::Tree { tree } => rows.map(|r| tree.predict_row(r)).collect(),
            ModelParams::Forest { trees } => rows
                .map(|r| trees.iter().map(|t| t.predict_row(r)).sum::<f64>() / trees.len() as f64)
                .collect(),
            ModelParams::Vote { trees } => rows
                .map(|r| {
                    trees.iter().filter(|t| t.predict_row(r) >= 0.5).count() as f64
                        / trees.len() as f64
                })
                .collect(),
            ModelParams::Boost(m) => m.predict(x),
            ModelParams::GradientBoosting(m) => m.predict(x),
            ModelParams::GaussianNb(m) => m.predict(x),
            ModelParams::Knn(m) => m.predict(x),
            ModelParams::LinearSvm(m) => m.predict(x),
            ModelParams::Mlp(m) => m.predict(x),
            ModelParams::SelfTraining { base, .. } => base.scores(x),
            ModelParams::Kmeans(m) => m.predict(x),
        };
        out.into_iter()
            .map(|p| if p.is_finite() { p.clamp(0.0, 1.0) } else { 0.5 })
            .collect()
    }

    /// Class 1 iff the probability is at least `threshold`.
    pub fn predict(&self, x: ArrayView2<f64>, threshold: f64) -> Result<Vec<u8>> {
        Ok(threshold_scores(&self.predict_proba(x)?, threshold))
    }
}

pub fn threshold_scores(scores: &[f64], threshold: f64) -> Vec<u8> {
    scores.iter().map(|&p| u8::from(p >= threshold)).collect()
}

fn default_names(d: usize) -> Vec<String> {
    (0..d).map(|j| format!("x{j}")).collect()
}

/// Fits `spec` on fully labeled data.
pub fn fit_labeled(spec: &LearnerSpec, x: ArrayView2<f64>, y: &[u8]) -> Result<FittedModel> {
    let y: Vec<Option<u8>> = y.iter().map(|&v| Some(v)).collect();
    fit(spec, x, &y)
}

/// Fits `spec`. `None` labels are allowed only for kinds that accept
/// unlabeled rows.
pub fn fit(spec: &LearnerSpec, x: ArrayView2<f64>, y: &[Option<u8>]) -> Result<FittedModel> {
    spec.validate()?;
    if x.nrows() != y.len() {
        return Err(invalid(format!(
            "X has {} rows but y has {}",
            x.nrows(),
            y.len()
        )));
    }
    if x.nrows() == 0 {
        return Err(data("cannot fit on zero rows"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(data("feature matrix has non-finite values"));
    }
    if y.iter().flatten().any(|&v| v > 1) {
        return Err(data("labels must be 0 or 1"));
    }
    let has_missing = y.iter().any(Option::is_none);
    if has_missing && !spec.kind.accepts_unlabeled() {
        return Err(data(format!(
            "{} is supervised and cannot take unlabeled rows",
            spec.kind
        )));
    }
    if spec.kind.is_supervised() {
        let pos = y.iter().filter(|v| **v == Some(1)).count();
        let neg = y.iter().filter(|v| **v == Some(0)).count();
        if pos == 0 || neg == 0 {
            return Err(data(format!(
                "{} needs both classes among labeled rows",
                spec.kind
            )));
        }
    }
    let start = Instant::now();
    let params = fit_params(spec, x, y)?;
    Ok(FittedModel {
        spec: spec.clone(),
        params,
        feature_names: default_names(x.ncols()),
        fit_seconds: start.elapsed().as_secs_f64(),
    })
}

fn fit_params(spec: &LearnerSpec, x: ArrayView2<f64>, y: &[Option<u8>]) -> Result<ModelParams> {
    let labels = || -> Vec<u8> { y.iter().map(|v| v.unwrap_or(0)).collect() };
    Ok(match spec.kind {
        LearnerKind::LogisticRegression => ModelParams::Logistic(linear::fit_logistic(
            x,
            &labels(),
            spec.param("l2"),
            spec.usize_param("max_iter"),
            spec.param("tol"),
        )),
        LearnerKind::DecisionTree => {
            let y = labels();
            let cfg = tree::TreeConfig {
                max_depth: spec.usize_param("max_depth"),
                min_samples_leaf: spec.usize_param("min_samples_leaf"),
                max_features: None,
            };
            let w = vec![1.0; y.len()];
            ModelParams::Tree {
                tree: tree::fit_classifier(x, &y, &w, (0..y.len()).collect(), cfg, None),
            }
        }
        LearnerKind::RandomForest => ensemble::fit_forest(spec, x, &labels()),
        LearnerKind::Bagging => ensemble::fit_bagging(spec, x, &labels()),
        LearnerKind::Adaboost => {
            ModelParams::Boost(ensemble::fit_adaboost(spec, x, &labels(), false))
        }
        LearnerKind::Rusboost => {
            ModelParams::Boost(ensemble::fit_adaboost(spec, x, &labels(), true))
        }
        LearnerKind::GradientBoosting => {
            ModelParams::GradientBoosting(ensemble::fit_gbm(spec, x, &labels()))
        }
        LearnerKind::GaussianNb => ModelParams::GaussianNb(naive_bayes::fit(
            x,
            &labels(),
            spec.param("var_floor"),
        )),
        LearnerKind::Knn => ModelParams::Knn(knn::KnnModel::fit(x, &labels(), spec.usize_param("k"))),
        LearnerKind::LinearSvm => ModelParams::LinearSvm(linear::fit_svm(
            x,
            &labels(),
            spec.param("l2"),
            spec.usize_param("epochs"),
        )),
        LearnerKind::Mlp => ModelParams::Mlp(mlp::fit(spec, x, &labels())),
        LearnerKind::SelfTraining => fit_self_training(spec, x, y)?,
        LearnerKind::KmeansAnomaly => ModelParams::Kmeans(kmeans::fit(
            x,
            spec.usize_param("n_clusters"),
            spec.usize_param("max_iter"),
            spec.seed,
        )),
    })
}

fn fit_self_training(
    spec: &LearnerSpec,
    x: ArrayView2<f64>,
    y: &[Option<u8>],
) -> Result<ModelParams> {
    let base_spec = spec
        .base
        .as_deref()
        .cloned()
        .unwrap_or_else(|| LearnerSpec::new(LearnerKind::LogisticRegression).with_seed(spec.seed));
    let confidence = spec.param("confidence");
    let max_rounds = spec.usize_param("max_rounds");
    let mut labels: Vec<Option<u8>> = y.to_vec();
    let fit_base = |labels: &[Option<u8>]| -> Result<FittedModel> {
        let rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].is_some()).collect();
        let xl = x.select(Axis(0), &rows);
        let yl: Vec<u8> = rows.iter().filter_map(|&i| labels[i]).collect();
        fit_labeled(&base_spec, xl.view(), &yl)
    };
    let mut model = fit_base(&labels)?;
    let mut rounds = 0;
    let mut pseudo = 0;
    while rounds < max_rounds {
        let unlabeled: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].is_none()).collect();
        if unlabeled.is_empty() {
            break;
        }
        let xu: Array2<f64> = x.select(Axis(0), &unlabeled);
        let probs = model.scores(xu.view());
        let mut added = 0;
        for (&i, &p) in unlabeled.iter().zip(&probs) {
            if p >= confidence {
                labels[i] = Some(1);
                added += 1;
            } else if 1.0 - p >= confidence {
                labels[i] = Some(0);
                added += 1;
            }
        }
        if added == 0 {
            break;
        }
        pseudo += added;
        rounds += 1;
        model = fit_base(&labels)?;
    }
    Ok(ModelParams::SelfTraining {
        base: Box::new(model),
        rounds,
        pseudo_labeled: pseudo,
    })
}
